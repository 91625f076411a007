"""Tune every 4T preset for each multiplication mode and tabulate the output spectrum.

    python scripts/mode_spectra.py [--f-in 1e6] [--out results/spectra]

Prints one row per (preset, mode): relative power of orders 1..6 and the
dominance margin.  With --out, also writes each config and spectrum CSV.
"""
import argparse
import time
from pathlib import Path

from fefetmult.harmonics import dominance_margin
from fefetmult.tuner import Mode, tune

from _common import FOUR_T_ORDER, default_circuit


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--f-in", type=float, default=1e6)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
    print(f"{'preset':<14}{'mode':<9}" + "".join(f"{f'H{k} dB':>9}" for k in range(1, 7)) + f"{'margin':>9}{'t/s':>6}")
    for preset in FOUR_T_ORDER:
        circuit = default_circuit(preset)
        for mode in Mode:
            t0 = time.perf_counter()
            cfg = tune(circuit, mode)
            rep = dominance_margin(circuit.with_vths(cfg.vths), cfg.drive(args.f_in), mode.order)
            cols = "".join(f"{rep.harmonic_power_db[k]:9.1f}" for k in range(1, 7))
            print(f"{preset.value:<14}{mode.name:<9}{cols}{rep.dominance_margin_db:9.1f}"
                  f"{time.perf_counter() - t0:6.1f}")
            if args.out:
                stem = f"{preset.value}_{mode.name}"
                (args.out / f"{stem}.cfg").write_text(cfg.to_text())
                (args.out / f"{stem}_spectrum.csv").write_text(rep.to_csv())


if __name__ == "__main__":
    main()
