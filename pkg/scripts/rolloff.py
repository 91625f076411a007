"""FourthH margin versus input frequency with single-pole gate dynamics.

    python scripts/rolloff.py [--pole 1e9] [--out results/rolloff]

For every 4T preset: tune FourthH, find the highest frequency keeping a
10 dB margin, repeat with all gate poles doubled, and sweep the margin from
1 MHz up to 16x the limit.  Absolute frequencies depend on the assumed gate
pole, which is a free parameter here.
"""
import argparse
from pathlib import Path

import numpy as np

from fefetmult.harmonics import Dynamics, dominance_margin, max_operating_frequency
from fefetmult.tuner import Mode, tune

from _common import FOUR_T_ORDER, default_circuit


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--pole", type=float, default=1e9, help="gate pole in Hz")
    ap.add_argument("--points", type=int, default=41)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
    print(f"{'preset':<14}{'f_max':>11}{'f_max(2x)':>11}{'ratio':>7}  monotone")
    for preset in FOUR_T_ORDER:
        cfg = tune(default_circuit(preset), Mode.FourthH)
        c1 = default_circuit(preset, gate_pole_hz=args.pole).with_vths(cfg.vths)
        c2 = default_circuit(preset, gate_pole_hz=2 * args.pole).with_vths(cfg.vths)
        r1 = max_operating_frequency(c1, cfg.drive(1e3), 4)
        r2 = max_operating_frequency(c2, cfg.drive(1e3), 4)
        print(f"{preset.value:<14}{r1.f_max:11.4g}{r2.f_max:11.4g}{r2.f_max / r1.f_max:7.3f}  "
              f"{'yes' if r1.monotone else 'no'}")
        if args.out:
            fs = np.geomspace(1e6, 16 * r1.f_max, args.points)
            rows = ["f_in,margin_db"]
            for f in fs:
                m = dominance_margin(c1, cfg.drive(f), 4, 256, 4, Dynamics.SINGLE_POLE).dominance_margin_db
                rows.append(f"{f:.6g},{m:.6g}")
            (args.out / f"{preset.value}_margin.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
