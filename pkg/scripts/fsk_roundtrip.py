"""Program once, then key the operating point to switch between two modes.

    python scripts/fsk_roundtrip.py [--preset 4n-serial] [--pair 1 3] [--trials 20] [--out results/fsk]

Prints the two levels, the shared amplitude and the bit error count over
random 16-bit words.  With --out, writes the first word's waveform CSV.
"""
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from fefetmult.fsk import fsk_decode_check, fsk_waveform, plan_fsk
from fefetmult.netlist import Preset
from fefetmult.tuner import Mode

from _common import default_circuit


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--preset", default="4n-serial")
    ap.add_argument("--pair", type=int, nargs=2, default=(1, 3), metavar=("ONE", "ZERO"))
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    circuit = default_circuit(Preset.parse(args.preset))
    one, zero = (Mode.parse(str(k)) for k in args.pair)
    plan, cfg = plan_fsk(circuit, [1, 0], one, zero)
    programmed = circuit.with_vths(cfg.vths)
    print(f"levels: bit1 v_op={plan.level_one_vop:.4f} ({one.name}), bit0 v_op={plan.level_zero_vop:.4f} "
          f"({zero.name}), amplitude={plan.amplitude:.4f}")
    rng = np.random.default_rng(args.seed)
    errors = 0
    for t in range(args.trials):
        p = replace(plan, bit_sequence=tuple(rng.integers(0, 2, 16)))
        wf = fsk_waveform(programmed, p)
        got = fsk_decode_check(wf, p.carrier_f, p.bit_periods)
        errors += sum(g != e for g, e in zip(got, p.expected_orders()))
        if t == 0 and args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "fsk_waveform.csv").write_text(wf.to_csv())
    print(f"bit errors: {errors} / {16 * args.trials}")


if __name__ == "__main__":
    main()
