"""Command-line entry point: ``fefetmult <subcommand> ...``.

Files land in ``--out`` when given, otherwise in ``$FEFETMULT_OUTDIR``
(default: the current directory) under a per-subcommand name.  Reports go
to stdout; diagnostics go to stderr.  Exit status: 0 ok, 1 usage error,
2 bad input or solver failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import build_circuit, transfer_sweep
from .fsk import FskPlan, UnsupportedPair, fsk_decode_check, fsk_waveform, plan_fsk
from .harmonics import Drive, Dynamics, harmonic_report, max_operating_frequency, power_spectrum, \
    simulate_transient
from .netlist import NetlistError, parse_netlist
from .programming import plan_to_csv, plan_write_sequence, program_circuit
from .tuner import Mode, MultiplierConfig, UnsupportedMode, default_window, tune

OUTDIR_ENV = "FEFETMULT_OUTDIR"


@dataclass
class CommandOutcome:
    exit_code: int
    artifacts: list = field(default_factory=list)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _g(x) -> str:
    return format(float(x), ".12g")


def _load_netlist(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read netlist {path}: {e.strerror}") from None
    try:
        return parse_netlist(text)
    except NetlistError as e:
        raise DataError(f"{path}: {e}") from None


def _load_config(path) -> MultiplierConfig:
    try:
        return MultiplierConfig.from_text(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e.strerror}") from None
    except ValueError as e:
        raise DataError(f"{path}: {e}") from None


def _programmed(spec, config):
    return program_circuit(build_circuit(spec), config.vths)


def _target(args, default_name) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUTDIR_ENV, ".")) / default_name


def _write(path: Path, text: str, outcome: CommandOutcome):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    outcome.artifacts.append(str(path))


def _cmd_sweep(args, out):
    spec = _load_netlist(args.netlist)
    circuit = _programmed(spec, _load_config(args.config)) if args.config else build_circuit(spec)
    lo, hi = default_window(spec)
    vmin = lo if args.vmin is None else args.vmin
    vmax = hi if args.vmax is None else args.vmax
    if not vmax > vmin:
        raise DataError("--vmax must exceed --vmin")
    curve = transfer_sweep(circuit, vmin, vmax, args.points)
    _write(_target(args, "sweep.csv"), curve.to_csv(), out)
    for e in curve.extrema:
        print(f"extremum kind={e.kind} vin={_g(e.vin)} iout={_g(e.iout)}")


def _cmd_configure(args, out):
    spec = _load_netlist(args.netlist)
    config = tune(build_circuit(spec), Mode.parse(args.mode), budget=args.budget)
    text = config.to_text()
    _write(_target(args, "config.txt"), text, out)
    sys.stdout.write(text)


def _cmd_spectrum(args, out):
    spec = _load_netlist(args.netlist)
    config = _load_config(args.config)
    circuit = _programmed(spec, config)
    target = args.target or config.mode.order
    dyn = Dynamics(args.dynamics)
    wf = simulate_transient(circuit, config.drive(args.fin), args.spp, args.periods, dyn)
    report = harmonic_report(power_spectrum(wf), target)
    base = _target(args, "spectrum.csv")
    _write(base, report.to_csv(), out)
    _write(base.with_name(base.stem + "_report.txt"), report.to_text(), out)
    if args.waveform:
        _write(base.with_name(base.stem + "_waveform.csv"), wf.to_csv(), out)
    sys.stdout.write(report.to_text())


def _cmd_maxfreq(args, out):
    spec = _load_netlist(args.netlist)
    config = _load_config(args.config)
    circuit = _programmed(spec, config)
    order = Mode.parse(args.mode).order if args.mode else config.mode.order
    try:
        res = max_operating_frequency(circuit, Drive(config.v_op, config.amplitude, args.fmin), order,
                                      args.margin, args.fmin, args.fmax)
    except ValueError as e:
        raise DataError(str(e)) from None
    _write(_target(args, "maxfreq.txt"), res.to_text(), out)
    sys.stdout.write(res.to_text())


def _cmd_fsk(args, out):
    spec = _load_netlist(args.netlist)
    bits = [int(c) for c in args.bits if c in "01"]
    if len(bits) != len(args.bits.strip()):
        raise UsageError("--bits must be a string of 0 and 1")
    try:
        one, zero = (Mode.parse(m) for m in args.pair.split(","))
    except ValueError:
        raise UsageError("--pair expects two modes, e.g. 1,3") from None
    config = _load_config(args.config) if args.config else None
    circuit = build_circuit(spec)
    plan, config = plan_fsk(circuit, bits, one, zero, args.carrier, args.bit_periods, config)
    programmed = program_circuit(circuit, config.vths)
    wf = fsk_waveform(programmed, plan)
    _write(_target(args, "fsk.csv"), wf.to_csv(), out)
    decoded = fsk_decode_check(wf, plan.carrier_f, plan.bit_periods) if bits else []
    print(f"level_one_vop={_g(plan.level_one_vop)}")
    print(f"level_zero_vop={_g(plan.level_zero_vop)}")
    print(f"amplitude={_g(plan.amplitude)}")
    for k, (b, want, got) in enumerate(zip(bits, plan.expected_orders(), decoded)):
        print(f"bit {k} value={b} expected_order={want} decoded_order={got}")
    print(f"bit_errors={sum(w != g for w, g in zip(plan.expected_orders(), decoded))}")


def _cmd_write_plan(args, out):
    spec = _load_netlist(args.netlist)
    targets = _load_config(args.config).vths if args.config else {}
    for item in args.vth or []:
        name, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--vth expects NAME=VOLTS, got {item!r}")
        try:
            targets[name] = float(val)
        except ValueError:
            raise UsageError(f"bad voltage in {item!r}") from None
    if not targets:
        raise UsageError("give --config or at least one --vth")
    steps = plan_write_sequence(spec, targets)
    _write(_target(args, "write_plan.csv"), plan_to_csv(steps), out)
    print(f"steps={len(steps)}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fefetmult", description="FeFET reconfigurable frequency multiplier toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    raw = argparse.RawDescriptionHelpFormatter

    def add(name, helptext, epilog, func):
        sp = sub.add_parser(name, help=helptext, description=helptext, epilog=epilog, formatter_class=raw)
        sp.add_argument("--netlist", required=True, help="circuit description (.fnet)")
        sp.add_argument("--out", help=f"output path (default: ${OUTDIR_ENV} or cwd)")
        sp.set_defaults(func=func)
        return sp

    sp = add("sweep", "DC transfer curve", "CSV columns: vin (V), iout (A)", _cmd_sweep)
    sp.add_argument("--vmin", type=float)
    sp.add_argument("--vmax", type=float)
    sp.add_argument("--points", type=int, default=2001)
    sp.add_argument("--config", help="program thresholds from this config first")

    sp = add("configure", "tune thresholds and drive for a mode",
             "Output: key=value lines (mode, v_op, amplitude, vth.<device>, shape.*)", _cmd_configure)
    sp.add_argument("--mode", required=True, help="FirstH|SecondH|ThirdH|FourthH or 1..4")
    sp.add_argument("--budget", type=int, default=400)

    sp = add("spectrum", "harmonic spectrum of the driven multiplier",
             "CSV columns: order, power_db (relative to strongest non-DC harmonic)\n"
             "report: key=value lines; waveform CSV columns: t (s), vin (V), iout (A)", _cmd_spectrum)
    sp.add_argument("--config", required=True)
    sp.add_argument("--fin", type=float, default=1e6, help="input frequency, Hz")
    sp.add_argument("--target", type=int, help="harmonic order (default: config mode)")
    sp.add_argument("--dynamics", choices=[d.value for d in Dynamics], default=Dynamics.QUASI_STATIC.value)
    sp.add_argument("--spp", type=int, default=256, help="samples per period")
    sp.add_argument("--periods", type=int, default=16)
    sp.add_argument("--waveform", action="store_true", help="also write the output waveform")

    sp = add("maxfreq", "largest input frequency keeping the target harmonic dominant",
             "Output (file and stdout): key=value lines f_max_hz, monotone, hit_upper_bound", _cmd_maxfreq)
    sp.add_argument("--config", required=True)
    sp.add_argument("--mode", help="target mode (default: config mode)")
    sp.add_argument("--margin", type=float, default=10.0, help="required margin, dB")
    sp.add_argument("--fmin", type=float, default=1e3)
    sp.add_argument("--fmax", type=float, default=1e12)

    sp = add("fsk", "frequency-shift keying by operating-point modulation",
             "CSV columns: t (s), vin (V), iout (A); stdout lists decoded orders per bit", _cmd_fsk)
    sp.add_argument("--bits", required=True, help="e.g. 1010")
    sp.add_argument("--pair", default="1,3", help="modes for bit 1 and bit 0")
    sp.add_argument("--carrier", type=float, default=1e6, help="carrier frequency, Hz")
    sp.add_argument("--bit-periods", type=int, default=8, help="carrier cycles per bit")
    sp.add_argument("--config", help="reuse thresholds tuned for the higher mode")

    sp = add("write-plan", "program pulses realising target thresholds",
             "CSV columns: step, device, purpose, amplitude (V), duration (s)", _cmd_write_plan)
    sp.add_argument("--config")
    sp.add_argument("--vth", action="append", metavar="NAME=VOLTS")
    return p


def run(argv=None) -> CommandOutcome:
    out = CommandOutcome(0)
    try:
        args = build_parser().parse_args(argv)
        args.func(args, out)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        out.exit_code = 1
    except (DataError, UnsupportedMode, UnsupportedPair) as e:
        print(f"error: {e}", file=sys.stderr)
        out.exit_code = 2
    except (ValueError, ArithmeticError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        out.exit_code = 2
    except SystemExit as e:  # --help / --version paths of argparse
        out.exit_code = int(e.code or 0)
    return out


def main(argv=None) -> int:
    return run(argv).exit_code


if __name__ == "__main__":
    sys.exit(main())
