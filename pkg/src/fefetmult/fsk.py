"""Frequency-shift keying by moving the operating point of one programmed multiplier.

The input is ``level(bit) + A sin(2 pi f_c t)``.  Both levels share the
threshold programming and the carrier amplitude, so only mode pairs whose
operating points coexist on one transfer curve are allowed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .harmonics import Drive, Waveform, dominance_margin, harmonic_report, power_spectrum
from .tuner import Mode, MultiplierConfig, _Surrogate, default_window, tune

SUPPORTED_PAIRS = frozenset({frozenset({1, 2}), frozenset({1, 3}), frozenset({1, 4}), frozenset({2, 4})})


class UnsupportedPair(ValueError):
    pass


def check_pair(mode_one: Mode, mode_zero: Mode) -> None:
    if frozenset({mode_one.order, mode_zero.order}) not in SUPPORTED_PAIRS:
        raise UnsupportedPair(f"modes {mode_one.name}/{mode_zero.name} need different programming")


@dataclass(frozen=True)
class FskPlan:
    bit_sequence: tuple
    carrier_f: float
    level_one_vop: float
    level_zero_vop: float
    amplitude: float
    mode_pair: tuple  # (mode for 1, mode for 0)
    bit_periods: int = 8
    samples_per_period: int = 64

    def __post_init__(self):
        object.__setattr__(self, "bit_sequence", tuple(int(b) for b in self.bit_sequence))
        if any(b not in (0, 1) for b in self.bit_sequence):
            raise ValueError("bits must be 0 or 1")
        if not isinstance(self.bit_periods, (int, np.integer)) or self.bit_periods < 4:
            raise ValueError("bit_periods must be an integer >= 4")
        if not self.carrier_f > 0 or not self.amplitude > 0:
            raise ValueError("carrier_f and amplitude must be positive")
        if self.samples_per_period < 16:
            raise ValueError("samples_per_period must be >= 16")
        check_pair(*self.mode_pair)

    def level(self, bit: int) -> float:
        return self.level_one_vop if bit else self.level_zero_vop

    def expected_orders(self) -> list:
        return [self.mode_pair[0 if b else 1].order for b in self.bit_sequence]


def fsk_waveform(circuit, plan: FskPlan) -> Waveform:
    """Quasi-static output for the keyed input; bits start at carrier phase zero."""
    lo, hi = default_window(circuit.spec)
    for v in (plan.level_one_vop, plan.level_zero_vop):
        if v - plan.amplitude < lo or v + plan.amplitude > hi:
            raise ValueError(f"operating point {v:g} +- {plan.amplitude:g} leaves the transfer range")
    spp = plan.samples_per_period
    dt = 1.0 / (plan.carrier_f * spp)
    per_bit = {}
    for bit in set(plan.bit_sequence):
        d = Drive(plan.level(bit), plan.amplitude, plan.carrier_f)
        vin = d.samples(spp)
        i = circuit.output_current_for_gates(circuit.gate_voltages(vin))
        per_bit[bit] = (np.tile(vin, plan.bit_periods), np.tile(i, plan.bit_periods))
    if not plan.bit_sequence:
        return Waveform(dt, np.zeros(0), 0, np.zeros(0))
    vin = np.concatenate([per_bit[b][0] for b in plan.bit_sequence])
    iout = np.concatenate([per_bit[b][1] for b in plan.bit_sequence])
    return Waveform(dt, iout, plan.bit_periods * len(plan.bit_sequence), vin)


def fsk_decode_check(waveform: Waveform, carrier_f: float, bit_periods: int, max_order: int = 6) -> list:
    """Strongest non-DC harmonic per bit, skipping each bit's first carrier cycle."""
    spp = int(round(1.0 / (carrier_f * waveform.dt)))
    window = spp * bit_periods
    n = len(waveform.samples)
    if window == 0 or n % window:
        raise ValueError(f"waveform length {n} is not a multiple of the bit window {window}")
    orders = []
    for k in range(n // window):
        seg = waveform.samples[k * window:(k + 1) * window]
        spec = power_spectrum(Waveform(waveform.dt, seg, bit_periods), discard_periods=1)
        orders.append(harmonic_report(spec, 1, max_order).dominant_order)
    return orders


def plan_fsk(circuit, bits, mode_one: Mode = Mode.FirstH, mode_zero: Mode = Mode.ThirdH,
             carrier_f: float = 1e6, bit_periods: int = 8, config: MultiplierConfig | None = None,
             n_scan: int = 241):
    """Program-once plan: tune for the higher mode, then place the lower one.

    Returns ``(plan, config)``; ``config`` carries the threshold targets.
    The lower mode's level comes from a spline-surrogate scan of levels that
    keep the carrier inside the transfer range; the top few are re-checked exactly.
    """
    check_pair(mode_one, mode_zero)
    high, low = (mode_one, mode_zero) if mode_one.order > mode_zero.order else (mode_zero, mode_one)
    if config is None or config.mode is not high:
        config = tune(circuit, high)
    programmed = circuit.with_vths(config.vths)
    a = config.amplitude
    lo, hi = default_window(circuit.spec)
    curve = _Surrogate(programmed, (lo, hi), 1401, 64)
    levels = [float(v) for v in np.linspace(lo + a, hi - a, n_scan) if abs(v - config.v_op) >= a]
    ranked = sorted(levels, key=lambda v: -curve.margin(v, a, low.order))[:5]
    best = None
    for v in ranked:
        m = dominance_margin(programmed, Drive(v, a, carrier_f), low.order, 64, 4).dominance_margin_db
        if best is None or m > best[0]:
            best = (m, v)
    if best is None or best[0] < 10.0:
        raise UnsupportedPair(f"no level realises {low.name} with amplitude {a:g}")
    v_low = best[1]
    levels = {high: config.v_op, low: v_low}
    plan = FskPlan(tuple(bits), carrier_f, levels[mode_one], levels[mode_zero], a,
                   (mode_one, mode_zero), bit_periods)
    return plan, config
