"""Behavioral FeFET: programmable threshold over a smooth square-law channel.

Drain current (N polarity), the contract every other module relies on::

    x     = vgs - vth
    veff  = (s / 2) * ln(1 + exp(2 x / s))          s = subthreshold_smoothing
    id_N  = width_ratio * k_trans * veff**2 * tanh(vds / vds_sat)

P polarity is the mirror image of the same law::

    id_P(vgs, vds; vth) = width_ratio * id_N_unit(-vgs, -vds; -vth)

where ``id_N_unit`` is the expression above with width_ratio = 1.  Both are
returned as non-negative magnitudes for normal bias (vds >= 0 for N,
vds <= 0 for P).

Polarization follows a symmetric-relay Preisach model.  Every relay has a
switching threshold ``h`` in [v_coercive, v_saturation] and flips to
``sign(u)`` whenever a pulse of effective amplitude ``u`` satisfies
``|u| >= h``.  Relay thresholds are uniformly distributed, so the fraction of
relays below ``h`` is the saturating envelope

    G(h) = clip((h - v_coercive) / (v_saturation - v_coercive), 0, 1).

The relay population is summarised by a return-point stack of pulses with
strictly decreasing magnitude and alternating sign.  Relays above the
largest stacked magnitude keep the ``baseline`` polarization.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np


class Polarity(enum.Enum):
    N = "n"
    P = "p"


@dataclass(frozen=True)
class FeFETParams:
    polarity: Polarity = Polarity.N
    k_trans: float = 1e-4  # A/V^2
    width_ratio: float = 1.0
    vth_low: float = -0.4  # V, most conductive state (magnitude convention for P)
    vth_high: float = 0.8  # V
    v_coercive: float = 1.0  # V
    v_saturation: float = 3.0  # V, pulse amplitude that fully switches
    subthreshold_smoothing: float = 0.05  # V
    vds_sat: float = 0.3  # V
    gate_pole_hz: float = math.inf

    def __post_init__(self):
        if not self.vth_low < self.vth_high:
            raise ValueError("vth_low must be below vth_high")
        if self.width_ratio < 0:
            raise ValueError("width_ratio must be >= 0")
        if self.k_trans < 0:
            raise ValueError("k_trans must be >= 0")
        for name in ("v_coercive", "subthreshold_smoothing", "vds_sat", "gate_pole_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.v_saturation > self.v_coercive:
            raise ValueError("v_saturation must exceed v_coercive")

    @property
    def vth_range(self) -> tuple[float, float]:
        """(min, max) of programmable thresholds in this device's own sign convention."""
        if self.polarity is Polarity.N:
            return self.vth_low, self.vth_high
        return -self.vth_high, -self.vth_low

    @property
    def vth_conductive(self) -> float:
        """Threshold of the most conductive (low-VTH) state."""
        return self.vth_low if self.polarity is Polarity.N else -self.vth_low


@dataclass(frozen=True)
class ProgramPulse:
    amplitude: float  # V, gate-to-source, signed
    duration: float = 1e-6  # s, not used by the hysteresis law

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")


def envelope(h: float, params: FeFETParams) -> float:
    """Fraction of relays whose threshold lies at or below ``h``."""
    span = params.v_saturation - params.v_coercive
    return min(max((h - params.v_coercive) / span, 0.0), 1.0)


@dataclass(frozen=True)
class FeFETState:
    polarization: float = 0.0
    history: tuple[float, ...] = ()
    baseline: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.baseline is None:
            object.__setattr__(self, "baseline", self.polarization)
        if not -1.0 <= self.polarization <= 1.0:
            raise ValueError("polarization must lie in [-1, 1]")
        h = self.history
        for prev, cur in zip(h, h[1:]):
            if abs(cur) >= abs(prev) or (cur > 0) == (prev > 0):
                raise ValueError("history must alternate in sign with shrinking magnitude")

    @classmethod
    def saturated(cls, sign: int) -> "FeFETState":
        return cls(polarization=float(np.sign(sign)), history=(), baseline=float(np.sign(sign)))


def _effective_drive(params: FeFETParams, amplitude: float) -> float:
    # P devices are written by the mirrored pulse polarity
    return amplitude if params.polarity is Polarity.N else -amplitude


def polarization_of(history, baseline: float, params: FeFETParams) -> float:
    """Relay-population average for a return-point stack."""
    covered = envelope(abs(history[0]), params) if history else 0.0
    p = baseline * (1.0 - covered)
    for i, u in enumerate(history):
        g_hi = envelope(abs(u), params)
        g_lo = envelope(abs(history[i + 1]), params) if i + 1 < len(history) else 0.0
        p += math.copysign(g_hi - g_lo, u)
    return min(max(p, -1.0), 1.0)


def apply_program_pulse(state: FeFETState, params: FeFETParams, pulse: ProgramPulse) -> FeFETState:
    """Return the state after one program pulse (pure; ``state`` is untouched)."""
    u = _effective_drive(params, pulse.amplitude)
    if u == 0.0:
        return state
    stack = list(state.history)
    while stack and abs(stack[-1]) <= abs(u):
        stack.pop()
    if not stack or (stack[-1] > 0) != (u > 0):
        stack.append(u)
    baseline = state.baseline
    if envelope(abs(stack[0]), params) >= 1.0:
        # everything above the first entry is saturated; baseline is irrelevant
        baseline = math.copysign(1.0, stack[0])
    pol = polarization_of(stack, baseline, params)
    return FeFETState(polarization=pol, history=tuple(stack), baseline=baseline)


def vth_of(state: FeFETState, params: FeFETParams) -> float:
    frac = (state.polarization + 1.0) / 2.0
    vth_n = params.vth_high - frac * (params.vth_high - params.vth_low)
    return vth_n if params.polarity is Polarity.N else -vth_n


def polarization_for_vth(vth: float, params: FeFETParams) -> float:
    vth_n = vth if params.polarity is Polarity.N else -vth
    frac = (params.vth_high - vth_n) / (params.vth_high - params.vth_low)
    return 2.0 * frac - 1.0


def state_for_vth(vth: float, params: FeFETParams) -> FeFETState:
    """Fresh state (no history) sitting at threshold ``vth``."""
    return FeFETState(polarization=float(np.clip(polarization_for_vth(vth, params), -1, 1)))


def _softplus(x):
    # stable log(1 + exp(x)); faster than logaddexp
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def id_n_unit(vgs, vds, vth, params: FeFETParams):
    s = params.subthreshold_smoothing
    veff = 0.5 * s * _softplus(2.0 * (np.asarray(vgs) - vth) / s)
    return params.k_trans * veff * veff * np.tanh(np.asarray(vds) / params.vds_sat)


def id_drain(params: FeFETParams, state_or_vth, vgs, vds):
    """Drain current magnitude in amperes; accepts a state or a bare threshold.

    Broadcasts over numpy arrays of ``vgs``/``vds``.
    """
    vth = vth_of(state_or_vth, params) if isinstance(state_or_vth, FeFETState) else state_or_vth
    if params.polarity is Polarity.N:
        return params.width_ratio * id_n_unit(vgs, vds, vth, params)
    return params.width_ratio * id_n_unit(-np.asarray(vgs), -np.asarray(vds), -vth, params)


def mirror_p_from_n(params_n: FeFETParams, width_ratio: float = 1.0) -> FeFETParams:
    if params_n.polarity is not Polarity.N:
        raise ValueError("mirror_p_from_n expects an N-polarity parameter set")
    return replace(params_n, polarity=Polarity.P, width_ratio=width_ratio)


def tune_width_ratio(params_n: FeFETParams, params_p: FeFETParams, vth_n: float, vth_p: float,
                     vgs_span: float = 1.0, vds: float = 1.0, n: int = 201,
                     rel_tol: float = 1e-4) -> float:
    """Width ratio for ``params_p`` whose peak current over a gate sweep matches the N device.

    The N device is swept over vgs in [vth_n, vth_n + vgs_span] and the P device
    over the mirrored range.  Scalar bisection on the ratio.
    """
    sweep = np.linspace(0.0, vgs_span, n)
    target = float(np.max(id_drain(params_n, vth_n, vth_n + sweep, vds)))

    def peak(w):
        p = replace(params_p, width_ratio=w)
        return float(np.max(id_drain(p, vth_p, vth_p - sweep, -vds)))

    lo, hi = 0.0, 1.0
    while peak(hi) < target:
        hi *= 2.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if peak(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
