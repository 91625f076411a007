"""Transient drive, periodogram, harmonic dominance and frequency limits.

Capture is always an exact integer number of input periods, so a
rectangular window is leakage-free: harmonic ``n`` lands exactly in bin
``n * n_periods``.  Input phase is generated from the sample index
(``2*pi*k/samples_per_period``) rather than from ``f_in * t`` so that
quasi-static runs are bit-identical at every input frequency.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .netlist import fmt


class Dynamics(enum.Enum):
    QUASI_STATIC = "quasi-static"
    SINGLE_POLE = "single-pole"


@dataclass(frozen=True)
class Drive:
    v_op: float
    amplitude: float
    f_in: float
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if not self.f_in > 0:
            raise ValueError("f_in must be positive")

    def samples(self, samples_per_period: int, n_samples: int | None = None) -> np.ndarray:
        n = samples_per_period if n_samples is None else n_samples
        k = np.arange(n) % samples_per_period
        return self.v_op + self.amplitude * np.sin(2 * np.pi * k / samples_per_period + self.phase)


@dataclass
class Waveform:
    dt: float
    samples: np.ndarray
    n_periods: int
    vin: np.ndarray | None = None

    def __post_init__(self):
        if self.n_periods and len(self.samples) % self.n_periods:
            raise ValueError("sample count must be a whole number of periods")

    @property
    def samples_per_period(self) -> int:
        return len(self.samples) // self.n_periods if self.n_periods else 0

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(len(self.samples))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.vin is None:
            w.writerow(["t", "i"])
            for t, i in zip(self.t, self.samples):
                w.writerow([format(t, ".12g"), format(i, ".12g")])
        else:
            w.writerow(["t", "vin", "iout"])
            for t, v, i in zip(self.t, self.vin, self.samples):
                w.writerow([format(t, ".12g"), format(v, ".12g"), format(i, ".12g")])
        return buf.getvalue()


def lowpass_trapezoidal(x, dt: float, pole_hz: float, y0: float = 0.0, x_prev: float | None = None):
    """First-order low-pass, trapezoidal (bilinear) update, from state ``y0``."""
    x = np.asarray(x, dtype=float)
    if math.isinf(pole_hz):
        return x.copy()
    tau = 1.0 / (2 * np.pi * pole_hz)
    r = dt / (2 * tau)
    a = (1 - r) / (1 + r)
    b = r / (1 + r)
    xp = x[0] if x_prev is None else x_prev
    # y[n] = a y[n-1] + b (x[n] + x[n-1]); fold the pre-history into zi
    zi = np.array([a * y0 + b * xp])
    y, _ = lfilter([b, b], [1.0, -a], x, zi=zi)
    return y


def lowpass_periodic(x, dt: float, pole_hz: float):
    """Periodic steady state of :func:`lowpass_trapezoidal` for one period ``x``."""
    x = np.asarray(x, dtype=float)
    if math.isinf(pole_hz):
        return x.copy()
    tau = 1.0 / (2 * np.pi * pole_hz)
    r = dt / (2 * tau)
    a = (1 - r) / (1 + r)
    n = len(x)
    free = lowpass_trapezoidal(x, dt, pole_hz, 0.0, x[-1])
    # y[n-1] = a^n y0 + free[n-1]; periodicity requires y[n-1] = y0
    y0 = free[-1] / (1 - a ** n)
    return free + y0 * a ** (np.arange(n) + 1)


def simulate_transient(circuit, drive: Drive, samples_per_period: int = 256, n_periods: int = 16,
                       dynamics: Dynamics = Dynamics.QUASI_STATIC) -> Waveform:
    """Output current for a sinusoidal input, captured over whole periods.

    QUASI_STATIC maps every input sample through the DC solution.
    SINGLE_POLE low-passes each device's gate drive at its ``gate_pole_hz``
    and the output current at the load pole 1/(2 pi R C); both filters are
    started in their periodic steady state, so every captured period is
    identical.
    """
    if samples_per_period < 16:
        raise ValueError("samples_per_period must be >= 16")
    if n_periods < 4:
        raise ValueError("n_periods must be >= 4")
    dt = 1.0 / (drive.f_in * samples_per_period)
    vin = drive.samples(samples_per_period)
    gates = circuit.gate_voltages(vin)
    if dynamics is Dynamics.SINGLE_POLE:
        poles = circuit.gate_poles()
        gates = {n: lowpass_periodic(g, dt, poles[n]) for n, g in gates.items()}
    i = circuit.output_current_for_gates(gates)
    if dynamics is Dynamics.SINGLE_POLE:
        i = lowpass_periodic(i, dt, circuit.load_pole_hz())
    return Waveform(dt, np.tile(i, n_periods), n_periods, np.tile(vin, n_periods))


@dataclass
class Spectrum:
    f_in: float
    n_periods: int
    power: np.ndarray  # one-sided mean-square per bin

    def harmonic(self, order: int) -> float:
        k = order * self.n_periods
        return float(self.power[k]) if k < len(self.power) else 0.0


def power_spectrum(waveform: Waveform, discard_periods: int = 2) -> Spectrum:
    """Rectangular-window periodogram of the captured periods after ``discard_periods``."""
    spp = waveform.samples_per_period
    keep = waveform.n_periods - discard_periods
    if keep < 1:
        raise ValueError("nothing left after discarding periods")
    x = np.asarray(waveform.samples[discard_periods * spp:], dtype=float)
    n = len(x)
    X = np.fft.rfft(x) / n
    p = np.abs(X) ** 2
    p[1:] *= 2.0
    if n % 2 == 0:
        p[-1] /= 2.0
    f_in = 1.0 / (spp * waveform.dt)
    return Spectrum(f_in, keep, p)


FLOOR_DB = -300.0


@dataclass
class SpectrumReport:
    f_in: float
    harmonic_power_db: dict
    target_order: int
    dominance_margin_db: float
    threshold_db: float = 10.0
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.dominance_margin_db >= self.threshold_db

    @property
    def dominant_order(self) -> int:
        nondc = {k: v for k, v in self.harmonic_power_db.items() if k > 0}
        return max(nondc, key=lambda k: (nondc[k], -k))

    def to_text(self) -> str:
        lines = [f"f_in={format(self.f_in, '.12g')}",
                 f"target_order={self.target_order}",
                 f"dominance_margin_db={format(self.dominance_margin_db, '.12g')}",
                 f"dominant_order={self.dominant_order}",
                 f"pass={'yes' if self.passed else 'no'}"]
        for k, v in sorted(self.harmonic_power_db.items()):
            lines.append(f"h{k}_db={format(v, '.12g')}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["order,power_db"]
        rows += [f"{k},{format(v, '.12g')}" for k, v in sorted(self.harmonic_power_db.items())]
        return "\n".join(rows) + "\n"


def harmonic_report(spectrum: Spectrum, target_order: int, max_order: int = 6,
                    threshold_db: float = 10.0) -> SpectrumReport:
    """Per-harmonic dB (relative to the strongest non-DC bin) and dominance margin."""
    if not 1 <= target_order <= max_order:
        raise ValueError(f"target_order must lie in 1..{max_order}")
    ref = float(np.max(spectrum.power[1:])) if len(spectrum.power) > 1 else 0.0
    if ref <= 0.0:
        db = {k: FLOOR_DB for k in range(max_order + 1)}
        return SpectrumReport(spectrum.f_in, db, target_order, 0.0, threshold_db)
    tiny = ref * 10 ** (FLOOR_DB / 10)
    db = {k: 10 * math.log10(max(spectrum.harmonic(k), tiny) / ref) for k in range(max_order + 1)}
    others = max(v for k, v in db.items() if k not in (0, target_order))
    return SpectrumReport(spectrum.f_in, db, target_order, db[target_order] - others, threshold_db)


def dominance_margin(circuit, drive: Drive, target_order: int, samples_per_period: int = 256,
                     n_periods: int = 16, dynamics: Dynamics = Dynamics.QUASI_STATIC,
                     max_order: int = 6) -> SpectrumReport:
    wf = simulate_transient(circuit, drive, samples_per_period, n_periods, dynamics)
    return harmonic_report(power_spectrum(wf), target_order, max_order)


def estimate_power(waveform: Waveform, vdd: float, discard_periods: int = 1) -> float:
    """Supply power: mean output current (after the first period) times VDD."""
    spp = waveform.samples_per_period
    x = np.asarray(waveform.samples[discard_periods * spp:], dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.mean(x)) * vdd


@dataclass(frozen=True)
class SyntheticCircuit:
    """Stand-in circuit with a closed-form transfer ``i = transfer(v)``.

    Exposes the same hooks :func:`simulate_transient` uses, with a single
    gate pole and an optional load pole.  Used for analytic checks.
    """
    transfer: object
    gate_pole_hz: float = math.inf
    load_pole: float = math.inf

    def gate_voltages(self, vin):
        return {"in": np.asarray(vin, dtype=float)}

    def gate_poles(self):
        return {"in": self.gate_pole_hz}

    def output_current_for_gates(self, gates):
        return np.asarray(self.transfer(gates["in"]), dtype=float)

    def load_pole_hz(self):
        return self.load_pole


@dataclass(frozen=True)
class FrequencyLimit:
    f_max: float
    monotone: bool
    hit_upper_bound: bool
    probes: tuple  # ((f, margin_db), ...) sorted by frequency

    def to_text(self) -> str:
        return (f"f_max_hz={format(self.f_max, '.12g')}\n"
                f"monotone={'yes' if self.monotone else 'no'}\n"
                f"hit_upper_bound={'yes' if self.hit_upper_bound else 'no'}\n")


def max_operating_frequency(circuit, drive: Drive, target_order: int, margin_db: float = 10.0,
                            f_low: float = 1e3, f_high: float = 1e12, resolution: float = 0.01,
                            samples_per_period: int = 256, check_points: int = 8) -> FrequencyLimit:
    """Largest input frequency keeping the target harmonic ``margin_db`` above the rest.

    SINGLE_POLE dynamics.  Bisection on log-frequency until the bracket ratio
    is within ``1 + resolution``.  Above the boundary ``check_points``
    log-spaced probes (up to 16x the boundary) confirm that the margin stays
    failing and non-increasing; a passing probe widens the bracket and the
    search restarts from it, with ``monotone`` cleared.
    """
    if not 0 < f_low < f_high:
        raise ValueError("need 0 < f_low < f_high")
    probes = {}

    def margin(f):
        if f not in probes:
            d = Drive(drive.v_op, drive.amplitude, f, drive.phase)
            probes[f] = dominance_margin(circuit, d, target_order, samples_per_period, 4,
                                         Dynamics.SINGLE_POLE).dominance_margin_db
        return probes[f]

    def done(monotone, f, hit):
        return FrequencyLimit(f, monotone, hit, tuple(sorted(probes.items())))

    if margin(f_low) < margin_db:
        raise ValueError(f"margin below {margin_db} dB already at f_low={f_low:g} Hz")
    if margin(f_high) >= margin_db:
        return done(True, f_high, True)
    lo, hi = f_low, f_high
    monotone = True
    while True:
        while hi / lo > 1 + resolution:
            mid = math.sqrt(lo * hi)
            if margin(mid) >= margin_db:
                lo = mid
            else:
                hi = mid
        top = min(f_high, 16 * hi)
        grid = np.geomspace(hi, top, check_points + 1)[1:] if top > hi else []
        prev = margin(hi)
        widened = False
        for f in grid:
            m = margin(float(f))
            if m >= margin_db:
                monotone, widened = False, True
                lo, hi = float(f), f_high
                break
            if m > prev + 1e-9:
                monotone = False
            prev = m
        if not widened:
            return done(monotone, lo, False)
        if margin(f_high) >= margin_db:
            return done(False, f_high, True)
