"""Preset instantiation, DC operating points and transfer curves.

The load is a resistor from VDD to the output node with a shunt capacitor
at that node; the devices pull the output toward ground.  The reported
output is the load-branch current, (VDD - v_out) / R.  With R = 0 the output
node is pinned to VDD and the output equals the total device current.

Series stages are resolved by exact KCL: every internal node is found by
bisection, and the output node by an outer bisection on the load line.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .device import FeFETState, Polarity, id_drain, state_for_vth, vth_of
from .netlist import TOPOLOGIES, CircuitSpec, Preset


class SolverWarning(RuntimeWarning):
    """An internal node could not be bracketed; the boundary value was used."""


@dataclass
class NodeSolution:
    v: np.ndarray
    current: np.ndarray
    flagged: np.ndarray  # True where no sign change was found on [0, v_max]


def solve_series_node(bottom_current, top_current, vdd, tol: float = 1e-6,
                      span: float | None = None) -> NodeSolution:
    """Voltage of the node shared by two series elements.

    ``bottom_current(vx)`` must be non-decreasing and ``top_current(vx)``
    non-increasing on [0, vdd].  Works elementwise on arrays; ``vdd`` may be
    an array.  After bisection to ``tol`` a final secant step inside the
    bracket pushes the current error to second order in ``tol``.  ``span``
    fixes the iteration count (default: largest ``vdd``); passing it keeps
    every element's result independent of the rest of the batch.
    """
    hi = np.array(vdd, dtype=float, copy=True)
    lo = np.zeros_like(hi)
    b_lo, t_lo = bottom_current(lo), top_current(lo)
    b_hi, t_hi = bottom_current(hi), top_current(hi)
    flagged = (b_lo - t_lo > 0) | (b_hi - t_hi < 0)
    width = span if span is not None else (float(np.max(hi)) if hi.size else 0.0)
    n_iter = max(1, math.ceil(math.log2(max(width, tol) / tol)))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        b_mid, t_mid = bottom_current(mid), top_current(mid)
        up = b_mid - t_mid < 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        b_lo, t_lo = np.where(up, b_mid, b_lo), np.where(up, t_mid, t_lo)
        b_hi, t_hi = np.where(up, b_hi, b_mid), np.where(up, t_hi, t_mid)
    f_lo, f_hi = b_lo - t_lo, b_hi - t_hi
    denom = f_hi - f_lo
    safe = np.where(denom > 0, denom, 1.0)
    v = np.where(denom > 0, lo - f_lo * (hi - lo) / safe, 0.5 * (lo + hi))
    v = np.clip(v, lo, hi)
    if np.any(flagged):
        # no crossing: pick the end with the smaller mismatch
        f0 = np.abs(bottom_current(np.zeros_like(v)) - top_current(np.zeros_like(v)))
        f1 = np.abs(bottom_current(np.asarray(vdd) + 0 * v) - top_current(np.asarray(vdd) + 0 * v))
        edge = np.where(f0 <= f1, 0.0, np.asarray(vdd) + 0 * v)
        v = np.where(flagged, edge, v)
    # Both element currents agree at the root, but the one that varies less
    # across the final bracket keeps its relative accuracy when the stack is
    # deep in cut-off (where the other is resolved only to ~tol * slope).
    rel_b = np.abs(b_hi - b_lo) / np.maximum(np.maximum(np.abs(b_lo), np.abs(b_hi)), 1e-300)
    rel_t = np.abs(t_hi - t_lo) / np.maximum(np.maximum(np.abs(t_lo), np.abs(t_hi)), 1e-300)
    current = np.where(rel_b <= rel_t, bottom_current(v), top_current(v))
    return NodeSolution(v, current, flagged)


@dataclass(frozen=True)
class _Slot:
    name: str
    polarity: Polarity
    params: object
    vth: float
    drive: object


def _stage_current(slots, gates, v_hi, v_lo):
    total = 0.0
    for s in slots:
        vg = gates[s.name]
        if s.polarity is Polarity.N:
            total = total + id_drain(s.params, s.vth, vg - v_lo, v_hi - v_lo)
        else:
            total = total + id_drain(s.params, s.vth, vg - v_hi, v_lo - v_hi)
    return total


@dataclass
class Circuit:
    spec: CircuitSpec
    states: dict
    tol: float = 1e-6
    _branches: list = field(init=False, repr=False)

    def __post_init__(self):
        if set(self.states) != set(self.spec.names):
            raise ValueError(f"states must cover exactly {sorted(self.spec.names)}")
        slots = []
        for name in self.spec.slots:
            p = self.spec.params(name)
            slots.append(_Slot(name, p.polarity, p, vth_of(self.states[name], p), self.spec.drive(name)))
        topo = TOPOLOGIES[self.spec.preset]
        self._branches = [[[slots[i] for i in stage] for stage in br] for br in topo.branches]

    @property
    def preset(self) -> Preset:
        return self.spec.preset

    def vths(self) -> dict:
        return {n: vth_of(s, self.spec.params(n)) for n, s in self.states.items()}

    def with_states(self, states) -> "Circuit":
        return Circuit(self.spec, dict(states), self.tol)

    def with_vths(self, vths) -> "Circuit":
        """Circuit with thresholds set directly (no write sequence)."""
        states = dict(self.states)
        for n, v in vths.items():
            states[n] = state_for_vth(v, self.spec.params(n))
        return self.with_states(states)

    def gate_poles(self) -> dict:
        return {n: self.spec.params(n).gate_pole_hz for n in self.spec.names}

    def load_pole_hz(self) -> float:
        rc = self.spec.load_r * self.spec.load_c
        return math.inf if rc == 0 else 1.0 / (2 * math.pi * rc)

    def gate_voltages(self, vin) -> dict:
        return {s.name: s.drive(vin) for br in self._branches for st in br for s in st}

    def device_current(self, gates, vout):
        """Total current drawn from the output node, per-branch list alongside."""
        branch = []
        for stages in self._branches:
            if len(stages) == 1:
                branch.append(_stage_current(stages[0], gates, vout, 0.0))
            else:
                top, bottom = stages
                sol = solve_series_node(
                    lambda vx: _stage_current(bottom, gates, vx, 0.0),
                    lambda vx: _stage_current(top, gates, vout, vx),
                    vout, self.tol, span=self.spec.supply_vdd)
                if np.any(sol.flagged):
                    warnings.warn("series node not bracketed", SolverWarning, stacklevel=3)
                branch.append(sol.current)
        return sum(branch), branch

    def solve_output(self, gates, shape):
        """Output node voltage and load current for given gate voltages."""
        vdd = self.spec.supply_vdd
        r = self.spec.load_r
        if r == 0:
            vout = np.full(shape, vdd)
            return vout, self.device_current(gates, vout)[0]
        sol = solve_series_node(
            lambda v: self.device_current(gates, v)[0],
            lambda v: (vdd - v) / r,
            np.full(shape, vdd), self.tol, span=vdd)
        return sol.v, sol.current

    def output_current_for_gates(self, gates):
        shape = np.shape(next(iter(gates.values())))
        gates = {k: np.broadcast_to(np.asarray(v, dtype=float), shape) for k, v in gates.items()}
        return self.solve_output(gates, shape)[1]


def build_circuit(spec: CircuitSpec, initial_states=None, tol: float = 1e-6) -> Circuit:
    """Instantiate ``spec``; missing states default to polarization 0."""
    states = {n: FeFETState() for n in spec.names}
    if initial_states is not None:
        unknown = set(initial_states) - set(spec.names)
        if unknown:
            raise ValueError(f"states given for unknown devices {sorted(unknown)}")
        states.update(initial_states)
    return Circuit(spec, states, tol)


def dc_output_current(circuit: Circuit, vin):
    """Load-branch current at DC for input voltage(s) ``vin``."""
    vin_arr = np.asarray(vin, dtype=float)
    scalar = vin_arr.ndim == 0
    vin_arr = np.atleast_1d(vin_arr)
    i = circuit.output_current_for_gates(circuit.gate_voltages(vin_arr))
    return float(i[0]) if scalar else i


@dataclass(frozen=True)
class Extremum:
    vin: float
    iout: float
    kind: str  # "peak" or "valley"


@dataclass
class TransferCurve:
    vin: np.ndarray
    iout: np.ndarray
    extrema: list

    def __post_init__(self):
        if len(self.vin) != len(self.iout):
            raise ValueError("vin and iout lengths differ")
        if np.any(np.diff(self.vin) <= 0):
            raise ValueError("vin must be strictly ascending")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["vin", "iout"])
        for v, i in zip(self.vin, self.iout):
            w.writerow([format(v, ".12g"), format(i, ".12g")])
        return buf.getvalue()


def detect_extrema(vin, iout, rel_prominence: float = 1e-6) -> list:
    """Interior extrema by sign change of first differences, parabola-refined.

    Wiggles smaller than ``rel_prominence`` of the curve's range are merged
    away so solver noise on flat tails does not register.
    """
    vin = np.asarray(vin, dtype=float)
    iout = np.asarray(iout, dtype=float)
    d = np.diff(iout)
    span = float(np.max(iout) - np.min(iout)) if len(iout) else 0.0
    if span == 0.0:
        return []
    thresh = rel_prominence * span
    # alternating turning points (index, kind) with prominence filtering
    idx = []
    direction = 0
    for k, dk in enumerate(d):
        if dk == 0:
            continue
        s = 1 if dk > 0 else -1
        if direction != 0 and s != direction:
            idx.append((k, "peak" if direction > 0 else "valley"))
        direction = s
    points = [(0, None)] + idx + [(len(iout) - 1, None)]
    changed = True
    while changed and len(points) > 2:
        changed = False
        for j in range(1, len(points) - 1):
            a, b, c = points[j - 1][0], points[j][0], points[j + 1][0]
            if min(abs(iout[b] - iout[a]), abs(iout[c] - iout[b])) < thresh:
                # drop the smaller wiggle: the extremum and its weaker neighbour
                if j + 1 < len(points) - 1 and abs(iout[c] - iout[b]) < abs(iout[b] - iout[a]):
                    del points[j:j + 2]
                elif j - 1 > 0:
                    del points[j - 1:j + 1]
                else:
                    del points[j]
                changed = True
                break
    out = []
    for k, kind in points[1:-1]:
        out.append(_refine(vin, iout, k, kind))
    # enforce alternation after endpoint deletions
    cleaned = []
    for e in out:
        if cleaned and cleaned[-1].kind == e.kind:
            keep_new = (e.iout > cleaned[-1].iout) == (e.kind == "peak")
            if keep_new:
                cleaned[-1] = e
            continue
        cleaned.append(e)
    return cleaned


def _refine(vin, iout, k, kind) -> Extremum:
    if 0 < k < len(vin) - 1:
        x0, x1, x2 = vin[k - 1:k + 2]
        y0, y1, y2 = iout[k - 1:k + 2]
        denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
        a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
        b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
        if a != 0 and ((a > 0) == (kind == "valley")):
            xv = -b / (2 * a)
            if x0 <= xv <= x2:
                c = y1 - a * x1 * x1 - b * x1
                return Extremum(float(xv), float(a * xv * xv + b * xv + c), kind)
    return Extremum(float(vin[k]), float(iout[k]), kind)


def transfer_sweep(circuit: Circuit, v_min: float, v_max: float, n_points: int = 2001) -> TransferCurve:
    if n_points < 3:
        raise ValueError("n_points must be >= 3")
    if not v_min < v_max:
        raise ValueError("v_min must be below v_max")
    vin = np.linspace(v_min, v_max, n_points)
    iout = dc_output_current(circuit, vin)
    return TransferCurve(vin, iout, detect_extrema(vin, iout))


def symmetry_point(circuit: Circuit) -> float:
    """Input voltage about which complementary wiring mirrors identical devices."""
    # vin -> 2 v_c - vin swaps the pair's gate overdrives: vth_a - v_c = vth_b + v_c
    # holds for both polarities (a P device conducts below its signed threshold)
    topo = TOPOLOGIES[circuit.preset]
    if not topo.pairs:
        raise ValueError("symmetry point only defined for complementary presets")
    a, b = topo.pairs[0]
    slots = circuit.spec.slots
    va, vb = (vth_of(circuit.states[n], circuit.spec.params(n)) for n in (slots[a], slots[b]))
    return 0.5 * (va - vb)
