"""Write sequencing for threshold programming.

A device write is reset-then-set: a saturating pulse drives polarization to
-1 (high VTH), then one set pulse, found by bisection on the pulse law,
lifts it to the target.  The result is independent of prior history.

In series presets an inner device is only reachable through its access
device, which is first opened (programmed to its most conductive threshold),
and written to its own target last.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass

from .circuit import Circuit
from .device import (FeFETParams, FeFETState, Polarity, ProgramPulse, apply_program_pulse,
                     polarization_for_vth, vth_of)
from .netlist import TOPOLOGIES, CircuitSpec

WRITE_TOL = 5e-3  # V


class Purpose(enum.Enum):
    ACCESS_OPEN = "access_open"
    TARGET_WRITE = "target_write"
    FINAL_WRITE = "final_write"


@dataclass(frozen=True)
class ProgramStep:
    device: str
    pulses: tuple  # ProgramPulse sequence applied in order
    purpose: Purpose


@dataclass(frozen=True)
class Violation:
    step: int
    device: str
    access_device: str

    def __str__(self):
        return f"step {self.step}: {self.device} written while access device {self.access_device} is not open"


def write_pulses(params: FeFETParams, target_vth: float, duration: float = 1e-6,
                 tol: float = 1e-5) -> tuple:
    """(reset, set) pulses that land on ``target_vth`` from any prior state."""
    lo_v, hi_v = params.vth_range
    if not lo_v - 1e-12 <= target_vth <= hi_v + 1e-12:
        raise ValueError(f"target {target_vth:.4g} V outside [{lo_v:.4g}, {hi_v:.4g}] V")
    sign = 1.0 if params.polarity is Polarity.N else -1.0
    reset = ProgramPulse(-sign * params.v_saturation, duration)
    target_p = polarization_for_vth(target_vth, params)
    base = apply_program_pulse(FeFETState(), params, reset)
    if target_p <= base.polarization + 1e-12:
        return (reset,)

    def achieved(u):
        return apply_program_pulse(base, params, ProgramPulse(sign * u, duration)).polarization

    lo, hi = params.v_coercive, params.v_saturation
    if achieved(hi) <= target_p:
        return reset, ProgramPulse(sign * hi, duration)
    # polarization -> vth is affine with slope (vth_high - vth_low) / 2
    p_tol = 2 * tol / (params.vth_high - params.vth_low)
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        p = achieved(mid)
        if abs(p - target_p) <= p_tol:
            lo = hi = mid
            break
        if p < target_p:
            lo = mid
        else:
            hi = mid
    return reset, ProgramPulse(sign * 0.5 * (lo + hi), duration)


def plan_write_sequence(spec: CircuitSpec, target_vths: dict) -> list:
    missing = set(spec.names) - set(target_vths)
    if missing:
        raise ValueError(f"no target for {sorted(missing)}")
    topo = TOPOLOGIES[spec.preset]
    slots = spec.slots
    access = [slots[a] for _, a in topo.access]
    access = list(dict.fromkeys(access))
    steps = []
    for name in access:
        p = spec.params(name)
        steps.append(ProgramStep(name, write_pulses(p, p.vth_conductive), Purpose.ACCESS_OPEN))
    for name in slots:
        if name in access:
            continue
        steps.append(ProgramStep(name, write_pulses(spec.params(name), target_vths[name]),
                                 Purpose.TARGET_WRITE))
    for name in access:
        steps.append(ProgramStep(name, write_pulses(spec.params(name), target_vths[name]),
                                 Purpose.FINAL_WRITE))
    return steps


def execute_write_sequence(circuit: Circuit, steps) -> Circuit:
    states = dict(circuit.states)
    for step in steps:
        if step.device not in states:
            raise ValueError(f"step refers to unknown device {step.device}")
        params = circuit.spec.params(step.device)
        st = states[step.device]
        for pulse in step.pulses:
            st = apply_program_pulse(st, params, pulse)
        states[step.device] = st
    return circuit.with_states(states)


def validate_sequence(spec: CircuitSpec, steps) -> list:
    """Access violations; an empty list means the sequence is legal."""
    topo = TOPOLOGIES[spec.preset]
    slots = spec.slots
    needs = {slots[i]: slots[a] for i, a in topo.access}
    is_open = {name: False for name in spec.names}
    out = []
    for k, step in enumerate(steps):
        gate = needs.get(step.device)
        if gate is not None and not is_open[gate]:
            out.append(Violation(k, step.device, gate))
        if step.purpose is Purpose.ACCESS_OPEN:
            is_open[step.device] = True
        else:
            is_open[step.device] = False
    return out


def program_circuit(circuit: Circuit, target_vths: dict) -> Circuit:
    """Plan, execute and check a write of ``target_vths``."""
    steps = plan_write_sequence(circuit.spec, target_vths)
    out = execute_write_sequence(circuit, steps)
    for name, target in target_vths.items():
        got = vth_of(out.states[name], circuit.spec.params(name))
        if abs(got - target) > WRITE_TOL:
            raise RuntimeError(f"{name}: wrote {got:.4f} V, wanted {target:.4f} V")
    return out


def plan_to_csv(steps) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "device", "purpose", "amplitude", "duration"])
    for k, s in enumerate(steps):
        for p in s.pulses:
            w.writerow([k, s.device, s.purpose.value, format(p.amplitude, ".12g"), format(p.duration, ".12g")])
    return buf.getvalue()
