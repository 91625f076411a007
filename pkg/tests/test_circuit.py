import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fefetmult.circuit import (Circuit, SolverWarning, TransferCurve, build_circuit, dc_output_current,
                               detect_extrema, solve_series_node, symmetry_point, transfer_sweep)
from fefetmult.device import FeFETParams, FeFETState, Polarity, id_drain
from fefetmult.netlist import TOPOLOGIES, CircuitSpec, GateDrive, Preset

from oracles import grid_node, oracle_current


def make(preset, load_r=1e5, **kw):
    topo = TOPOLOGIES[preset]
    devs = tuple((f"M{i + 1}", FeFETParams(polarity=pol, **kw)) for i, (pol, _) in enumerate(topo.slots))
    return build_circuit(CircuitSpec(preset, devs, load_r=load_r))


def test_build_wiring():
    c = make(Preset.P2N_PAR)
    assert c.spec.drive("M1") == GateDrive(1) and c.spec.drive("M2") == GateDrive(-1)
    c = make(Preset.NP_PAR)
    assert {c.spec.drive(n) for n in c.spec.names} == {GateDrive(1)}
    assert {c.spec.params(n).polarity for n in c.spec.names} == {Polarity.N, Polarity.P}


def test_state_name_mismatch():
    spec = make(Preset.P2N_PAR).spec
    with pytest.raises(ValueError):
        build_circuit(spec, {"Mx": FeFETState()})
    with pytest.raises(ValueError):
        Circuit(spec, {"M1": FeFETState()})


def test_series_identical_devices_split_supply():
    p = FeFETParams()
    f = lambda vx: p.k_trans * np.tanh(vx / p.vds_sat)  # symmetric resistive pair
    g = lambda vx: p.k_trans * np.tanh((1.0 - vx) / p.vds_sat)
    sol = solve_series_node(f, g, 1.0)
    assert abs(float(sol.v) - 0.5) < 1e-6


def test_series_bottom_off_goes_to_top():
    sol = solve_series_node(lambda vx: 0 * vx, lambda vx: np.tanh((1 - vx) / 0.3), 1.0)
    assert float(sol.v) > 1 - 1e-5


def test_series_no_crossing_is_flagged():
    sol = solve_series_node(lambda vx: 1 + 0 * vx, lambda vx: 0 * vx, 1.0)
    assert bool(sol.flagged) and float(sol.v) == 0.0


def test_series_node_vs_grid(rng):
    p = FeFETParams()
    for _ in range(100):
        vg_b, vg_t, vth_b, vth_t = rng.uniform(-0.5, 1.5, 4)
        vdd = rng.uniform(0.3, 1.0)
        from oracles import device_i
        bottom = lambda x: device_i(p, vth_b, vg_b, 0.0, x)
        top = lambda x: device_i(p, vth_t, vg_t, x, vdd)
        ref = grid_node(bottom, top, vdd)
        got = float(solve_series_node(bottom, top, np.array(vdd)).v)
        assert abs(got - ref) <= 2 * vdd / 1e5


def test_parallel_additivity(rng):
    c = make(Preset.P2N_PAR, load_r=0.0).with_vths({"M1": 0.1, "M2": 0.3})
    vth = c.vths()
    vin = rng.uniform(-1, 1.5, 200)
    total, parts = c.device_current(c.gate_voltages(vin), np.ones_like(vin))
    assert np.array_equal(total, parts[0])
    m = c.spec.params("M1")
    direct = id_drain(m, vth["M1"], vin - 0.0, 1.0 - 0.0) + id_drain(m, vth["M2"], -vin - 0.0, 1.0 - 0.0)
    assert np.array_equal(total, direct)


def test_np_par_degenerate_p_branch():
    from scipy.optimize import brentq
    c = make(Preset.NP_PAR)
    n_name, p_name = c.spec.slots
    spec = c.spec.with_params(p_name, width_ratio=1e-18)
    circ = build_circuit(spec).with_vths({n_name: 0.2, p_name: -0.2})
    pn = spec.params(n_name)
    vth = circ.vths()[n_name]
    for vin in np.linspace(-1, 1.5, 26):
        g = lambda v: id_drain(pn, vth, vin, v) - (1.0 - v) / spec.load_r
        v = 1.0 if g(1.0) <= 0 else brentq(g, 0.0, 1.0, xtol=1e-15)
        assert dc_output_current(circ, vin) == pytest.approx((1.0 - v) / spec.load_r, rel=1e-6, abs=1e-16)


def test_output_vs_oracle_n4(rng):
    c0 = make(Preset.N4_SERIAL)
    for _ in range(5):
        vths = dict(zip(c0.spec.names, rng.uniform(-0.4, 0.8, 4)))
        c = c0.with_vths(vths)
        for vin in rng.uniform(-1.5, 2.0, 3):
            ref = oracle_current(c.spec, vths, vin)
            assert dc_output_current(c, vin) == pytest.approx(ref, rel=1e-6)


def test_zero_load_pins_output():
    c = make(Preset.P2N_PAR, load_r=0.0)
    v, _ = c.solve_output(c.gate_voltages(np.array([0.3])), (1,))
    assert v[0] == 1.0


@pytest.mark.parametrize("vths", [(0.2, 0.2), (0.35, 0.05), (-0.3, 0.6)])
def test_p2n_symmetry(vths):
    c = make(Preset.P2N_PAR).with_vths(dict(zip(("M1", "M2"), vths)))
    vc = symmetry_point(c)
    d = np.linspace(1e-3, 1.2, 400)
    a, b = dc_output_current(c, vc + d), dc_output_current(c, vc - d)
    assert np.max(np.abs(a - b) / np.maximum(a, b)) < 1e-9


def test_symmetry_point_needs_pairs():
    with pytest.raises(ValueError):
        symmetry_point(make(Preset.NP_PAR))


def test_sweep_shapes():
    c = make(Preset.P2N_PAR).with_vths({"M1": 0.2, "M2": 0.2})
    curve = transfer_sweep(c, -1.0, 1.0, 2001)
    assert [e.kind for e in curve.extrema] == ["valley"]
    assert abs(curve.extrema[0].vin - symmetry_point(c)) < 1e-4
    c = make(Preset.P2P_SER).with_vths({"M1": -0.2, "M2": -0.2})
    assert [e.kind for e in transfer_sweep(c, -1.5, 1.5).extrema] == ["peak"]
    c = make(Preset.N4_SERIAL).with_vths({"M1": 0.3, "M2": -0.1, "M3": -0.1, "M4": 0.3})
    assert [e.kind for e in transfer_sweep(c, -1.5, 2.0).extrema] == ["valley", "peak", "valley"]


def test_curve_validation():
    with pytest.raises(ValueError):
        TransferCurve(np.array([0.0, 1.0]), np.array([1.0]), [])
    with pytest.raises(ValueError):
        TransferCurve(np.array([0.0, 0.0]), np.array([1.0, 2.0]), [])


def test_extrema_cases():
    x = np.linspace(-1, 1, 401)
    (e,) = detect_extrema(x, (x - 0.123) ** 2)
    assert e.kind == "valley" and e.vin == pytest.approx(0.123, abs=1e-9)
    assert detect_extrema(x, np.tanh(x)) == []
    w = (x ** 2 - 0.25) ** 2
    assert [e.kind for e in detect_extrema(x, w)] == ["valley", "peak", "valley"]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=60))
def test_extrema_alternate(ys):
    ex = detect_extrema(np.arange(len(ys), dtype=float), np.array(ys))
    kinds = [e.kind for e in ex]
    assert all(a != b for a, b in zip(kinds, kinds[1:]))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(list(Preset)), st.lists(st.floats(-0.4, 0.8), min_size=4, max_size=4),
       st.floats(-1.5, 2.0))
def test_sweep_matches_pointwise(preset, vths, vin):
    c0 = make(preset)
    c = c0.with_vths(dict(zip(c0.spec.names, vths)))
    grid = np.array([vin - 0.1, vin, vin + 0.1])
    assert dc_output_current(c, grid)[1] == dc_output_current(c, vin)


def test_no_solver_warnings_on_sweeps():
    with warnings.catch_warnings():
        warnings.simplefilter("error", SolverWarning)
        for preset in Preset:
            transfer_sweep(make(preset), -1.5, 2.0, 401)
