import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fefetmult.circuit import build_circuit
from fefetmult.device import FeFETParams
from fefetmult.fsk import FskPlan, UnsupportedPair, check_pair, fsk_decode_check, fsk_waveform, plan_fsk
from fefetmult.harmonics import Waveform
from fefetmult.netlist import TOPOLOGIES, CircuitSpec, Preset
from fefetmult.tuner import Mode


@pytest.fixture(scope="module")
def n4_plan():
    topo = TOPOLOGIES[Preset.N4_SERIAL]
    devs = tuple((f"M{i + 1}", FeFETParams(polarity=pol)) for i, (pol, _) in enumerate(topo.slots))
    c = build_circuit(CircuitSpec(Preset.N4_SERIAL, devs))
    plan, cfg = plan_fsk(c, [1, 0], Mode.FirstH, Mode.ThirdH)
    return c.with_vths(cfg.vths), plan


def with_bits(plan, bits):
    return FskPlan(bits, plan.carrier_f, plan.level_one_vop, plan.level_zero_vop, plan.amplitude,
                   plan.mode_pair, plan.bit_periods)


@pytest.mark.parametrize("pair", [(2, 3), (3, 2), (3, 4)])
def test_unsupported_pairs(pair):
    with pytest.raises(UnsupportedPair):
        check_pair(*(Mode.parse(str(m)) for m in pair))


@pytest.mark.parametrize("pair", [(1, 2), (1, 3), (4, 1), (2, 4)])
def test_supported_pairs(pair):
    check_pair(*(Mode.parse(str(m)) for m in pair))


def test_plan_validation():
    kw = dict(carrier_f=1e6, level_one_vop=0.5, level_zero_vop=0.0, amplitude=0.3,
              mode_pair=(Mode.FirstH, Mode.ThirdH))
    with pytest.raises(ValueError):
        FskPlan((1, 0), bit_periods=3, **kw)
    with pytest.raises(ValueError):
        FskPlan((1, 2), **kw)
    with pytest.raises(ValueError):
        FskPlan((1, 0), bit_periods=4.5, **kw)
    with pytest.raises(UnsupportedPair):
        FskPlan((1,), **{**kw, "mode_pair": (Mode.SecondH, Mode.ThirdH)})


def test_alternating_bits(n4_plan):
    circuit, plan = n4_plan
    p = with_bits(plan, [1, 0, 1, 0])
    wf = fsk_waveform(circuit, p)
    assert len(wf.samples) == 4 * p.bit_periods * p.samples_per_period
    assert fsk_decode_check(wf, p.carrier_f, p.bit_periods) == [1, 3, 1, 3]
    # bit boundaries sit on carrier phase zero
    starts = wf.vin[:: p.bit_periods * p.samples_per_period]
    np.testing.assert_allclose(starts, [p.level(b) for b in [1, 0, 1, 0]], atol=1e-15)


def test_all_ones(n4_plan):
    circuit, plan = n4_plan
    p = with_bits(plan, [1] * 6)
    assert fsk_decode_check(fsk_waveform(circuit, p), p.carrier_f, p.bit_periods) == [1] * 6


def test_empty_bits(n4_plan):
    circuit, plan = n4_plan
    wf = fsk_waveform(circuit, with_bits(plan, []))
    assert len(wf.samples) == 0
    assert fsk_decode_check(wf, plan.carrier_f, plan.bit_periods) == []


def test_level_outside_range(n4_plan):
    circuit, plan = n4_plan
    bad = FskPlan((1,), plan.carrier_f, 5.0, plan.level_zero_vop, plan.amplitude, plan.mode_pair)
    with pytest.raises(ValueError):
        fsk_waveform(circuit, bad)


def spliced(orders, spp=32, bit_periods=6):
    k = np.arange(spp * bit_periods)
    parts = [np.sin(2 * np.pi * o * k / spp) + 0.2 for o in orders]
    return Waveform(1 / (1e6 * spp), np.concatenate(parts), bit_periods * len(orders))


def test_spliced_sines_decode_exactly():
    orders = [1, 3, 3, 1, 2, 4, 1]
    assert fsk_decode_check(spliced(orders), 1e6, 6) == orders


def test_pure_carrier_is_first_order():
    assert fsk_decode_check(spliced([1] * 5), 1e6, 6) == [1] * 5


def test_decode_length_mismatch():
    wf = spliced([1, 3])
    short = Waveform(wf.dt, wf.samples[:-32], 11)
    with pytest.raises(ValueError):
        fsk_decode_check(short, 1e6, 6)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=32))
def test_round_trip(n4_plan, bits):
    circuit, plan = n4_plan
    p = with_bits(plan, bits)
    assert fsk_decode_check(fsk_waveform(circuit, p), p.carrier_f, p.bit_periods) == p.expected_orders()
