from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from fefetmult.device import FeFETParams, Polarity
from fefetmult.netlist import (TOPOLOGIES, CircuitSpec, GateDrive, NetlistError, Preset, parse_netlist,
                               parse_number, serialize_netlist)

NETLISTS = sorted((Path(__file__).parents[1] / "netlists").glob("*.fnet"))

FOUR_N = """\
# four n devices
preset 4n-serial
vdd 1.0
device M1 polarity=n
device M2 polarity=n
device M3 polarity=n
device M4 polarity=n
"""


def issues_of(text):
    with pytest.raises(NetlistError) as ei:
        parse_netlist(text)
    return ei.value.issues


def test_parse_basic():
    spec = parse_netlist(FOUR_N)
    assert spec.preset is Preset.N4_SERIAL
    assert spec.supply_vdd == 1.0
    assert list(spec.names) == ["M1", "M2", "M3", "M4"]
    assert spec.drive("M2") == GateDrive(-1)


def test_empty_is_missing_preset():
    (issue,) = issues_of("")
    assert issue.line == 1 and "missing preset" in issue.message


@pytest.mark.parametrize("text, needle, line", [
    ("preset 4n-serial\nresistor R1\n", "unknown directive", 2),
    ("preset 2n-parallel\ndevice M1\n", "2", 1),
    ("preset 2n-parallel\ndevice M1\ndevice M1\n", "duplicate", 3),
    ("preset 2n-parallel\ndevice M1\ndevice M2\ngate M2 vin\n", "complementary", 1),
    ("preset 2n-parallel\nvdd 1.x.2\ndevice M1\ndevice M2\n", "number", 2),
    ("preset 2n-parallel\ndevice M1 polarity=q\ndevice M2\n", "polarity", 2),
    ("preset 2n-parallel\ndevice M1 colour=red\ndevice M2\n", "unknown device field", 2),
])
def test_positioned_errors(text, needle, line):
    issues = issues_of(text)
    assert any(needle in i.message and i.line == line for i in issues), issues
    assert all(i.line >= 1 and i.column >= 1 for i in issues)


def test_engineering_suffixes():
    assert parse_number("100k") == 1e5
    assert parse_number("1meg") == 1e6
    # suffixes shift the decimal exponent, so they parse exactly like e-notation
    for text, ref in [("2.5u", 2.5e-6), ("10n", 1e-8), ("3f", 3e-15), ("100u", 1e-4), ("4.7k", 4.7e3),
                      ("-0.3m", -3e-4), (".1p", 1e-13)]:
        assert parse_number(text) == ref
    assert parse_number("inf") == float("inf")
    with pytest.raises(ValueError):
        parse_number("abc")


def test_crlf_and_case():
    spec = parse_netlist(FOUR_N.replace("\n", "\r\n").replace("preset", "PRESET"))
    assert spec.preset is Preset.N4_SERIAL


def test_vdd_canonical_line():
    assert "\nvdd 1\n" in serialize_netlist(parse_netlist(FOUR_N))


def test_device_order_is_canonical():
    shuffled = FOUR_N.replace("device M1 polarity=n\n", "") + "device M1 polarity=n\n"
    assert serialize_netlist(parse_netlist(shuffled)) == serialize_netlist(parse_netlist(FOUR_N))


def test_slots_follow_polarity_not_order():
    text = "preset 2np-parallel\ndevice A polarity=p\ndevice B polarity=n\n"
    spec = parse_netlist(text)
    assert spec.params(spec.slots[0]).polarity is Polarity.N
    assert list(spec.slots) == ["B", "A"]


@pytest.mark.parametrize("path", NETLISTS, ids=lambda p: p.name)
def test_shipped_netlists_round_trip(path):
    text = path.read_text()
    spec = parse_netlist(text)
    assert parse_netlist(serialize_netlist(spec)) == spec
    assert serialize_netlist(spec) == text


finite = st.floats(allow_nan=False, allow_infinity=False)


@st.composite
def specs(draw):
    preset = draw(st.sampled_from(list(Preset)))
    topo = TOPOLOGIES[preset]
    names = draw(st.lists(st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,5}", fullmatch=True),
                          min_size=topo.arity, max_size=topo.arity, unique_by=str.lower))
    devices = []
    for name, (pol, _) in zip(names, topo.slots):
        lo = draw(st.floats(-1.0, 0.5))
        params = FeFETParams(
            polarity=pol,
            k_trans=draw(st.floats(1e-6, 1e-3)),
            width_ratio=draw(st.floats(0.1, 10)),
            vth_low=lo,
            vth_high=lo + draw(st.floats(0.1, 1.5)),
            v_coercive=draw(st.floats(0.5, 1.5)),
            v_saturation=draw(st.floats(2.0, 4.0)),
            subthreshold_smoothing=draw(st.floats(0.01, 0.2)),
            vds_sat=draw(st.floats(0.05, 1.0)),
            gate_pole_hz=draw(st.sampled_from([float("inf"), 1e9, 3.3e8])),
        )
        devices.append((name, params))
    return CircuitSpec(preset, tuple(devices), supply_vdd=draw(st.floats(0.5, 3.0)),
                       load_r=draw(st.floats(0, 1e6)), load_c=draw(st.floats(0, 1e-12)))


@settings(max_examples=150, deadline=None)
@given(specs())
def test_round_trip_identity(spec):
    text = serialize_netlist(spec)
    again = parse_netlist(text)
    assert again == spec
    assert serialize_netlist(again) == text
