from fefetmult.circuit import build_circuit
from fefetmult.device import FeFETParams
from fefetmult.netlist import TOPOLOGIES, CircuitSpec, Preset

FOUR_T_ORDER = [Preset.N4_SERIAL, Preset.P4_PARALLEL, Preset.NP4_SERIAL, Preset.NP4_PARALLEL]


def default_circuit(preset, **device_kw):
    devs = tuple((f"M{i + 1}", FeFETParams(polarity=pol, **device_kw))
                 for i, (pol, _) in enumerate(TOPOLOGIES[preset].slots))
    return build_circuit(CircuitSpec(preset, devs))
