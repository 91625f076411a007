"""Line-based circuit description dialect (``.fnet``).

Example::

    # 4n-serial multiplier
    preset 4n-serial
    vdd 1
    load r=1k c=0
    device M1 polarity=n vth_low=-0.4 vth_high=0.8
    device M2 polarity=n
    device M3 polarity=n
    device M4 polarity=n
    gate M2 -vin

Directives are case-insensitive; ``#`` starts a comment.  ``gate`` lines are
optional and default to the preset's wiring.  Numbers accept engineering
suffixes (f p n u m k meg g t).
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, fields, replace
from decimal import Decimal

from .device import FeFETParams, Polarity


class Preset(enum.Enum):
    P2N_PAR = "2n-parallel"
    P2P_SER = "2p-serial"
    NP_PAR = "2np-parallel"
    NP_SER = "2np-serial"
    N4_SERIAL = "4n-serial"
    P4_PARALLEL = "4p-parallel"
    NP4_SERIAL = "4np-serial"
    NP4_PARALLEL = "4np-parallel"

    @classmethod
    def parse(cls, text: str) -> "Preset":
        key = text.strip().lower().replace("/", "")
        for p in cls:
            if key in (p.value, p.name.lower()):
                return p
        aliases = {"np-serial": cls.NP4_SERIAL, "np-parallel": cls.NP4_PARALLEL}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown preset {text!r}")


@dataclass(frozen=True)
class GateDrive:
    """Gate voltage as ``gain * vin + offset`` with gain in {-1, 0, +1}."""

    gain: int = 1
    offset: float = 0.0

    def __neg__(self):
        return GateDrive(-self.gain, -self.offset)

    def __call__(self, vin):
        return self.gain * vin + self.offset

    def text(self) -> str:
        if self.gain == 0:
            return fmt(self.offset)
        return "vin" if self.gain > 0 else "-vin"

    @classmethod
    def parse(cls, text: str) -> "GateDrive":
        t = text.strip().lower()
        if t in ("vin", "+vin"):
            return cls(1)
        if t == "-vin":
            return cls(-1)
        return cls(0, parse_number(t))


VIN = GateDrive(1)
NVIN = GateDrive(-1)


@dataclass(frozen=True)
class Topology:
    """Slot layout of a preset.

    ``slots`` lists (polarity, default drive) in slot order.  ``branches`` are
    parallel paths from the output node to ground; each is a list of series
    stages (top first) and each stage a list of parallel slot indices.
    ``pairs`` must carry complementary drives; ``access`` maps an inner slot
    to the series device that must be open to write it.
    """

    slots: tuple
    branches: tuple
    pairs: tuple = ()
    access: tuple = ()

    @property
    def arity(self):
        return len(self.slots)

    @property
    def is_series(self):
        return any(len(b) > 1 for b in self.branches)


N, P = Polarity.N, Polarity.P

TOPOLOGIES = {
    Preset.P2N_PAR: Topology(((N, VIN), (N, NVIN)), (((0, 1),),), ((0, 1),)),
    Preset.P2P_SER: Topology(((P, VIN), (P, NVIN)), (((0,), (1,)),), ((0, 1),), ((1, 0),)),
    Preset.NP_PAR: Topology(((N, VIN), (P, VIN)), (((0, 1),),)),
    Preset.NP_SER: Topology(((P, VIN), (N, VIN)), (((0,), (1,)),), (), ((1, 0),)),
    Preset.N4_SERIAL: Topology(
        ((N, VIN), (N, NVIN), (N, VIN), (N, NVIN)),
        (((0, 1), (2, 3)),), ((0, 1), (2, 3)), ((2, 0), (3, 1))),
    Preset.P4_PARALLEL: Topology(
        ((P, VIN), (P, VIN), (P, NVIN), (P, NVIN)),
        (((0,), (2,)), ((1,), (3,))), ((0, 2), (1, 3)), ((2, 0), (3, 1))),
    Preset.NP4_SERIAL: Topology(
        ((N, VIN), (P, VIN), (N, VIN), (P, VIN)),
        (((0, 1), (2, 3)),), (), ((2, 0), (3, 1))),
    Preset.NP4_PARALLEL: Topology(
        ((P, VIN), (P, VIN), (N, VIN), (N, VIN)),
        (((0,), (2,)), ((1,), (3,))), (), ((2, 0), (3, 1))),
}


def natural_key(name: str):
    return [int(t) if t.isdigit() else t.lower() for t in re.split(r"(\d+)", name)]


@dataclass(frozen=True)
class CircuitSpec:
    preset: Preset
    devices: tuple  # ((name, FeFETParams), ...) in natural name order
    supply_vdd: float = 1.0
    load_r: float = 1e5
    load_c: float = 0.0
    gate_wiring: tuple = ()  # ((name, GateDrive), ...) same order as devices

    def __post_init__(self):
        devs = tuple(sorted(self.devices, key=lambda d: natural_key(d[0])))
        object.__setattr__(self, "devices", devs)
        given = dict(self.gate_wiring)
        slots = assign_slots(self.preset, devs)
        topo = TOPOLOGIES[self.preset]
        wiring = tuple((name, given.get(name, topo.slots[i][1])) for i, name in enumerate(slots))
        object.__setattr__(self, "gate_wiring", tuple(sorted(wiring, key=lambda w: natural_key(w[0]))))
        for a, b in topo.pairs:
            da, db = self.drive(slots[a]), self.drive(slots[b])
            if da != -db:
                raise ValueError(
                    f"gates of {slots[a]} and {slots[b]} must be complementary "
                    f"(got {da.text()} and {db.text()})")
        if not self.supply_vdd > 0:
            raise ValueError("vdd must be positive")
        if self.load_r < 0 or self.load_c < 0:
            raise ValueError("load values must be non-negative")

    @property
    def names(self):
        return [d[0] for d in self.devices]

    def params(self, name) -> FeFETParams:
        return dict(self.devices)[name]

    def drive(self, name) -> GateDrive:
        return dict(self.gate_wiring)[name]

    @property
    def slots(self):
        """Device names in topology slot order."""
        return assign_slots(self.preset, self.devices)

    def with_params(self, name, **changes) -> "CircuitSpec":
        devs = tuple((n, replace(p, **changes) if n == name else p) for n, p in self.devices)
        return replace(self, devices=devs)


def assign_slots(preset: Preset, devices) -> list:
    """Map devices onto slots: per polarity, in natural name order."""
    topo = TOPOLOGIES[preset]
    if len(devices) != topo.arity:
        raise ValueError(f"preset {preset.value} needs {topo.arity} devices, got {len(devices)}")
    names = set()
    for name, _ in devices:
        if name in names:
            raise ValueError(f"duplicate device {name}")
        names.add(name)
    pools = {pol: [n for n, p in devices if p.polarity is pol] for pol in Polarity}
    out = []
    for pol, _ in topo.slots:
        if not pools[pol]:
            raise ValueError(f"preset {preset.value} needs more {pol.value}-type devices")
        out.append(pools[pol].pop(0))
    return out


_SUFFIX = {"f": -15, "p": -12, "n": -9, "u": -6, "µ": -6, "m": -3,
           "k": 3, "meg": 6, "g": 9, "t": 12}  # decimal exponents
_NUM = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)(meg|[fpnuµmkgt])?[a-z]*$")


def parse_number(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf"):
        return math.inf
    if t == "-inf":
        return -math.inf
    m = _NUM.match(t)
    if not m:
        raise ValueError(f"malformed number {text!r}")
    if not m.group(2):
        return float(m.group(1))
    # shift the decimal exponent so "100u" parses exactly like "100e-6"
    d = Decimal(m.group(1)).scaleb(_SUFFIX[m.group(2)])
    return float(d)


def fmt(x: float) -> str:
    """Shortest text that reparses to the same float (``1.0`` -> ``1``)."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = repr(float(x))
    if s.endswith(".0"):
        s = s[:-2]
    return "0" if s == "-0" else s


@dataclass
class NetlistIssue:
    line: int
    column: int
    message: str

    def __str__(self):
        return f"line {self.line}, col {self.column}: {self.message}"


class NetlistError(ValueError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


_PARAM_KEYS = {
    "polarity": "polarity", "type": "polarity",
    "k_trans": "k_trans", "k": "k_trans",
    "width_ratio": "width_ratio", "w": "width_ratio",
    "vth_low": "vth_low", "vthl": "vth_low",
    "vth_high": "vth_high", "vthh": "vth_high",
    "v_coercive": "v_coercive", "vc": "v_coercive",
    "v_saturation": "v_saturation", "vsat": "v_saturation",
    "subthreshold_smoothing": "subthreshold_smoothing", "s": "subthreshold_smoothing",
    "vds_sat": "vds_sat", "vdsat": "vds_sat",
    "gate_pole_hz": "gate_pole_hz", "fpole": "gate_pole_hz",
}


def parse_netlist(text: str) -> CircuitSpec:
    """Parse ``.fnet`` text; raises NetlistError listing every positioned issue."""
    issues = []
    preset = None
    preset_line = 1
    vdd, load_r, load_c = 1.0, 1e5, 0.0
    devices, device_lines = [], {}
    gates = []

    def err(lineno, col, msg):
        issues.append(NetlistIssue(lineno, col, msg))

    for lineno, raw in enumerate(text.replace("\r\n", "\n").split("\n"), start=1):
        line = raw.split("#", 1)[0]
        toks = [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", line)]
        if not toks:
            continue
        col0, word = toks[0]
        directive = word.lower()
        args = toks[1:]
        try:
            if directive == "preset":
                if len(args) != 1:
                    err(lineno, col0, "preset takes one name")
                    continue
                if preset is not None:
                    err(lineno, col0, "preset given twice")
                    continue
                try:
                    preset = Preset.parse(args[0][1])
                    preset_line = lineno
                except ValueError as e:
                    err(lineno, args[0][0], str(e))
            elif directive == "vdd":
                if len(args) != 1:
                    err(lineno, col0, "vdd takes one value")
                    continue
                vdd = _num(args[0], lineno, err)
            elif directive == "load":
                for col, tok in args:
                    key, _, val = tok.partition("=")
                    key = key.lower()
                    if key not in ("r", "c") or not val:
                        err(lineno, col, f"unknown load field {tok!r}")
                        continue
                    v = _num((col + len(key) + 1, val), lineno, err)
                    if v is not None:
                        if key == "r":
                            load_r = v
                        else:
                            load_c = v
            elif directive == "device":
                if not args:
                    err(lineno, col0, "device needs a name")
                    continue
                name = args[0][1]
                if name in device_lines:
                    err(lineno, args[0][0], f"duplicate device {name} (first on line {device_lines[name]})")
                    continue
                device_lines[name] = lineno
                kw = {}
                for col, tok in args[1:]:
                    key, _, val = tok.partition("=")
                    field_name = _PARAM_KEYS.get(key.lower())
                    if field_name is None or not val:
                        err(lineno, col, f"unknown device field {tok!r}")
                        continue
                    if field_name == "polarity":
                        if val.lower() not in ("n", "p"):
                            err(lineno, col, f"polarity must be n or p, got {val!r}")
                            continue
                        kw["polarity"] = Polarity(val.lower())
                    else:
                        v = _num((col + len(key) + 1, val), lineno, err)
                        if v is not None:
                            kw[field_name] = v
                try:
                    devices.append((name, FeFETParams(**kw)))
                except ValueError as e:
                    err(lineno, col0, str(e))
            elif directive == "gate":
                if len(args) != 2:
                    err(lineno, col0, "gate takes a device name and a drive (vin, -vin or a number)")
                    continue
                try:
                    gates.append((args[0][1], GateDrive.parse(args[1][1]), lineno))
                except ValueError as e:
                    err(lineno, args[1][0], str(e))
            else:
                err(lineno, col0, f"unknown directive {word!r}")
        except ValueError as e:  # pragma: no cover - defensive
            err(lineno, col0, str(e))

    if preset is None:
        err(1, 1, "missing preset")
    known = {n for n, _ in devices}
    for name, _, lineno in gates:
        if name not in known:
            err(lineno, 1, f"gate refers to unknown device {name}")
    if issues:
        raise NetlistError(issues)
    try:
        return CircuitSpec(preset, tuple(devices), vdd, load_r, load_c,
                           tuple((n, d) for n, d, _ in gates))
    except ValueError as e:
        raise NetlistError([NetlistIssue(preset_line, 1, str(e))]) from None


def _num(tok, lineno, err):
    col, text = tok
    try:
        return parse_number(text)
    except ValueError as e:
        err(lineno, col, str(e))
        return None


def serialize_netlist(spec: CircuitSpec) -> str:
    lines = [f"preset {spec.preset.value}",
             f"vdd {fmt(spec.supply_vdd)}",
             f"load r={fmt(spec.load_r)} c={fmt(spec.load_c)}"]
    for name, p in spec.devices:
        parts = [f"device {name}", f"polarity={p.polarity.value}"]
        for f in fields(FeFETParams):
            if f.name != "polarity":
                parts.append(f"{f.name}={fmt(getattr(p, f.name))}")
        lines.append(" ".join(parts))
    for name, d in spec.gate_wiring:
        lines.append(f"gate {name} {d.text()}")
    return "\n".join(lines) + "\n"
