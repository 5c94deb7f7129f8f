"""Circuit data model, validation, unit parsing and the reference isolator circuits.

Node ``"0"`` is ground. All values are SI. A transmission line is a
two-conductor element whose two ends (``a`` and ``b``) are both referenced to
ground.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Union

import networkx as nx

from .constants import C_LIGHT, PHI0, PHI0_REDUCED
from .errors import (
    DisconnectedGraph,
    DomainError,
    NetlistError,
    NonPositiveValue,
    PortCountError,
    UnknownNode,
)

GROUND = "0"


# --------------------------------------------------------------------------
# elements


@dataclass(frozen=True)
class Resistor:
    name: str
    nodes: tuple[str, str]
    r: float


@dataclass(frozen=True)
class Capacitor:
    name: str
    nodes: tuple[str, str]
    c: float


@dataclass(frozen=True)
class Inductor:
    name: str
    nodes: tuple[str, str]
    l: float  # noqa: E741


@dataclass(frozen=True)
class JosephsonJunction:
    """Junction with critical current ``ic`` and a series loss ``r_series``."""

    name: str
    nodes: tuple[str, str]
    ic: float
    r_series: float = 0.0

    @property
    def lj0(self) -> float:
        return lj0_from_ic(self.ic)

    @property
    def ej(self) -> float:
        """Josephson energy in joules."""
        return PHI0 * self.ic / (2 * math.pi)


@dataclass(frozen=True)
class TransmissionLine:
    """Ideal lossless line between ``nodes[0]`` and ``nodes[1]`` (ground return)."""

    name: str
    nodes: tuple[str, str]
    z0: float
    delay: float


Element = Union[Resistor, Capacitor, Inductor, JosephsonJunction, TransmissionLine]

_VALUE_FIELDS = {
    Resistor: ("r",),
    Capacitor: ("c",),
    Inductor: ("l",),
    JosephsonJunction: ("ic",),
    TransmissionLine: ("z0", "delay"),
}


@dataclass(frozen=True)
class Port:
    node: str
    z0: float = 50.0


@dataclass(frozen=True)
class Netlist:
    nodes: frozenset
    elements: tuple
    ports: tuple
    design_frequency: float

    def element(self, name: str) -> Element:
        for el in self.elements:
            if el.name == name:
                return el
        raise KeyError(name)

    @property
    def junctions(self) -> list[JosephsonJunction]:
        return [el for el in self.elements if isinstance(el, JosephsonJunction)]

    def linearized(self) -> "Netlist":
        """Copy with every junction replaced by its zero-current inductance (plus R_J)."""
        out = []
        nodes = set(self.nodes)
        for el in self.elements:
            if not isinstance(el, JosephsonJunction):
                out.append(el)
                continue
            a, b = el.nodes
            if el.r_series > 0:
                mid = f"{el.name}:int"
                nodes.add(mid)
                out.append(Resistor(f"{el.name}:rj", (a, mid), el.r_series))
                out.append(Inductor(f"{el.name}:lj", (mid, b), el.lj0))
            else:
                out.append(Inductor(f"{el.name}:lj", (a, b), el.lj0))
        return replace(self, nodes=frozenset(nodes), elements=tuple(out))

    def mirrored(self) -> "Netlist":
        """Same circuit with the two ports swapped."""
        return replace(self, ports=tuple(reversed(self.ports)))


def make_netlist(elements, ports, design_frequency, nodes=None) -> Netlist:
    """Convenience constructor; the node set defaults to every referenced node."""
    if nodes is None:
        nodes = {GROUND}
        for el in elements:
            nodes.update(el.nodes)
        nodes.update(p.node for p in ports)
    return Netlist(frozenset(nodes), tuple(elements), tuple(ports), float(design_frequency))


# --------------------------------------------------------------------------
# validation


def validate(netlist: Netlist) -> Netlist:
    """Return ``netlist`` unchanged if it is well formed, otherwise raise."""
    if GROUND not in netlist.nodes:
        raise UnknownNode(GROUND)
    names = set()
    for el in netlist.elements:
        if el.name in names:
            raise NetlistError(f"duplicate element name {el.name!r}")
        names.add(el.name)
        if len(el.nodes) != 2:
            raise NetlistError(f"element {el.name!r} needs exactly two nodes")
        for n in el.nodes:
            if n not in netlist.nodes:
                raise UnknownNode(n, el.name)
        for f in _VALUE_FIELDS[type(el)]:
            v = getattr(el, f)
            if not (v > 0 and math.isfinite(v)):
                raise NonPositiveValue(el.name, f, v)
        if isinstance(el, JosephsonJunction) and not el.r_series >= 0:
            raise NonPositiveValue(el.name, "r_series", el.r_series)
    if not netlist.design_frequency > 0:
        raise NonPositiveValue("<netlist>", "design_frequency", netlist.design_frequency)
    if len(netlist.ports) != 2:
        raise PortCountError(f"two-port analysis needs exactly 2 ports, got {len(netlist.ports)}")
    for p in netlist.ports:
        if p.node not in netlist.nodes or p.node == GROUND:
            raise UnknownNode(p.node, "<port>")
        if not p.z0 > 0:
            raise NonPositiveValue("<port>", "z0", p.z0)

    g = nx.Graph()
    g.add_nodes_from(netlist.nodes)
    for el in netlist.elements:
        g.add_edge(*el.nodes)
        if isinstance(el, TransmissionLine):
            g.add_edge(el.nodes[0], GROUND)
            g.add_edge(el.nodes[1], GROUND)
    if not nx.is_connected(g):
        parts = sorted(sorted(c) for c in nx.connected_components(g) if GROUND not in c)
        raise DisconnectedGraph(f"nodes not connected to ground: {parts}")
    return netlist


# --------------------------------------------------------------------------
# conversions


def lj0_from_ic(ic: float) -> float:
    """Zero-current junction inductance Phi0 / (2 pi Ic)."""
    if not ic > 0:
        raise DomainError(f"critical current must be positive, got {ic!r}")
    return PHI0_REDUCED / ic


def ic_from_lj0(lj0: float) -> float:
    if not lj0 > 0:
        raise DomainError(f"inductance must be positive, got {lj0!r}")
    return PHI0_REDUCED / lj0


def delay_from_detuning(delta: float, f_design: float, v_p: float = C_LIGHT) -> dict:
    """Inter-qubit spacing d = lambda (1 - delta/pi) / 2 and the matching line delay."""
    if not 0 <= delta < math.pi:
        raise DomainError(f"detuning must lie in [0, pi), got {delta!r}")
    if not (f_design > 0 and v_p > 0):
        raise DomainError("design frequency and phase velocity must be positive")
    d = (v_p / f_design) * (1 - delta / math.pi) / 2
    delay = (1 - delta / math.pi) / (2 * f_design)
    return {"d": d, "delay": delay, "phase_at_f_design": math.pi - delta}


# --------------------------------------------------------------------------
# reference circuits

LORENTZ_DEFAULTS = {
    "c_q2": 63e-15,
    "delta": 9e-2,
    "c_d": 60e-15,
    "ic": 40e-9,
    "lj1": None,
    "lj2": None,
    "r_j": 0.5,
    "f_design": 4.9e9,
    "z0": 50.0,
    "v_p": C_LIGHT,
}

FANO_DEFAULTS = dict(LORENTZ_DEFAULTS, f_design=8.98e9, c_1=26e-15, c_2=26e-15)

#: operating points quoted with the two reference circuits
LORENTZ_OPERATING_POINT = {"f0": 4.9e9, "power_dbm": -123.0, "delta": 9e-2}
FANO_OPERATING_POINT = {"f0": 8.98e9, "power_dbm": -120.0, "delta": 9e-2}


def _params(defaults: dict, overrides: dict) -> dict:
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise NetlistError(f"unknown reference-circuit parameters: {sorted(unknown)}")
    p = dict(defaults)
    p.update(overrides)
    return p


def _qubit_ic(p: dict, which: str) -> float:
    lj = p[which] if p[which] is not None else None
    return ic_from_lj0(lj) if lj is not None else p["ic"]


def _isolator_elements(p: dict) -> list:
    c_q1 = p["c_q2"] * (1 + p["delta"])
    delay = delay_from_detuning(p["delta"], p["f_design"], p["v_p"])["delay"]
    return [
        Capacitor("CD1", ("A", "q1"), p["c_d"]),
        JosephsonJunction("J1", ("q1", GROUND), _qubit_ic(p, "lj1"), p["r_j"]),
        Capacitor("CQ1", ("q1", GROUND), c_q1),
        TransmissionLine("TL", ("A", "B"), p["z0"], delay),
        Capacitor("CD2", ("B", "q2"), p["c_d"]),
        JosephsonJunction("J2", ("q2", GROUND), _qubit_ic(p, "lj2"), p["r_j"]),
        Capacitor("CQ2", ("q2", GROUND), p["c_q2"]),
    ]


def reference_lorentz(**overrides) -> Netlist:
    """Two side-coupled transmons on a line of phase pi - delta.

    Overridable keys: ``c_q2, delta, c_d, ic, lj1, lj2, r_j, f_design, z0, v_p``.
    ``lj1``/``lj2`` set a qubit's zero-current inductance directly and take
    precedence over ``ic``.
    """
    p = _params(LORENTZ_DEFAULTS, overrides)
    ports = (Port("A", p["z0"]), Port("B", p["z0"]))
    return validate(make_netlist(_isolator_elements(p), ports, p["f_design"]))


def reference_fano(**overrides) -> Netlist:
    """Lorentz topology plus shunt capacitors ``c_1``/``c_2`` at the two line nodes.

    A zero ``c_1`` or ``c_2`` omits that capacitor.
    """
    p = _params(FANO_DEFAULTS, overrides)
    els = _isolator_elements(p)
    if p["c_1"]:
        els.append(Capacitor("C1", ("A", GROUND), p["c_1"]))
    if p["c_2"]:
        els.append(Capacitor("C2", ("B", GROUND), p["c_2"]))
    ports = (Port("A", p["z0"]), Port("B", p["z0"]))
    return validate(make_netlist(els, ports, p["f_design"]))


def single_transmon(**overrides) -> Netlist:
    """One transmon side-coupled through ``c_d`` to a through connection."""
    p = _params(LORENTZ_DEFAULTS, overrides)
    els = [
        Capacitor("CD1", ("A", "q1"), p["c_d"]),
        JosephsonJunction("J1", ("q1", GROUND), _qubit_ic(p, "lj1"), p["r_j"]),
        Capacitor("CQ1", ("q1", GROUND), p["c_q2"] * (1 + p["delta"])),
    ]
    ports = (Port("A", p["z0"]), Port("A", p["z0"]))
    return validate(make_netlist(els, ports, p["f_design"]))


# --------------------------------------------------------------------------
# file format

_PREFIX = {
    "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3,
    "": 1.0, "k": 1e3, "K": 1e3, "M": 1e6, "G": 1e9, "T": 1e12,
}
_UNITS = ("Hz", "F", "H", "A", "Ohm", "ohm", "Ω", "s", "V", "m")
_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Zµ]*|Ω)\s*$")


def parse_quantity(value) -> float:
    """Parse ``"60fF"``, ``"4.9 GHz"``, ``"8e-9"`` or a bare number into SI units.

    Power in ``dBm`` is returned unchanged (still in dBm).
    """
    if isinstance(value, (int, float)):
        return float(value)
    m = _QTY.match(str(value))
    if not m:
        raise NetlistError(f"cannot parse quantity {value!r}")
    num, suffix = float(m.group(1)), m.group(2)
    if suffix in ("", "dBm"):
        return num
    for unit in _UNITS:
        if suffix.endswith(unit):
            prefix = suffix[: -len(unit)]
            if prefix in _PREFIX:
                return num * _PREFIX[prefix]
    if suffix in _PREFIX:
        return num * _PREFIX[suffix]
    raise NetlistError(f"unknown unit in {value!r}")


def _element_from_json(d: dict) -> Element:
    kind = d.get("type")
    name = d["name"]
    nodes = [str(n) for n in d["nodes"]]
    params = {k: parse_quantity(v) for k, v in d.get("params", {}).items()}
    if kind == "tline":
        if len(nodes) == 4:
            if nodes[1] != GROUND or nodes[3] != GROUND:
                raise NetlistError(f"line {name!r}: both pairs must be ground referenced")
            nodes = [nodes[0], nodes[2]]
        if "delay" not in params and "length" in params:
            params["delay"] = params.pop("length") / params.pop("v_p", C_LIGHT)
        return TransmissionLine(name, tuple(nodes), params.get("z0", 50.0), params["delay"])
    if len(nodes) != 2:
        raise NetlistError(f"element {name!r} needs two nodes")
    if kind == "resistor":
        return Resistor(name, tuple(nodes), params["r"])
    if kind == "capacitor":
        return Capacitor(name, tuple(nodes), params["c"])
    if kind == "inductor":
        return Inductor(name, tuple(nodes), params["l"])
    if kind == "jj":
        ic = params["ic"] if "ic" in params else ic_from_lj0(params["lj0"])
        return JosephsonJunction(name, tuple(nodes), ic, params.get("r_series", 0.0))
    raise NetlistError(f"unknown element type {kind!r}")


def netlist_from_dict(d: dict) -> Netlist:
    elements = [_element_from_json(e) for e in d["elements"]]
    ports = [Port(str(p["node"]), parse_quantity(p.get("z0_ohm", 50.0))) for p in d["ports"]]
    nodes = {str(n) for n in d.get("nodes", [])} | {GROUND}
    return validate(make_netlist(elements, ports, parse_quantity(d["design_frequency_hz"]), nodes))


def netlist_to_dict(netlist: Netlist) -> dict:
    kinds = {
        Resistor: ("resistor", {"r": "r"}),
        Capacitor: ("capacitor", {"c": "c"}),
        Inductor: ("inductor", {"l": "l"}),
        JosephsonJunction: ("jj", {"ic": "ic", "r_series": "r_series"}),
        TransmissionLine: ("tline", {"z0": "z0", "delay": "delay"}),
    }
    els = []
    for el in netlist.elements:
        kind, fields = kinds[type(el)]
        els.append({
            "type": kind,
            "name": el.name,
            "nodes": list(el.nodes),
            "params": {k: getattr(el, f) for k, f in fields.items()},
        })
    return {
        "design_frequency_hz": netlist.design_frequency,
        "nodes": sorted(netlist.nodes),
        "elements": els,
        "ports": [{"node": p.node, "z0_ohm": p.z0} for p in netlist.ports],
    }


BUILTIN = {"lorentz": reference_lorentz, "fano": reference_fano, "transmon": single_transmon}


def load_netlist(source: Union[str, Path], **overrides) -> Netlist:
    """Resolve a built-in name (``lorentz``, ``fano``, ``transmon``) or read a JSON file."""
    if str(source) in BUILTIN:
        return BUILTIN[str(source)](**overrides)
    if overrides:
        raise NetlistError("parameter overrides only apply to built-in circuits")
    with open(source, encoding="utf-8") as fh:
        return netlist_from_dict(json.load(fh))
