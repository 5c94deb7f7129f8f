"""Nodal admittance assembly and small-signal AC analysis.

Phasors use the peak-amplitude convention: v(t) = Re(V exp(j w t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LineSingularity, SingularMatrix
from .netlist import (
    GROUND,
    Capacitor,
    Inductor,
    JosephsonJunction,
    Netlist,
    Resistor,
    TransmissionLine,
)

LINE_SINGULARITY_EPS = 1e-9

JUNCTION_TREATMENTS = ("linearized_at_zero", "omitted")


@dataclass(frozen=True)
class AdmittanceMatrix:
    frequency: float
    matrix: np.ndarray
    node_index: dict


@dataclass(frozen=True)
class AcSolution:
    frequency: float
    node_voltages: dict
    driven_port: int
    residual: float


def node_order(netlist: Netlist, extra=()) -> dict:
    """Deterministic row index for every non-ground node (order of first appearance)."""
    seen = {}
    for p in netlist.ports:
        seen.setdefault(p.node, len(seen))
    for el in netlist.elements:
        for n in el.nodes:
            if n != GROUND:
                seen.setdefault(n, len(seen))
    for n in sorted(netlist.nodes):
        if n != GROUND:
            seen.setdefault(n, len(seen))
    for n in extra:
        seen.setdefault(n, len(seen))
    return seen


def _add2(Y, index, a, b, y):
    ia = index.get(a) if a != GROUND else None
    ib = index.get(b) if b != GROUND else None
    if ia is not None:
        Y[ia, ia] += y
    if ib is not None:
        Y[ib, ib] += y
    if ia is not None and ib is not None:
        Y[ia, ib] -= y
        Y[ib, ia] -= y


def line_stamp(line: TransmissionLine, f: float) -> tuple[complex, complex]:
    """Return (Y11, Y12) of a lossless line at frequency ``f``."""
    theta = 2 * math.pi * f * line.delay
    s = math.sin(theta)
    if abs(s) < LINE_SINGULARITY_EPS:
        raise LineSingularity(line.name, theta)
    y11 = -1j * (math.cos(theta) / s) / line.z0
    y12 = 1j / (line.z0 * s)
    return y11, y12


def element_admittance(el, f: float) -> complex:
    """Branch admittance of a two-terminal element (junctions linearized at zero current)."""
    w = 2 * math.pi * f
    if isinstance(el, Resistor):
        return 1.0 / el.r
    if isinstance(el, Capacitor):
        return 1j * w * el.c
    if isinstance(el, Inductor):
        if w == 0:
            raise DomainError(f"inductor {el.name!r} has no admittance at DC")
        return 1.0 / (1j * w * el.l)
    if isinstance(el, JosephsonJunction):
        if w == 0 and el.r_series == 0:
            raise DomainError(f"junction {el.name!r} has no admittance at DC")
        return 1.0 / (el.r_series + 1j * w * el.lj0)
    raise TypeError(f"not a two-terminal element: {el!r}")


def stamp_elements(elements, index: dict, f: float) -> np.ndarray:
    Y = np.zeros((len(index), len(index)), dtype=complex)
    for el in elements:
        if isinstance(el, TransmissionLine):
            y11, y12 = line_stamp(el, f)
            a, b = el.nodes
            for n, m in ((a, b), (b, a)):
                if n == GROUND:
                    continue
                Y[index[n], index[n]] += y11
                if m != GROUND:
                    Y[index[n], index[m]] += y12
        else:
            _add2(Y, index, *el.nodes, element_admittance(el, f))
    return Y


def stamp(
    netlist: Netlist,
    f: float,
    junction_treatment: str = "linearized_at_zero",
    terminated: bool = False,
) -> AdmittanceMatrix:
    """Nodal admittance matrix of ``netlist`` at ``f``.

    With ``terminated`` the port reference conductances 1/z0 are added.
    """
    if junction_treatment not in JUNCTION_TREATMENTS:
        raise ValueError(f"junction_treatment must be one of {JUNCTION_TREATMENTS}")
    if f < 0:
        raise DomainError("frequency must be non-negative")
    els = netlist.elements
    if junction_treatment == "omitted":
        els = [el for el in els if not isinstance(el, JosephsonJunction)]
    index = node_order(netlist)
    Y = stamp_elements(els, index, f)
    if terminated:
        for p in netlist.ports:
            Y[index[p.node], index[p.node]] += 1.0 / p.z0
    return AdmittanceMatrix(f, Y, index)


def _solve(Y: np.ndarray, J: np.ndarray) -> np.ndarray:
    try:
        V = np.linalg.solve(Y, J)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from None
    if not np.all(np.isfinite(V)):
        raise SingularMatrix("non-finite node voltages")
    return V


def ac_solve(
    netlist: Netlist,
    f: float,
    driven_port: int = 0,
    source_amplitude: float = 1.0,
    junction_treatment: str = "linearized_at_zero",
) -> AcSolution:
    """Node voltages with a Thevenin source (peak ``source_amplitude``) behind port ``driven_port``."""
    if not f > 0:
        raise DomainError("AC analysis needs f > 0")
    adm = stamp(netlist, f, junction_treatment, terminated=True)
    port = netlist.ports[driven_port]
    J = np.zeros(len(adm.node_index), dtype=complex)
    J[adm.node_index[port.node]] = source_amplitude / port.z0
    V = _solve(adm.matrix, J)
    scale = np.linalg.norm(J)
    res = np.linalg.norm(adm.matrix @ V - J) / scale if scale else 0.0
    return AcSolution(f, {n: V[i] for n, i in adm.node_index.items()}, driven_port, float(res))


def port_waves(netlist: Netlist, node_voltages: dict, driven_port: int, vs: complex) -> dict:
    """Transmission and reflection referred to the driven port's incident wave."""
    src = netlist.ports[driven_port]
    other = netlist.ports[1 - driven_port]
    a_in = vs / (2 * math.sqrt(src.z0))
    v_in = node_voltages[src.node]
    b_back = (2 * v_in - vs) / (2 * math.sqrt(src.z0))
    b_out = node_voltages[other.node] / math.sqrt(other.z0)
    return {"t": b_out / a_in, "r": b_back / a_in}


def small_signal_sparams(netlist: Netlist, f: float, junction_treatment="linearized_at_zero") -> dict:
    fwd = ac_solve(netlist, f, 0, 1.0, junction_treatment)
    bwd = ac_solve(netlist, f, 1, 1.0, junction_treatment)
    w1 = port_waves(netlist, fwd.node_voltages, 0, 1.0)
    w2 = port_waves(netlist, bwd.node_voltages, 1, 1.0)
    return {"t21": w1["t"], "r11": w1["r"], "t12": w2["t"], "r22": w2["r"]}


def transmission_sweep(netlist: Netlist, freqs, junction_treatment="linearized_at_zero") -> np.ndarray:
    """Small-signal t21 over ``freqs``; points on a line singularity are nudged by 1 ppb."""
    out = np.empty(len(freqs), dtype=complex)
    for i, f in enumerate(freqs):
        try:
            out[i] = small_signal_sparams(netlist, f, junction_treatment)["t21"]
        except LineSingularity:
            out[i] = small_signal_sparams(netlist, f * (1 + 1e-9), junction_treatment)["t21"]
    return out
