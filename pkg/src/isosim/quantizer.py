"""Charge-basis quantization of one or two capacitively coupled transmons.

The Hamiltonian is H = 4 n^T E_C n - sum_i E_J,i cos(phi_i) with the
charging matrix E_C = (e^2/2) C^-1 and n_i the Cooper-pair number of island
i. In the charge basis cos(phi) is (shift-up + shift-down)/2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .constants import E_CHARGE, H_PLANCK, PHI0_REDUCED
from .errors import DomainError, MinimumOnBoundary, SingularCapacitanceMatrix
from .netlist import delay_from_detuning

N_MAX_LIMIT = 40
SWEEP_COLUMNS = ("lj_h", "f01_hz", "f02_hz", "gap_hz", "ej_over_ec", "nmax", "convergence_hz")
TRANSMON_REGIME = 20.0


@dataclass(frozen=True)
class TransmonSpec:
    ej: float  # J
    cq: float  # F

    def __post_init__(self):
        if not (self.ej > 0 and self.cq > 0):
            raise DomainError("E_J and C_Q must be positive")

    @classmethod
    def from_lj(cls, lj: float, cq: float) -> "TransmonSpec":
        return cls(ej_from_lj(lj), cq)


@dataclass(frozen=True)
class CoupledSystem:
    transmons: tuple
    c_matrix: np.ndarray
    n_max: int = 12

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.c_matrix, dtype=float))
        if c.shape != (len(self.transmons),) * 2:
            raise ValueError("capacitance matrix must be square over the islands")
        if not np.allclose(c, c.T, rtol=1e-12, atol=0):
            raise SingularCapacitanceMatrix("capacitance matrix is not symmetric")
        if self.n_max < 5:
            raise DomainError("charge truncation n_max must be at least 5")
        object.__setattr__(self, "transmons", tuple(self.transmons))
        object.__setattr__(self, "c_matrix", c)

    def with_nmax(self, n_max: int) -> "CoupledSystem":
        return CoupledSystem(self.transmons, self.c_matrix, n_max)

    def with_ej(self, index: int, ej: float) -> "CoupledSystem":
        t = list(self.transmons)
        t[index] = TransmonSpec(ej, t[index].cq)
        return CoupledSystem(tuple(t), self.c_matrix, self.n_max)


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    transition_frequencies: np.ndarray
    convergence_estimate: float


def ej_from_lj(lj: float) -> float:
    """Josephson energy (J) of a junction with inductance ``lj``: (hbar/2e)^2 / L_J."""
    if not lj > 0:
        raise DomainError("inductance must be positive")
    return PHI0_REDUCED**2 / lj


def anharmonic_shift(cq: float) -> float:
    """|eta| = e^2 / (2 hbar C_Q), in rad/s."""
    return E_CHARGE**2 / (2 * H_PLANCK / (2 * math.pi) * cq)


def maxwell_matrix(capacitors, nodes) -> np.ndarray:
    """Maxwell capacitance matrix over ``nodes`` from ``(a, b, C)`` triples (ground = "0")."""
    idx = {n: i for i, n in enumerate(nodes)}
    C = np.zeros((len(nodes), len(nodes)))
    for a, b, c in capacitors:
        ia, ib = idx.get(a), idx.get(b)
        if ia is not None:
            C[ia, ia] += c
        if ib is not None:
            C[ib, ib] += c
        if ia is not None and ib is not None:
            C[ia, ib] -= c
            C[ib, ia] -= c
    return C


def reduce_to_islands(C: np.ndarray, islands) -> np.ndarray:
    """Eliminate purely capacitive (charge-free) nodes; returns the island-only matrix."""
    inv = _inverse(C)
    sub = inv[np.ix_(islands, islands)]
    return _inverse(sub)


def _inverse(C: np.ndarray) -> np.ndarray:
    try:
        np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        raise SingularCapacitanceMatrix("capacitance matrix is not positive definite") from None
    return np.linalg.inv(C)


def charging_matrix(c_matrix) -> np.ndarray:
    """E_C = (e^2/2) C^-1 in joules."""
    C = np.atleast_2d(np.asarray(c_matrix, dtype=float))
    return 0.5 * E_CHARGE**2 * _inverse(C)


def build_hamiltonian(system: CoupledSystem) -> np.ndarray:
    """Dense Hermitian (real symmetric) Hamiltonian in joules on |n1, n2, ...>."""
    if system.n_max > N_MAX_LIMIT:
        raise DomainError(f"n_max above {N_MAX_LIMIT} is not supported")
    ec = charging_matrix(system.c_matrix)
    n = np.arange(-system.n_max, system.n_max + 1, dtype=float)
    d = len(n)
    eye = np.eye(d)
    shift = np.eye(d, k=1) + np.eye(d, k=-1)
    nq = len(system.transmons)

    def embed(op, i):
        mats = [eye] * nq
        mats[i] = op
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    number = [embed(np.diag(n), i) for i in range(nq)]
    H = np.zeros((d**nq, d**nq))
    for i, t in enumerate(system.transmons):
        H += 4 * ec[i, i] * embed(np.diag(n**2), i)
        H -= 0.5 * t.ej * embed(shift, i)
    for i, j in itertools.combinations(range(nq), 2):
        H += 8 * ec[i, j] * (number[i] @ number[j])
    return H


def lowest_levels(system: CoupledSystem, count: int = 3):
    H = build_hamiltonian(system)
    w, v = linalg.eigh(H, subset_by_index=[0, count - 1])
    return w, v


def transitions(system: CoupledSystem, count: int = 2) -> SpectrumResult:
    """First ``count`` transition frequencies (Hz) plus a truncation estimate."""
    w, _ = lowest_levels(system, count + 1)
    w2, _ = lowest_levels(system.with_nmax(system.n_max + 3), count + 1)
    trans = (w[1:] - w[0]) / H_PLANCK
    trans2 = (w2[1:] - w2[0]) / H_PLANCK
    conv = max(np.max(np.abs(w - w2)) / H_PLANCK, np.max(np.abs(trans - trans2)))
    return SpectrumResult(w, trans, float(conv))


def ej_ec_ratio(system: CoupledSystem, qubit_index: int) -> float:
    ec = charging_matrix(system.c_matrix)
    return system.transmons[qubit_index].ej / ec[qubit_index, qubit_index]


def transmon_regime(system: CoupledSystem) -> list[bool]:
    return [ej_ec_ratio(system, i) >= TRANSMON_REGIME for i in range(len(system.transmons))]


# --------------------------------------------------------------------------
# the isolator's two-qubit system


def line_capacitance(delta: float = 9e-2, f_design: float = 4.9e9, z0: float = 50.0) -> float:
    """Static capacitance (delay / Z0) of the inter-qubit line."""
    return delay_from_detuning(delta, f_design)["delay"] / z0


def isolator_system(
    lj1: float = 8e-9,
    lj2: float = 8e-9,
    c_q2: float = 63e-15,
    delta: float = 9e-2,
    c_d: float = 60e-15,
    c_coupler: float | None = None,
    n_max: int = 12,
) -> CoupledSystem:
    """Two transmons, each tied through ``c_d`` to a shared coupler node.

    The coupler node stands for the inter-qubit line and carries ``c_coupler``
    to ground (default: the line's static capacitance). It has no inductive
    element, so it is eliminated before quantization.
    """
    c_q1 = c_q2 * (1 + delta)
    if c_coupler is None:
        c_coupler = line_capacitance(delta)
    caps = [("q1", "0", c_q1), ("q2", "0", c_q2), ("q1", "m", c_d), ("q2", "m", c_d)]
    if c_coupler > 0:
        caps.append(("m", "0", c_coupler))
    C = reduce_to_islands(maxwell_matrix(caps, ["q1", "q2", "m"]), [0, 1])
    return CoupledSystem(
        (TransmonSpec.from_lj(lj1, c_q1), TransmonSpec.from_lj(lj2, c_q2)), C, n_max
    )


def bridged_system(lj1=8e-9, lj2=8e-9, c_q1=68.67e-15, c_q2=63e-15, c_d=60e-15, n_max=12):
    """Two islands joined directly by ``c_d`` (no line)."""
    C = maxwell_matrix([("q1", "0", c_q1), ("q2", "0", c_q2), ("q1", "q2", c_d)], ["q1", "q2"])
    return CoupledSystem(
        (TransmonSpec.from_lj(lj1, c_q1), TransmonSpec.from_lj(lj2, c_q2)), C, n_max
    )


def sweep_lj(system_template: CoupledSystem, lj_values, fixed_lj2: float | None = None) -> dict:
    """Vary qubit 1's inductance; returns column arrays of the branch table."""
    system = system_template
    if fixed_lj2 is not None:
        system = system.with_ej(1, ej_from_lj(fixed_lj2))
    lj = np.asarray(lj_values, dtype=float)
    if np.any(lj <= 0):
        raise DomainError("inductances must be positive")
    f01 = np.empty(len(lj))
    f02 = np.empty(len(lj))
    conv = np.empty(len(lj))
    ratio = np.empty(len(lj))
    for i, value in enumerate(lj):
        s = system.with_ej(0, ej_from_lj(value))
        res = transitions(s)
        f01[i], f02[i] = res.transition_frequencies
        conv[i] = res.convergence_estimate
        ratio[i] = ej_ec_ratio(s, 0)
    return {
        "lj_h": lj,
        "f01_hz": f01,
        "f02_hz": f02,
        "gap_hz": f02 - f01,
        "ej_over_ec": ratio,
        "nmax": np.full(len(lj), system.n_max),
        "convergence_hz": conv,
    }


def find_avoided_crossing(branch_table: dict) -> dict:
    """Parabolic refinement of the smallest branch separation."""
    lj = np.asarray(branch_table["lj_h"], dtype=float)
    gap = np.asarray(branch_table["f02_hz"], dtype=float) - np.asarray(branch_table["f01_hz"], dtype=float)
    if len(lj) < 5:
        raise ValueError("need at least 5 sweep points")
    i = int(np.argmin(gap))
    if i == 0 or i == len(lj) - 1:
        raise MinimumOnBoundary(f"smallest gap at sweep endpoint L_J = {lj[i]:.4g} H")
    x = lj[i - 1:i + 2]
    y = gap[i - 1:i + 2]
    a, b, c = np.polyfit(x, y, 2)
    if a <= 0:
        return {"lj_star": float(lj[i]), "gap": float(gap[i])}
    x_star = -b / (2 * a)
    x_star = min(max(x_star, x[0]), x[2])
    return {"lj_star": float(x_star), "gap": float(np.polyval([a, b, c], x_star))}


def parity_expectations(system: CoupledSystem, count: int = 5) -> np.ndarray:
    """<psi|P|psi> for the lowest states under n -> -n on every island."""
    _, v = lowest_levels(system, count)
    d = 2 * system.n_max + 1
    p1 = np.fliplr(np.eye(d))
    P = p1
    for _ in range(len(system.transmons) - 1):
        P = np.kron(P, p1)
    return np.einsum("ij,ik,kj->j", v, P, v)
