"""Brute-force time-domain reference for the harmonic-balance solver.

Trapezoidal integration of the nodal equations. Capacitors and inductors use
their trapezoidal companion models, lossless lines the method of
characteristics (delayed wave variables, exact when the delay is a whole
number of steps), and junctions the pair i = Ic sin(phi), dphi/dt = v/phi0,
solved each step by Newton on the junction voltages through a precomputed
Schur complement of the (constant) nodal matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .constants import PHI0_REDUCED
from .errors import DomainError, NonConvergentStep, NotSettled, StepSizeIncompatibleWithDelay
from .hb import HarmonicBasis, HBOptions, Spectrum, _expand, solve_hb, source_amplitude
from .linmap import node_order
from .netlist import GROUND, Capacitor, Inductor, Netlist, Resistor, TransmissionLine

STEADINESS_TOL = 1e-5


@dataclass(frozen=True)
class TransientConfig:
    dt: float | None = None  # None: 1/(400 f0), then adjusted to divide the line delay
    n_periods: int = 21000
    settle_periods: int = 20000
    line_model: str = "characteristics"
    ramp_periods: int = 0
    newton_tol: float = 1e-12


@dataclass
class Waveforms:
    """Samples of the recorded window; ``time`` is absolute."""

    time: np.ndarray
    node_voltages: dict
    junction_phases: dict
    dt: float
    f0: float
    total_steps: int
    source_voltage: float


@numba.njit(cache=True)
def _integrate(
    Minv, MinvB, Z, ja, jb, ic, g0, cphi,
    ca, cb, cg, la, lb, lg, ta, tb, tz, tnd, max_nd,
    src_node, src_amp, omega, dt, ramp_steps, nsteps, rec_start, tol,
    rec_v, rec_phi,
):
    n = Minv.shape[0]
    nj = ja.shape[0]
    nc = ca.shape[0]
    nl = la.shape[0]
    nt = ta.shape[0]
    v = np.zeros(n)
    phi = np.zeros(nj)
    vj = np.zeros(nj)
    icap = np.zeros(nc)
    iind = np.zeros(nl)
    wa = np.zeros((nt, max_nd))
    wb = np.zeros((nt, max_nd))
    b = np.zeros(n)
    alpha = np.zeros(nj)
    u = np.zeros(nj)
    cur = np.zeros(nj)
    hc = np.zeros(nc)
    hl = np.zeros(nl)
    ha = np.zeros(nt)
    hb = np.zeros(nt)
    for s in range(nsteps):
        t = (s + 1) * dt
        for i in range(n):
            b[i] = 0.0
        ramp = 1.0
        if s + 1 < ramp_steps:
            x = (s + 1) / ramp_steps
            ramp = x * x * (3.0 - 2.0 * x)
        if src_node >= 0:
            b[src_node] += src_amp * ramp * math.cos(omega * t)
        for k in range(nc):
            vab = (v[ca[k]] if ca[k] >= 0 else 0.0) - (v[cb[k]] if cb[k] >= 0 else 0.0)
            hc[k] = cg[k] * vab + icap[k]
            if ca[k] >= 0:
                b[ca[k]] += hc[k]
            if cb[k] >= 0:
                b[cb[k]] -= hc[k]
        for k in range(nl):
            vab = (v[la[k]] if la[k] >= 0 else 0.0) - (v[lb[k]] if lb[k] >= 0 else 0.0)
            hl[k] = iind[k] + lg[k] * vab
            if la[k] >= 0:
                b[la[k]] -= hl[k]
            if lb[k] >= 0:
                b[lb[k]] += hl[k]
        for k in range(nt):
            pos = s % tnd[k]
            ha[k] = wb[k, pos]
            hb[k] = wa[k, pos]
            if ta[k] >= 0:
                b[ta[k]] += ha[k]
            if tb[k] >= 0:
                b[tb[k]] += hb[k]
        v0 = Minv @ b
        for j in range(nj):
            alpha[j] = phi[j] + cphi * vj[j]
            u[j] = vj[j]
        # u0 = junction voltages of the linear solution
        u0 = np.zeros(nj)
        for j in range(nj):
            u0[j] = (v0[ja[j]] if ja[j] >= 0 else 0.0) - (v0[jb[j]] if jb[j] >= 0 else 0.0)
        converged = nj == 0
        for it in range(60):
            for j in range(nj):
                cur[j] = ic[j] * math.sin(alpha[j] + cphi * u[j]) - g0[j] * u[j]
            F = u - u0 + Z @ cur
            Jm = np.eye(nj)
            for j in range(nj):
                dj = ic[j] * cphi * math.cos(alpha[j] + cphi * u[j]) - g0[j]
                for i in range(nj):
                    Jm[i, j] += Z[i, j] * dj
            du = np.linalg.solve(Jm, -F)
            u = u + du
            small = True
            for j in range(nj):
                if abs(du[j]) > tol * (abs(u[j]) + 1e-30) and abs(du[j]) > 1e-300:
                    small = False
            if small:
                converged = True
                break
        if not converged:
            return s + 1
        for j in range(nj):
            cur[j] = ic[j] * math.sin(alpha[j] + cphi * u[j]) - g0[j] * u[j]
        v = v0 - MinvB @ cur
        for j in range(nj):
            phi[j] = alpha[j] + cphi * u[j]
            vj[j] = u[j]
        for k in range(nc):
            vab = (v[ca[k]] if ca[k] >= 0 else 0.0) - (v[cb[k]] if cb[k] >= 0 else 0.0)
            icap[k] = cg[k] * vab - hc[k]
        for k in range(nl):
            vab = (v[la[k]] if la[k] >= 0 else 0.0) - (v[lb[k]] if lb[k] >= 0 else 0.0)
            iind[k] = hl[k] + lg[k] * vab
        for k in range(nt):
            pos = s % tnd[k]
            va = v[ta[k]] if ta[k] >= 0 else 0.0
            vb = v[tb[k]] if tb[k] >= 0 else 0.0
            wa[k, pos] = 2.0 * va * tz[k] - ha[k]
            wb[k, pos] = 2.0 * vb * tz[k] - hb[k]
        if s >= rec_start:
            r = s - rec_start
            for i in range(n):
                rec_v[r, i] = v[i]
            for j in range(nj):
                rec_phi[r, j] = phi[j]
    return 0


def _step_size(netlist: Netlist, f0: float, config: TransientConfig) -> tuple[float, dict]:
    dt0 = config.dt if config.dt is not None else 1.0 / (400 * f0)
    lines = [el for el in netlist.elements if isinstance(el, TransmissionLine)]
    if lines and config.line_model != "characteristics":
        raise DomainError("lines present but line_model is 'none'")
    if not lines:
        dt = dt0
    else:
        steps = max(1, round(lines[0].delay / dt0))
        dt = lines[0].delay / steps
    nd = {}
    for ln in lines:
        k = ln.delay / dt
        if abs(k - round(k)) > 1e-6 * k or round(k) < 1:
            raise StepSizeIncompatibleWithDelay(
                f"line {ln.name!r} delay {ln.delay:.6g} s is not a multiple of dt {dt:.6g} s"
            )
        nd[ln.name] = int(round(k))
    if dt > 1.0 / (200 * f0) * (1 + 1e-9):
        raise StepSizeIncompatibleWithDelay(f"dt {dt:.4g} s exceeds 1/(200 f0)")
    return dt, nd


def transient_solve(netlist: Netlist, drive, config: TransientConfig = TransientConfig(),
                    record_periods: int | None = None) -> Waveforms:
    """Integrate from rest under ``drive`` (a :class:`~isosim.response.DriveSpec`).

    Records the final ``record_periods`` periods (default: everything after
    ``settle_periods``).
    """
    if not config.n_periods > config.settle_periods >= 10:
        raise DomainError("need n_periods > settle_periods >= 10")
    f0 = drive.f0
    dt, nd = _step_size(netlist, f0, config)
    linear, junctions, internal = _expand(netlist)
    index = node_order(netlist, internal)
    n = len(index)

    def ix(node):
        return -1 if node == GROUND else index[node]

    M = np.zeros((n, n))

    def add(a, b, g):
        for p, sp in ((a, 1.0), (b, -1.0)):
            if p < 0:
                continue
            M[p, p] += g
            q = b if p == a else a
            if q >= 0:
                M[p, q] -= g

    caps, inds, lines = [], [], []
    for el in linear:
        a, b = ix(el.nodes[0]), ix(el.nodes[1])
        if isinstance(el, Resistor):
            add(a, b, 1.0 / el.r)
        elif isinstance(el, Capacitor):
            g = 2 * el.c / dt
            add(a, b, g)
            caps.append((a, b, g))
        elif isinstance(el, Inductor):
            g = dt / (2 * el.l)
            add(a, b, g)
            inds.append((a, b, g))
        elif isinstance(el, TransmissionLine):
            for p in (a, b):
                if p >= 0:
                    M[p, p] += 1.0 / el.z0
            lines.append((a, b, 1.0 / el.z0, nd[el.name]))
    for p in netlist.ports:
        M[index[p.node], index[p.node]] += 1.0 / p.z0
    cphi = dt / (2 * PHI0_REDUCED)
    ja = np.array([ix(j.a) for j in junctions], dtype=np.int64)
    jb = np.array([ix(j.b) for j in junctions], dtype=np.int64)
    ic = np.array([j.ic for j in junctions], dtype=float)
    g0 = ic * cphi
    for a, b, g in zip(ja, jb, g0):
        add(a, b, g)
    Minv = np.linalg.inv(M)
    B = np.zeros((n, len(junctions)))
    for j, (a, b) in enumerate(zip(ja, jb)):
        if a >= 0:
            B[a, j] = 1.0
        if b >= 0:
            B[b, j] = -1.0
    MinvB = Minv @ B
    Z = B.T @ MinvB

    def arr(rows, col, dtype):
        return np.array([r[col] for r in rows], dtype=dtype)

    port = netlist.ports[drive.port - 1]
    vs = source_amplitude(drive.power_dbm, port.z0) if drive.power_dbm is not None else 0.0
    per = 1.0 / (f0 * dt)
    nsteps = int(round(config.n_periods * per))
    rec_periods = record_periods if record_periods is not None else config.n_periods - config.settle_periods
    rec_len = int(round(rec_periods * per))
    rec_start = nsteps - rec_len
    rec_v = np.zeros((rec_len, n))
    rec_phi = np.zeros((rec_len, len(junctions)))
    max_nd = max([ln[3] for ln in lines], default=1)
    status = _integrate(
        Minv, MinvB, Z, ja, jb, ic, g0, cphi,
        arr(caps, 0, np.int64), arr(caps, 1, np.int64), arr(caps, 2, float),
        arr(inds, 0, np.int64), arr(inds, 1, np.int64), arr(inds, 2, float),
        arr(lines, 0, np.int64), arr(lines, 1, np.int64), arr(lines, 2, float),
        arr(lines, 3, np.int64), max_nd,
        index[port.node], vs / port.z0, 2 * math.pi * f0, dt,
        int(round(config.ramp_periods * per)), nsteps, rec_start, config.newton_tol,
        rec_v, rec_phi,
    )
    if status:
        raise NonConvergentStep(f"junction Newton failed at step {status}")
    time = (np.arange(rec_start, nsteps) + 1) * dt
    return Waveforms(
        time=time,
        node_voltages={node: rec_v[:, i] for node, i in index.items()},
        junction_phases={j.name: rec_phi[:, k] for k, j in enumerate(junctions)},
        dt=dt,
        f0=f0,
        total_steps=nsteps,
        source_voltage=vs,
    )


def _fit(time, x, f0, K):
    w = 2 * math.pi * f0
    cols = [np.ones_like(time)]
    for k in range(1, K + 1):
        cols += [np.cos(k * w * time), -np.sin(k * w * time)]
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, x, rcond=None)
    c = np.empty(K + 1, dtype=complex)
    c[0] = coef[0]
    c[1:] = coef[1::2] + 1j * coef[2::2]
    return c


def steady_state_harmonics(w: Waveforms, f0: float, K: int = 8, check: bool = True) -> dict:
    """Harmonics 0..K of every recorded node voltage over a whole number of periods.

    Also returns the steadiness metric under the key ``"_steadiness"``:
    the largest relative change of a node's fundamental between the two
    halves of the window.
    """
    per = 1.0 / (f0 * w.dt)
    periods = int(len(w.time) / per)
    if periods < 2:
        raise DomainError("analysis window shorter than two periods")
    m = int(round(periods * per))
    t = w.time[-m:]
    half = int(round((periods // 2) * per))
    basis = HarmonicBasis(f0, K, _pow2(4 * (2 * K + 1)))
    out = {}
    worst = 0.0
    scale = max((np.max(np.abs(v[-m:])) for v in w.node_voltages.values()), default=0.0)
    for node, v in w.node_voltages.items():
        x = v[-m:]
        c = _fit(t, x, f0, K)
        out[node] = Spectrum(basis, c)
        if scale > 0:
            c1 = _fit(t[-2 * half:-half], x[-2 * half:-half], f0, 1)[1]
            c2 = _fit(t[-half:], x[-half:], f0, 1)[1]
            ref = max(abs(c[1]), 1e-3 * scale)
            worst = max(worst, abs(c2 - c1) / ref)
    if check and worst > STEADINESS_TOL:
        raise NotSettled(worst)
    out["_steadiness"] = worst
    return out


def _pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def transient_transmission(netlist: Netlist, drive, config: TransientConfig = TransientConfig(), K: int = 8):
    w = transient_solve(netlist, drive, config)
    h = steady_state_harmonics(w, drive.f0, K)
    other = netlist.ports[2 - drive.port].node
    return 2 * h[other][1] / w.source_voltage, h


def compare_hb_transient(netlist: Netlist, drive, config: TransientConfig = TransientConfig(),
                         hb_options: HBOptions = HBOptions()) -> dict:
    """Relative differences between harmonic-balance and transient steady states."""
    sol = solve_hb(netlist, drive.f0, drive.port - 1, drive.power_dbm, hb_options)
    w = transient_solve(netlist, drive, config)
    tr = steady_state_harmonics(w, drive.f0, hb_options.K)
    other = netlist.ports[2 - drive.port].node
    scale = max(abs(s[1]) for s in sol.node_spectra.values())
    per_harm = {}
    rel_fund = 0.0
    for node, spec in sol.node_spectra.items():
        d = np.abs(spec.coefficients - tr[node].coefficients)
        per_harm[node] = d / scale if scale > 0 else d
        if scale > 0:
            rel_fund = max(rel_fund, abs(spec[1] - tr[node][1]) / max(abs(spec[1]), 1e-3 * scale))
    t_hb = 2 * sol.node_spectra[other][1] / sol.source_voltage if sol.source_voltage else 0.0
    t_tr = 2 * tr[other][1] / w.source_voltage if w.source_voltage else 0.0
    t_rel = abs(abs(t_hb) - abs(t_tr)) / abs(t_hb) if abs(t_hb) > 0 else abs(t_tr)
    return {
        "rel_diff_fundamental": float(rel_fund),
        "per_harmonic_diffs": per_harm,
        "t_hb": complex(t_hb),
        "t_transient": complex(t_tr),
        "t_rel_diff": float(t_rel),
        "steadiness": tr["_steadiness"],
        "hb_iterations": sol.iterations,
    }
