"""Single-tone harmonic balance for circuits with Josephson junctions.

Unknowns are the node-voltage harmonics 0..K of every non-ground node (real
and imaginary parts stacked), one DC branch current per inductor or line
(both are shorts at DC) and one DC phase per junction. A junction is a
current source ``Ic sin(phi)`` whose phase is the time integral of its
voltage divided by hbar/2e; the DC phase is a separate unknown fixed by the
condition that a periodic phase carries no DC voltage.

Residual and Jacobian are in scaled units (volts / ``v_scale``, amperes /
row scale) so that sub-microvolt drives keep a meaningful tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import PHI0_REDUCED
from .errors import DomainError, NoConvergence
from .linmap import ac_solve, node_order, stamp_elements
from .netlist import (
    GROUND,
    Inductor,
    JosephsonJunction,
    Netlist,
    Resistor,
    TransmissionLine,
)


def dbm_to_watt(power_dbm: float) -> float:
    return 10 ** ((power_dbm - 30) / 10)


def source_amplitude(power_dbm: float, z0: float = 50.0) -> float:
    """Peak Thevenin voltage delivering ``power_dbm`` into a matched ``z0`` load."""
    return math.sqrt(8 * z0 * dbm_to_watt(power_dbm))


# --------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class HarmonicBasis:
    f0: float
    K: int = 8
    N: int = 128

    def __post_init__(self):
        if not self.f0 > 0:
            raise DomainError("fundamental frequency must be positive")
        if self.K < 3:
            raise DomainError("need at least 3 harmonics")
        if self.N < 4 * (2 * self.K + 1) or self.N & (self.N - 1):
            raise DomainError(f"N={self.N} must be a power of two >= {4 * (2 * self.K + 1)}")

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.f0

    @property
    def size(self) -> int:
        """Real coefficients per stacked spectrum: DC plus Re/Im per harmonic."""
        return 2 * self.K + 1

    def times(self) -> np.ndarray:
        return np.arange(self.N) / (self.N * self.f0)

    def synthesis(self) -> np.ndarray:
        """(N, 2K+1) matrix taking stacked coefficients to time samples."""
        th = 2 * math.pi * np.arange(self.N) / self.N
        S = np.empty((self.N, self.size))
        S[:, 0] = 1.0
        for k in range(1, self.K + 1):
            S[:, 2 * k - 1] = np.cos(k * th)
            S[:, 2 * k] = -np.sin(k * th)
        return S

    def analysis(self) -> np.ndarray:
        """(2K+1, N) matrix taking samples to stacked coefficients (truncated DFT)."""
        th = 2 * math.pi * np.arange(self.N) / self.N
        A = np.empty((self.size, self.N))
        A[0] = 1.0 / self.N
        for k in range(1, self.K + 1):
            A[2 * k - 1] = 2.0 / self.N * np.cos(k * th)
            A[2 * k] = -2.0 / self.N * np.sin(k * th)
        return A


def stack(coefficients: np.ndarray) -> np.ndarray:
    c = np.asarray(coefficients, dtype=complex)
    out = np.empty(2 * len(c) - 1)
    out[0] = c[0].real
    out[1::2] = c[1:].real
    out[2::2] = c[1:].imag
    return out


def unstack(x: np.ndarray) -> np.ndarray:
    c = np.empty((len(x) + 1) // 2, dtype=complex)
    c[0] = x[0]
    c[1:] = x[1::2] + 1j * x[2::2]
    return c


@dataclass(frozen=True)
class Spectrum:
    """x(t) = Re sum_k X_k exp(j k w0 t), k = 0..K."""

    basis: HarmonicBasis
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex).copy()
        if c.shape != (self.basis.K + 1,):
            raise ValueError(f"expected {self.basis.K + 1} coefficients, got {c.shape}")
        c[0] = c[0].real
        object.__setattr__(self, "coefficients", c)

    def __getitem__(self, k):
        return self.coefficients[k]

    def samples(self) -> np.ndarray:
        return self.basis.synthesis() @ stack(self.coefficients)

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.arange(self.basis.K + 1)
        ph = np.exp(1j * self.basis.omega * np.multiply.outer(t, k))
        return (ph @ self.coefficients).real

    @classmethod
    def from_samples(cls, basis: HarmonicBasis, samples) -> "Spectrum":
        return cls(basis, unstack(basis.analysis() @ np.asarray(samples, dtype=float)))


def phase_from_voltage(v: Spectrum, phi_dc: float) -> Spectrum:
    """Junction phase whose derivative is v / (hbar/2e), with DC value ``phi_dc``."""
    k = np.arange(1, v.basis.K + 1)
    phi = np.empty(v.basis.K + 1, dtype=complex)
    phi[0] = phi_dc
    phi[1:] = v.coefficients[1:] / (1j * k * v.basis.omega * PHI0_REDUCED)
    return Spectrum(v.basis, phi)


def junction_current(phase: Spectrum, ic: float) -> Spectrum:
    """Harmonics 0..K of ``ic * sin(phi(t))`` from N time samples."""
    return Spectrum.from_samples(phase.basis, ic * np.sin(phase.samples()))


# --------------------------------------------------------------------------
# problem assembly


@dataclass(frozen=True)
class HBOptions:
    K: int = 8
    N: int = 128
    tol: float = 1e-9
    max_iter: int = 50
    continuation_db: float = 40.0
    step_db: float = 2.0
    min_step_db: float = 0.125
    v_scale: float = 1e-6
    i_scale: float = 1e-9
    check_bistability: bool = False
    max_folds: int = 4


@dataclass
class _Junction:
    name: str
    a: str
    b: str
    ic: float


class HBProblem:
    """Compiled harmonic-balance system for one netlist and one fundamental."""

    def __init__(self, netlist: Netlist, basis: HarmonicBasis, options: HBOptions = HBOptions()):
        self.netlist = netlist
        self.basis = basis
        self.options = options
        linear, self.junctions, internal = _expand(netlist)
        self.linear = linear
        self.index = node_order(netlist, internal)
        self.nodes = list(self.index)
        n = self.n = len(self.index)
        self.shorts = [el for el in linear if isinstance(el, (Inductor, TransmissionLine))]
        m = self.m = len(self.shorts)
        K = basis.K
        self.size = n + m + 2 * n * K + len(self.junctions)
        self._S = basis.synthesis()
        self._A = basis.analysis()
        self._build_linear()
        self._junction_maps()

    # layout -------------------------------------------------------------
    def _vidx(self, node: str) -> np.ndarray:
        """Stacked real unknown indices [DC, Re1, Im1, ...] of a node (-1 for ground)."""
        K, n, m = self.basis.K, self.n, self.m
        if node == GROUND:
            return -np.ones(2 * K + 1, dtype=int)
        i = self.index[node]
        out = [i]
        for k in range(1, K + 1):
            base = n + m + 2 * n * (k - 1)
            out += [base + i, base + n + i]
        return np.array(out)

    def phi_index(self, j: int) -> int:
        return self.n + self.m + 2 * self.n * self.basis.K + j

    def harmonic_slices(self, k: int) -> tuple[slice, slice]:
        base = self.n + self.m + 2 * self.n * (k - 1)
        return slice(base, base + self.n), slice(base + self.n, base + 2 * self.n)

    # linear part ----------------------------------------------------------
    def _build_linear(self):
        n, m, K = self.n, self.m, self.basis.K
        G = np.zeros((self.size, self.size))
        row_scale = np.empty(self.size)
        col_scale = np.empty(self.size)
        o = self.options

        # DC: conductances from resistors; shorts via branch currents
        G0 = np.zeros((n, n))
        for el in self.linear:
            if isinstance(el, Resistor):
                _add_real(G0, self.index, *el.nodes, 1.0 / el.r)
        for p in self.netlist.ports:
            G0[self.index[p.node], self.index[p.node]] += 1.0 / p.z0
        G[:n, :n] = G0
        for s, el in enumerate(self.shorts):
            a, b = el.nodes
            r = n + s
            for node, sign in ((a, 1.0), (b, -1.0)):
                if node != GROUND:
                    G[self.index[node], r] += sign
                    G[r, self.index[node]] += sign
        row_scale[:n] = np.maximum(np.abs(G0).max(axis=1) * o.v_scale, o.i_scale)
        row_scale[n:n + m] = o.v_scale
        col_scale[:n] = o.v_scale
        col_scale[n:n + m] = o.i_scale

        self.Yk = []
        for k in range(1, K + 1):
            Y = stamp_elements(self.linear, self.index, k * self.basis.f0)
            for p in self.netlist.ports:
                Y[self.index[p.node], self.index[p.node]] += 1.0 / p.z0
            self.Yk.append(Y)
            re, im = self.harmonic_slices(k)
            G[re, re] = Y.real
            G[re, im] = -Y.imag
            G[im, re] = Y.imag
            G[im, im] = Y.real
            rs = np.maximum(np.abs(Y).max(axis=1) * o.v_scale, o.i_scale)
            row_scale[re] = rs
            row_scale[im] = rs
            col_scale[re] = o.v_scale
            col_scale[im] = o.v_scale
        for j in range(len(self.junctions)):
            row_scale[self.phi_index(j)] = o.v_scale
            col_scale[self.phi_index(j)] = 1.0
        self.G = G
        self.row_scale = row_scale
        self.col_scale = col_scale

    def _junction_maps(self):
        K = self.basis.K
        w = self.basis.omega
        P = np.zeros((2 * K + 1, 2 * K + 1))
        for k in range(1, K + 1):
            c = 1.0 / (k * w * PHI0_REDUCED)
            P[2 * k - 1, 2 * k] = c
            P[2 * k, 2 * k - 1] = -c
        self._P = P
        self._jidx = [(self._vidx(jj.a), self._vidx(jj.b)) for jj in self.junctions]

    # evaluation -----------------------------------------------------------
    def source_vector(self, driven_port: int, vs: float) -> np.ndarray:
        J = np.zeros(self.size)
        port = self.netlist.ports[driven_port]
        re, _ = self.harmonic_slices(1)
        J[re.start + self.index[port.node]] = vs / port.z0
        return J

    def junction_voltage(self, X: np.ndarray, j: int) -> np.ndarray:
        ia, ib = self._jidx[j]
        v = np.zeros(2 * self.basis.K + 1)
        if ia[0] >= 0:
            v += X[ia]
        if ib[0] >= 0:
            v -= X[ib]
        return v

    def junction_phase(self, X: np.ndarray, j: int) -> np.ndarray:
        phi = self._P @ self.junction_voltage(X, j)
        phi[0] = X[self.phi_index(j)]
        return phi

    def residual_unscaled(self, X: np.ndarray, J: np.ndarray) -> np.ndarray:
        F = self.G @ X - J
        for j, jj in enumerate(self.junctions):
            phi_t = self._S @ self.junction_phase(X, j)
            I = self._A @ (jj.ic * np.sin(phi_t))
            ia, ib = self._jidx[j]
            if ia[0] >= 0:
                F[ia] += I
            if ib[0] >= 0:
                F[ib] -= I
            v = self.junction_voltage(X, j)
            F[self.phi_index(j)] = v[0]
        return F

    def jacobian_unscaled(self, X: np.ndarray) -> np.ndarray:
        Jm = self.G.copy()
        for j, jj in enumerate(self.junctions):
            phi_t = self._S @ self.junction_phase(X, j)
            D = self._A @ ((jj.ic * np.cos(phi_t))[:, None] * self._S)
            dIdv = D @ self._P
            dIdphi = D[:, 0]
            ia, ib = self._jidx[j]
            pj = self.phi_index(j)
            for rows, sr in ((ia, 1.0), (ib, -1.0)):
                if rows[0] < 0:
                    continue
                Jm[rows, pj] += sr * dIdphi
                for cols, sc in ((ia, 1.0), (ib, -1.0)):
                    if cols[0] >= 0:
                        Jm[np.ix_(rows, cols)] += sr * sc * dIdv
            if ia[0] >= 0:
                Jm[pj, ia[0]] += 1.0
            if ib[0] >= 0:
                Jm[pj, ib[0]] -= 1.0
        return Jm

    def residual(self, x: np.ndarray, J: np.ndarray) -> np.ndarray:
        """Scaled residual at scaled unknowns ``x``."""
        return self.residual_unscaled(x * self.col_scale, J) / self.row_scale

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        Jm = self.jacobian_unscaled(x * self.col_scale)
        return Jm * self.col_scale[None, :] / self.row_scale[:, None]

    # conversions ----------------------------------------------------------
    def node_spectra(self, X: np.ndarray) -> dict:
        return {node: Spectrum(self.basis, unstack(X[self._vidx(node)])) for node in self.nodes}

    def from_phasors(self, phasors: dict, harmonic: int = 1) -> np.ndarray:
        """Unscaled unknown vector with the given node phasors at one harmonic."""
        X = np.zeros(self.size)
        re, im = self.harmonic_slices(harmonic)
        for node, v in phasors.items():
            if node in self.index:
                X[re.start + self.index[node]] = v.real
                X[im.start + self.index[node]] = v.imag
        return X


def _add_real(G, index, a, b, g):
    ia = index.get(a) if a != GROUND else None
    ib = index.get(b) if b != GROUND else None
    if ia is not None:
        G[ia, ia] += g
    if ib is not None:
        G[ib, ib] += g
    if ia is not None and ib is not None:
        G[ia, ib] -= g
        G[ib, ia] -= g


def _expand(netlist: Netlist):
    """Split junctions with series loss into resistor + bare junction via an internal node.

    Internal node names match :meth:`Netlist.linearized` so AC solutions map across.
    """
    linear, junctions, internal = [], [], []
    for el in netlist.elements:
        if not isinstance(el, JosephsonJunction):
            linear.append(el)
            continue
        a, b = el.nodes
        if el.r_series > 0:
            mid = f"{el.name}:int"
            internal.append(mid)
            linear.append(Resistor(f"{el.name}:rj", (a, mid), el.r_series))
            junctions.append(_Junction(el.name, mid, b, el.ic))
        else:
            junctions.append(_Junction(el.name, a, b, el.ic))
    return linear, junctions, internal


# --------------------------------------------------------------------------
# public functional API


def _problem(netlist, basis, options=None) -> HBProblem:
    return HBProblem(netlist, basis, options or HBOptions(K=basis.K, N=basis.N))


def assemble_residual(netlist: Netlist, basis: HarmonicBasis, drive: tuple, unknowns, options=None):
    """Scaled residual; ``drive`` is ``(driven_port, peak_source_volts)``."""
    prob = _problem(netlist, basis, options)
    return prob.residual(np.asarray(unknowns, dtype=float), prob.source_vector(*drive))


def jacobian(netlist: Netlist, basis: HarmonicBasis, unknowns, options=None) -> np.ndarray:
    prob = _problem(netlist, basis, options)
    return prob.jacobian(np.asarray(unknowns, dtype=float))


def jacobian_fd_error(prob: HBProblem, x: np.ndarray, J: np.ndarray, h: float = 1e-5) -> float:
    """Relative max-norm gap between the analytic and a central-difference Jacobian."""
    Ja = prob.jacobian(x)
    Jf = np.empty_like(Ja)
    for i in range(len(x)):
        step = h * max(1.0, abs(x[i]))
        e = np.zeros(len(x))
        e[i] = step
        Jf[:, i] = (prob.residual(x + e, J) - prob.residual(x - e, J)) / (2 * step)
    return float(np.max(np.abs(Ja - Jf)) / np.max(np.abs(Ja)))


# --------------------------------------------------------------------------
# solver


@dataclass
class HBSolution:
    basis: HarmonicBasis
    node_spectra: dict
    junction_phase_spectra: dict
    phi_dc: dict
    iterations: int
    residual_norm: float
    continuation_trace: list
    driven_port: int
    power_dbm: float
    source_voltage: float
    x: np.ndarray = field(repr=False, default=None)
    diagnostics: dict = field(default_factory=dict)

    def fundamental(self, node: str) -> complex:
        return complex(self.node_spectra[node][1])


def newton(prob: HBProblem, x0: np.ndarray, J: np.ndarray, tol: float, max_iter: int):
    """Damped Newton with backtracking on the scaled residual max-norm.

    Returns ``(x, iterations, residual_norm, converged)``.
    """
    x = x0.copy()
    F = prob.residual(x, J)
    r = np.max(np.abs(F))
    for it in range(max_iter):
        if r < tol:
            return x, it, r, True
        Jm = prob.jacobian(x)
        try:
            dx = np.linalg.solve(Jm, -F)
        except np.linalg.LinAlgError:
            return x, it, r, False
        lam = 1.0
        while True:
            x_new = x + lam * dx
            F_new = prob.residual(x_new, J)
            r_new = np.max(np.abs(F_new))
            if r_new < (1 - 1e-4 * lam) * r or lam < 1e-4:
                break
            lam *= 0.5
        if not np.isfinite(r_new) or r_new >= r:
            # no descent along the Newton direction: a turning point or a bad guess
            return x, it + 1, r, False
        x, F, r = x_new, F_new, r_new
    return x, max_iter, r, r < tol


def _linear_guess(prob: HBProblem, driven_port: int, vs: float) -> np.ndarray:
    sol = ac_solve(prob.netlist.linearized(), prob.basis.f0, driven_port, vs)
    return prob.from_phasors(sol.node_voltages) / prob.col_scale


def _scale_voltages(prob: HBProblem, x: np.ndarray, ratio: float) -> np.ndarray:
    y = x * ratio
    for j in range(len(prob.junctions)):
        y[prob.phi_index(j)] = x[prob.phi_index(j)]
    return y


def _check_branch(prob: HBProblem, x: np.ndarray) -> bool:
    return all(abs(x[prob.phi_index(j)]) < math.pi / 2 for j in range(len(prob.junctions)))


def solve_hb(
    netlist: Netlist,
    f0: float,
    driven_port: int,
    power_dbm: float,
    options: HBOptions = HBOptions(),
    problem: HBProblem | None = None,
    x_start: np.ndarray | None = None,
    start_power_dbm: float | None = None,
) -> HBSolution:
    """Periodic steady state under a CW drive of ``power_dbm`` available power.

    Power continuation starts ``options.continuation_db`` below the target
    (or at ``start_power_dbm`` from ``x_start``) in ``options.step_db``
    increments, halving the step on failure down to ``options.min_step_db``.
    """
    if not math.isfinite(power_dbm):
        raise DomainError("power must be finite")
    prob = problem or HBProblem(netlist, HarmonicBasis(f0, options.K, options.N), options)
    z0 = netlist.ports[driven_port].z0

    if x_start is None:
        p_try = power_dbm - options.continuation_db
        guess = _linear_guess(prob, driven_port, source_amplitude(p_try, z0))
    else:
        p_try = start_power_dbm
        guess = x_start.copy()
    trace = []
    history = []
    total = 0
    step = options.step_db
    x_conv = p_conv = None
    folds = 0
    while True:
        vs = source_amplitude(p_try, z0)
        x_new, it, r, ok = newton(prob, guess, prob.source_vector(driven_port, vs), options.tol, options.max_iter)
        total += it
        if ok and _check_branch(prob, x_new):
            trace.append((p_try, it))
            history.append((p_try, x_new))
            x_conv, p_conv, r_conv = x_new, p_try, r
            if p_conv >= power_dbm:
                break
            step = min(2 * step, options.step_db)
        elif x_conv is None:
            raise NoConvergence("harmonic balance did not converge", r, p_conv)
        elif step / 2 >= options.min_step_db:
            step /= 2
        elif len(history) >= 2 and folds < options.max_folds:
            # natural continuation stalls at a turning point; follow the arc past it
            folds += 1
            p_conv, x_conv, r_conv, it = _pass_fold(prob, history[-2], history[-1], power_dbm, driven_port, z0)
            total += it
            trace.append((p_conv, it))
            history.append((p_conv, x_conv))
            if p_conv >= power_dbm:
                break
            step = options.step_db
        else:
            raise NoConvergence("harmonic balance did not converge", r, p_conv)
        p_try = min(p_conv + step, power_dbm)
        guess = _scale_voltages(prob, x_conv, 10 ** ((p_try - p_conv) / 20))

    sol = _package(prob, x_conv, total, r_conv, trace, driven_port, power_dbm)
    sol.diagnostics["folds"] = folds
    if options.check_bistability:
        cold = _linear_guess(prob, driven_port, sol.source_voltage)
        xc, _, _, ok = newton(prob, cold, prob.source_vector(driven_port, sol.source_voltage),
                              options.tol, options.max_iter)
        other = prob.node_spectra(xc * prob.col_scale) if ok else None
        sol.diagnostics["cold_start_converged"] = bool(ok)
        if ok:
            node = netlist.ports[1 - driven_port].node
            a = abs(sol.node_spectra[node][1])
            b = abs(other[node][1])
            sol.diagnostics["cold_start_fundamental"] = b
            sol.diagnostics["bistable"] = bool(abs(a - b) > 1e-6 * max(a, b, 1e-30))
    return sol


def _augmented(prob, x, p, driven_port, z0):
    J = prob.source_vector(driven_port, source_amplitude(p, z0))
    F = prob.residual(x, J)
    dFdp = -(J / prob.row_scale) * (math.log(10) / 20)
    return F, dFdp


def _pass_fold(prob: HBProblem, prev, last, p_target, driven_port, z0, max_steps=4000):
    """Pseudo-arclength continuation in (x, power_dB) from two converged points.

    Follows the solution curve through turning points until it next rises past
    ``p_target`` or rises again past the last natural-continuation power by a
    full step; returns ``(p, x, residual, iterations)`` of a converged point.
    """
    o = prob.options
    (p1, x1), (p2, x2) = prev, last
    y_prev = np.append(x1, p1)
    y = np.append(x2, p2)
    t = y - y_prev
    ds = np.linalg.norm(t)
    t /= ds
    ds_min = ds * 1e-6
    ds_max = ds * 50
    total = 0
    turned = False
    for _ in range(max_steps):
        y_pred = y + ds * t
        yc = y_pred.copy()
        ok = False
        for it in range(12):
            F, dFdp = _augmented(prob, yc[:-1], yc[-1], driven_port, z0)
            g = np.append(F, t @ (yc - y) - ds)
            if np.max(np.abs(F)) < o.tol and abs(g[-1]) < 1e-9 * max(ds, 1.0):
                ok = True
                break
            A = np.empty((len(yc), len(yc)))
            A[:-1, :-1] = prob.jacobian(yc[:-1])
            A[:-1, -1] = dFdp
            A[-1] = t
            try:
                yc = yc - np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(yc)) or abs(yc[-1] - p2) > 60:
                break
        total += it + 1
        if not ok or not _check_branch(prob, yc[:-1]):
            ds /= 2
            if ds < ds_min:
                raise NoConvergence("arclength continuation failed near a turning point",
                                    float("nan"), float(y[-1]))
            continue
        t_new = yc - y
        t_new /= np.linalg.norm(t_new)
        if t_new[-1] < 0:
            turned = True
        y_last, y, t = y, yc, t_new
        if it < 4:
            ds = min(ds * 1.5, ds_max)
        if turned and t[-1] > 0 and y[-1] >= min(p_target, p2 + o.step_db) - 1e-12:
            break
        if not turned and y[-1] >= p_target:
            break
    else:
        raise NoConvergence("arclength continuation exhausted its step budget", float("nan"), float(y[-1]))
    p = float(y[-1])
    if p <= p_target:
        F, _ = _augmented(prob, y[:-1], p, driven_port, z0)
        return p, y[:-1], float(np.max(np.abs(F))), total
    x, r, it = _land(prob, y_last, y, p_target, driven_port, z0)
    return p_target, x, r, total + it


def _land(prob, y_a, y_b, p_target, driven_port, z0):
    """Converged point at ``p_target`` on a rising arc segment bracketed by ``y_a``, ``y_b``."""
    o = prob.options
    J = prob.source_vector(driven_port, source_amplitude(p_target, z0))
    p_a, p_b = y_a[-1], y_b[-1]
    s = (p_target - p_a) / (p_b - p_a)
    guess = y_a[:-1] + s * (y_b[:-1] - y_a[:-1])
    x, total, r, ok = newton(prob, guess, J, o.tol, o.max_iter)
    if ok:
        return x, r, total
    # short natural steps from the lower bracket
    x, p = y_a[:-1], p_a
    n = 8
    for i in range(1, n + 1):
        q = p_a + (p_target - p_a) * i / n
        Jq = prob.source_vector(driven_port, source_amplitude(q, z0))
        x, it, r, ok = newton(prob, _scale_voltages(prob, x, 10 ** ((q - p) / 20)), Jq, o.tol, o.max_iter)
        total += it
        if not ok:
            raise NoConvergence("could not land on target power after a fold", r, p)
        p = q
    return x, r, total


def _package(prob: HBProblem, x, iterations, residual, trace, driven_port, power_dbm) -> HBSolution:
    X = x * prob.col_scale
    phases, phi_dc = {}, {}
    for j, jj in enumerate(prob.junctions):
        phases[jj.name] = Spectrum(prob.basis, unstack(prob.junction_phase(X, j)))
        phi_dc[jj.name] = float(X[prob.phi_index(j)])
    z0 = prob.netlist.ports[driven_port].z0
    return HBSolution(
        basis=prob.basis,
        node_spectra=prob.node_spectra(X),
        junction_phase_spectra=phases,
        phi_dc=phi_dc,
        iterations=iterations,
        residual_norm=float(residual),
        continuation_trace=trace,
        driven_port=driven_port,
        power_dbm=power_dbm,
        source_voltage=source_amplitude(power_dbm, z0),
        x=x,
    )
