"""Large-signal two-port figures of merit and parameter sweeps."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptySweep, IsosimError
from .hb import HarmonicBasis, HBOptions, HBProblem, HBSolution, solve_hb
from .netlist import JosephsonJunction, Netlist, ic_from_lj0, make_netlist, reference_lorentz

CSV_COLUMNS = (
    "f0_hz", "pin_dbm", "delta", "lj_h", "t21_mag", "t21_phase_rad", "t12_mag",
    "t12_phase_rad", "isolation_db", "efficiency", "converged_fwd", "converged_bwd",
    "iters_fwd", "iters_bwd",
)


@dataclass(frozen=True)
class DriveSpec:
    port: int  # 1 or 2
    f0: float
    power_dbm: float

    def __post_init__(self):
        if self.port not in (1, 2):
            raise DomainError("port must be 1 or 2")
        if not self.f0 > 0:
            raise DomainError("drive frequency must be positive")


@dataclass
class TwoPortResponse:
    f0: float
    power_dbm: float
    t21: complex
    t12: complex
    isolation_db: float
    epsilon: float
    diagnostics: dict = field(default_factory=dict)


def transmission_from(netlist: Netlist, sol: HBSolution) -> complex:
    """t = b_out / a_in at the fundamental; with equal port impedances this is 2 V_out / Vs."""
    src = netlist.ports[sol.driven_port]
    out = netlist.ports[1 - sol.driven_port]
    if sol.source_voltage == 0:
        return 0j
    a_in = sol.source_voltage / (2 * math.sqrt(src.z0))
    return sol.fundamental(out.node) / math.sqrt(out.z0) / a_in


def transmission(netlist: Netlist, drive: DriveSpec, options: HBOptions = HBOptions()) -> complex:
    sol = solve_hb(netlist, drive.f0, drive.port - 1, drive.power_dbm, options)
    return transmission_from(netlist, sol)


def efficiency(t21: complex, t12: complex) -> float:
    """Diode efficiency |t21| (|t21| - |t12|) / (|t21| + |t12|)."""
    a, b = abs(t21), abs(t12)
    if a + b == 0:
        raise DomainError("efficiency undefined when both transmissions vanish")
    return a * ((a - b) / (a + b))


def isolation_db(t21: complex, t12: complex) -> float:
    a, b = abs(t21), abs(t12)
    if b == 0:
        return math.inf if a > 0 else math.nan
    if a == 0:
        return -math.inf
    return 20 * math.log10(a / b)


def nonreciprocal_pair(netlist: Netlist, f0: float, power_dbm: float,
                       options: HBOptions = HBOptions()) -> TwoPortResponse:
    """Drive port 1, then port 2, at the same incident power."""
    t = {}
    diag = {}
    for port, key in ((1, "fwd"), (2, "bwd")):
        try:
            sol = solve_hb(netlist, f0, port - 1, power_dbm, options)
        except IsosimError as exc:
            t[key] = complex("nan+nanj")
            diag[f"converged_{key}"] = False
            diag[f"iters_{key}"] = getattr(exc, "iterations", 0)
            diag[f"error_{key}"] = str(exc)
            continue
        t[key] = transmission_from(netlist, sol)
        diag[f"converged_{key}"] = True
        diag[f"iters_{key}"] = sol.iterations
        diag[f"folds_{key}"] = sol.diagnostics.get("folds", 0)
    if diag["converged_fwd"] and diag["converged_bwd"]:
        iso = isolation_db(t["fwd"], t["bwd"])
        eps = efficiency(t["fwd"], t["bwd"]) if abs(t["fwd"]) + abs(t["bwd"]) > 0 else 0.0
    else:
        iso = eps = math.nan
    return TwoPortResponse(f0, power_dbm, t["fwd"], t["bwd"], iso, eps, diag)


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    rows: list

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in self.rows:
                writer.writerow([_fmt(r[c]) for c in CSV_COLUMNS])


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_csv(path) -> SweepResult:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if k.startswith("converged"):
                    row[k] = v == "true"
                elif k.startswith("iters"):
                    row[k] = int(v)
                else:
                    row[k] = float(v) if v != "" else None
            rows.append(row)
    return SweepResult(rows)


def _with_lj(netlist: Netlist, lj: float) -> Netlist:
    els = tuple(
        JosephsonJunction(el.name, el.nodes, ic_from_lj0(lj), el.r_series)
        if isinstance(el, JosephsonJunction) else el
        for el in netlist.elements
    )
    return make_netlist(els, netlist.ports, netlist.design_frequency, netlist.nodes)


def _row(f0, p, delta, lj, t21, t12, fwd, bwd) -> dict:
    ok = fwd[0] and bwd[0]
    return {
        "f0_hz": float(f0),
        "pin_dbm": float(p),
        "delta": None if delta is None else float(delta),
        "lj_h": None if lj is None else float(lj),
        "t21_mag": abs(t21),
        "t21_phase_rad": float(np.angle(t21)),
        "t12_mag": abs(t12),
        "t12_phase_rad": float(np.angle(t12)),
        "isolation_db": float(isolation_db(t21, t12)) if ok else math.nan,
        "efficiency": float(efficiency(t21, t12)) if ok and abs(t21) + abs(t12) > 0 else (0.0 if ok else math.nan),
        "converged_fwd": bool(fwd[0]),
        "converged_bwd": bool(bwd[0]),
        "iters_fwd": int(fwd[1]),
        "iters_bwd": int(bwd[1]),
    }


def _power_line(args):
    """All powers of one (f0, delta, lj) line, continuing upward from point to point."""
    builder, base, f0, powers, delta, lj, options = args
    net = builder(delta=delta) if builder is not None and delta is not None else base
    if lj is not None:
        net = _with_lj(net, lj)
    order = np.argsort(powers, kind="stable")
    results = {0: {}, 1: {}}
    for port in (0, 1):
        prob = HBProblem(net, HarmonicBasis(f0, options.K, options.N), options)
        x_prev = p_prev = None
        for i in order:
            p = powers[i]
            sol = None
            if x_prev is not None and p >= p_prev:
                try:
                    sol = solve_hb(net, f0, port, p, options, problem=prob, x_start=x_prev, start_power_dbm=p_prev)
                except IsosimError:
                    sol = None
            if sol is None:
                try:
                    sol = solve_hb(net, f0, port, p, options, problem=prob)
                except IsosimError:
                    results[port][i] = (False, 0, complex("nan+nanj"))
                    x_prev = None
                    continue
            x_prev, p_prev = sol.x, p
            results[port][i] = (True, sol.iterations, transmission_from(net, sol))
    rows = []
    for i, p in enumerate(powers):
        fwd, bwd = results[0][i], results[1][i]
        rows.append(_row(f0, p, delta, lj, fwd[2], bwd[2], fwd, bwd))
    return rows


def default_workers() -> int:
    env = os.environ.get("ISOSIM_THREADS")
    if env:
        return max(1, int(env))
    return 1


def sweep(netlist: Netlist, grid: dict, options: HBOptions = HBOptions(),
          builder=None, workers: int | None = None) -> SweepResult:
    """Both drive directions on the Cartesian grid.

    ``grid`` keys: f0 (required), power_dbm (required), delta, lj. A delta
    axis needs ``builder`` (a callable taking ``delta=``), defaulting to the
    Lorentz reference circuit. Along the power axis each point continues from
    the previous, lower power (the ramp-up branch). Row order is f0-major,
    then power, delta, lj.
    """
    f0s = list(grid.get("f0", []))
    powers = [float(p) for p in grid.get("power_dbm", [])]
    deltas = list(grid.get("delta") or [None])
    ljs = list(grid.get("lj") or [None])
    if not f0s or not powers:
        raise EmptySweep("grid needs at least one frequency and one power")
    if deltas != [None] and builder is None:
        builder = reference_lorentz
    lines = [(f, d, lj) for f in f0s for d in deltas for lj in ljs]
    tasks = [(builder, netlist, f, powers, d, lj, options) for f, d, lj in lines]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(tasks) == 1:
        blocks = [_power_line(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_power_line, tasks))
    # row order: f0-major, then power, delta, lj
    by_line = dict(zip(lines, blocks))
    rows = [
        by_line[(f, d, lj)][k]
        for f in f0s for k in range(len(powers)) for d in deltas for lj in ljs
    ]
    return SweepResult(rows)


# --------------------------------------------------------------------------
# bandwidths


def _bandwidth(x, iso, threshold_db: float) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(iso, dtype=float)
    if len(x) == 0:
        raise EmptySweep("no rows")
    if not threshold_db > 0:
        raise DomainError("threshold must be positive")
    y = np.where(np.isfinite(y), y, -np.inf)
    above = y >= threshold_db
    best = 0.0
    i = 0
    n = len(x)
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        lo = x[i] if i == 0 else _cross(x[i - 1], y[i - 1], x[i], y[i], threshold_db)
        hi = x[j] if j == n - 1 else _cross(x[j], y[j], x[j + 1], y[j + 1], threshold_db)
        best = max(best, hi - lo)
        i = j + 1
    return float(best)


def _cross(x0, y0, x1, y1, level):
    if not np.isfinite(y0) or not np.isfinite(y1) or y1 == y0:
        return x1 if y1 >= level else x0
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def _rows_of(rows):
    return rows.rows if isinstance(rows, SweepResult) else list(rows)


def spectral_bandwidth(rows, threshold_db: float = 10.0) -> float:
    """Widest contiguous frequency interval (Hz) with isolation at or above ``threshold_db``."""
    r = _rows_of(rows)
    return _bandwidth([q["f0_hz"] for q in r], [q["isolation_db"] for q in r], threshold_db)


def power_bandwidth(rows, threshold_db: float = 10.0) -> float:
    """Widest contiguous power interval (dB) with isolation at or above ``threshold_db``."""
    r = _rows_of(rows)
    return _bandwidth([q["pin_dbm"] for q in r], [q["isolation_db"] for q in r], threshold_db)


def lj_diagnostic(solution: HBSolution, junction: JosephsonJunction) -> dict:
    """Fundamental junction current and L_J0 / sqrt(1 - (I/Ic)^2)."""
    spec = solution.junction_phase_spectra[junction.name]
    current = junction.ic * np.sin(spec.samples())
    basis = spec.basis
    i1 = abs((basis.analysis() @ current)[1:3] @ np.array([1, 1j]))
    return effective_inductance(i1, junction)


def effective_inductance(current: float, junction: JosephsonJunction) -> dict:
    ratio = abs(current) / junction.ic
    if ratio >= 1:
        raise DomainError("junction current at or above the critical current")
    return {"i_fundamental": float(abs(current)), "lj_effective": junction.lj0 / math.sqrt(1 - ratio**2)}
