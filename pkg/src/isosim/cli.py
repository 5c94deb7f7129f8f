"""Command-line front end: ``isosim run | quantize | validate | plot``."""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from dataclasses import replace

import click

from . import hb, oracle, quantizer, response, svgplot
from .errors import IsosimError, NetlistError, SchemaMismatch
from .netlist import BUILTIN, load_netlist

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_VALIDATION, EXIT_SOLVER = 0, 2, 3, 4, 5

RUN_KEYS = {"netlist", "freq", "power", "delta", "lj", "output", "harmonics", "samples", "tol", "threads"}
QUANTIZE_KEYS = {"lj", "lj2", "nmax", "model", "output"}
VALIDATE_KEYS = {"netlist", "freq", "power", "port", "harmonics", "samples", "tol", "periods", "settle"}


class ConfigError(click.UsageError):
    exit_code = EXIT_CONFIG


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` (endpoint inclusive within half a step), a comma list, or one value."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range {text!r} must be start:stop:step")
        try:
            start, stop, step = map(float, parts)
        except ValueError:
            raise ConfigError(f"range {text!r} is not numeric") from None
        if step == 0 or (stop - start) * step < 0:
            raise ConfigError(f"range {text!r} does not reach its stop with that step")
        n = int(math.floor((stop - start) / step + 0.5))
        return [start + i * step for i in range(n + 1)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"value list {text!r} is not numeric") from None


def _as_list(value, key):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, list):
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} must hold numbers") from None
    return parse_range(value)


def _merge(config_path, allowed: set, flags: dict) -> dict:
    cfg = {}
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(cfg) - allowed)
        if unknown:
            raise ConfigError(f"unknown config key {unknown[0]!r}")
    cfg.update({k: v for k, v in flags.items() if v is not None})
    return cfg


def _netlist(name):
    if name is None:
        raise ConfigError("missing netlist")
    if name not in BUILTIN and not os.path.exists(name):
        raise ConfigError(f"netlist {name!r} is neither a built-in nor an existing file")
    try:
        return load_netlist(name)
    except (NetlistError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid netlist {name!r}: {exc}") from None


def _hb_options(cfg) -> hb.HBOptions:
    opts = hb.HBOptions()
    kw = {}
    if cfg.get("harmonics") is not None:
        kw["K"] = int(cfg["harmonics"])
        kw["N"] = max(opts.N, 1 << (4 * (2 * kw["K"] + 1) - 1).bit_length())
    if cfg.get("samples") is not None:
        kw["N"] = int(cfg["samples"])
    if cfg.get("tol") is not None:
        kw["tol"] = float(cfg["tol"])
    try:
        opts = replace(opts, **kw)
        hb.HarmonicBasis(1.0, opts.K, opts.N)
    except (ValueError, IsosimError) as exc:
        raise ConfigError(f"invalid harmonic-balance options: {exc}") from None
    return opts


def _write_rows(path, columns, rows):
    fh = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([response._fmt(r[c]) for c in columns])
    finally:
        if path:
            fh.close()


common = [
    click.option("--config", "config_path", type=click.Path(), help="JSON config; flags override its values."),
    click.option("-o", "--output", help="Output file (default: stdout)."),
]


def with_common(f):
    for opt in reversed(common):
        f = opt(f)
    return f


@click.group()
def main():
    """Harmonic-balance simulation of qubit-based isolators."""


@main.command()
@with_common
@click.option("--netlist", help="Built-in name (lorentz, fano, transmon) or JSON path.")
@click.option("--freq", help="Drive frequency in Hz, or start:stop:step.")
@click.option("--power", help="Available source power in dBm, or start:stop:step.")
@click.option("--delta", help="Detuning coefficient(s); rebuilds a built-in netlist per value.")
@click.option("--lj", help="Junction inductance(s) in H applied to every junction.")
@click.option("--harmonics", type=int, help="Harmonic count K.")
@click.option("--samples", type=int, help="Time samples per period N.")
@click.option("--tol", type=float, help="Newton tolerance on the scaled residual.")
@click.option("--threads", type=int, help="Worker processes (fallback: ISOSIM_THREADS).")
def run(config_path, output, netlist, freq, power, delta, lj, harmonics, samples, tol, threads):
    """Two-port sweep; writes one CSV row per grid point."""
    cfg = _merge(config_path, RUN_KEYS, dict(
        netlist=netlist, freq=freq, power=power, delta=delta, lj=lj, output=output,
        harmonics=harmonics, samples=samples, tol=tol, threads=threads,
    ))
    net = _netlist(cfg.get("netlist"))
    grid = {
        "f0": _as_list(cfg.get("freq"), "freq"),
        "power_dbm": _as_list(cfg.get("power"), "power"),
        "delta": _as_list(cfg.get("delta"), "delta"),
        "lj": _as_list(cfg.get("lj"), "lj"),
    }
    if not grid["f0"] or not grid["power_dbm"]:
        raise ConfigError("both freq and power are required")
    if any(f <= 0 for f in grid["f0"]):
        raise ConfigError("freq values must be positive")
    if grid["lj"] and any(v <= 0 for v in grid["lj"]):
        raise ConfigError("lj values must be positive")
    builder = None
    if grid["delta"]:
        name = cfg["netlist"]
        if name not in BUILTIN:
            raise ConfigError("delta sweeps need a built-in netlist")
        builder = BUILTIN[name]
    opts = _hb_options(cfg)
    workers = cfg.get("threads")
    try:
        result = response.sweep(net, grid, opts, builder=builder, workers=workers)
    except IsosimError as exc:
        click.echo(f"solver error: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    _write_rows(cfg.get("output"), response.CSV_COLUMNS, result.rows)
    bad = sum(not (r["converged_fwd"] and r["converged_bwd"]) for r in result.rows)
    if bad:
        click.echo(f"{bad} of {len(result.rows)} points did not converge", err=True)
        sys.exit(EXIT_PARTIAL)


@main.command()
@with_common
@click.option("--lj", help="Qubit-1 inductance(s) in H, or start:stop:step.")
@click.option("--lj2", type=float, help="Fixed qubit-2 inductance in H (default 8 nH).")
@click.option("--nmax", type=int, help="Charge-basis truncation per island.")
@click.option("--model", type=click.Choice(["line", "bridged"]), help="Capacitance network.")
def quantize(config_path, output, lj, lj2, nmax, model):
    """Transition-frequency sweep over qubit-1 inductance."""
    cfg = _merge(config_path, QUANTIZE_KEYS, dict(lj=lj, lj2=lj2, nmax=nmax, model=model, output=output))
    values = _as_list(cfg.get("lj"), "lj")
    if not values:
        raise ConfigError("lj is required")
    if any(v <= 0 for v in values):
        raise ConfigError("lj values must be positive")
    n_max = int(cfg.get("nmax", 12))
    lj2_value = float(cfg.get("lj2", 8e-9))
    if lj2_value <= 0:
        raise ConfigError("lj2 must be positive")
    build = quantizer.bridged_system if cfg.get("model") == "bridged" else quantizer.isolator_system
    try:
        system = build(n_max=n_max)
        table = quantizer.sweep_lj(system, values, fixed_lj2=lj2_value)
    except IsosimError as exc:
        if isinstance(exc, ValueError):
            raise ConfigError(str(exc)) from None
        click.echo(f"solver error: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    rows = [{k: _py(table[k][i]) for k in quantizer.SWEEP_COLUMNS} for i in range(len(values))]
    _write_rows(cfg.get("output"), quantizer.SWEEP_COLUMNS, rows)
    if len(values) >= 5:
        try:
            x = quantizer.find_avoided_crossing(table)
            click.echo(f"avoided crossing: lj_star = {x['lj_star'] * 1e9:.4f} nH, gap = {x['gap'] / 1e6:.3f} MHz", err=True)
        except IsosimError as exc:
            click.echo(f"no interior crossing: {exc}", err=True)


def _py(v):
    v = v.item() if hasattr(v, "item") else v
    return v


@main.command()
@click.option("--config", "config_path", type=click.Path())
@click.option("--netlist", help="Built-in name or JSON path.")
@click.option("--freq", type=float, help="Drive frequency in Hz.")
@click.option("--power", type=float, help="Available source power in dBm.")
@click.option("--port", type=click.IntRange(1, 2), help="Driven port (default 1).")
@click.option("--harmonics", type=int)
@click.option("--samples", type=int)
@click.option("--tol", type=float, help="Newton tolerance for the harmonic-balance solve.")
@click.option("--periods", type=int, help="Total transient periods.")
@click.option("--settle", type=int, help="Transient periods discarded before analysis.")
def validate(config_path, netlist, freq, power, port, harmonics, samples, tol, periods, settle):
    """Jacobian finite-difference check and harmonic balance vs the transient oracle."""
    cfg = _merge(config_path, VALIDATE_KEYS, dict(
        netlist=netlist, freq=freq, power=power, port=port, harmonics=harmonics,
        samples=samples, tol=tol, periods=periods, settle=settle,
    ))
    net = _netlist(cfg.get("netlist"))
    if cfg.get("freq") is None or cfg.get("power") is None:
        raise ConfigError("freq and power are required")
    opts = _hb_options(cfg)
    drive = response.DriveSpec(int(cfg.get("port", 1)), float(cfg["freq"]), float(cfg["power"]))
    settle_p = int(cfg.get("settle", 20000))
    tcfg = oracle.TransientConfig(n_periods=int(cfg.get("periods", settle_p + 1000)), settle_periods=settle_p,
                                  ramp_periods=settle_p // 4)
    results = []
    try:
        sol = hb.solve_hb(net, drive.f0, drive.port - 1, drive.power_dbm, opts)
        prob = hb.HBProblem(net, sol.basis, opts)
        err = hb.jacobian_fd_error(prob, sol.x, prob.source_vector(drive.port - 1, sol.source_voltage))
        results.append(("jacobian_fd", err, 1e-6, err < 1e-6))
    except IsosimError as exc:
        results.append(("jacobian_fd", float("nan"), 1e-6, False))
        click.echo(f"jacobian check failed: {exc}", err=True)
    try:
        cmp = oracle.compare_hb_transient(net, drive, tcfg, opts)
        results.append(("hb_vs_transient_t", cmp["t_rel_diff"], 0.02, cmp["t_rel_diff"] < 0.02))
    except IsosimError as exc:
        results.append(("hb_vs_transient_t", float("nan"), 0.02, False))
        click.echo(f"transient comparison failed: {exc}", err=True)
    click.echo(f"{'check':<22}{'value':>14}{'limit':>10}  result")
    for name, value, limit, ok in results:
        click.echo(f"{name:<22}{value:>14.3e}{limit:>10.0e}  {'PASS' if ok else 'FAIL'}")
    if not all(r[3] for r in results):
        sys.exit(EXIT_VALIDATION)


@main.command()
@click.argument("csv_path", type=click.Path())
@click.option("--kind", required=True, type=click.Choice(["isolation_vs_power", "spectra_vs_freq", "eigen_branches"]))
@click.option("-o", "--output", help="SVG path (default: stdout).")
def plot(csv_path, kind, output):
    """Render a sweep CSV as SVG."""
    if not os.path.exists(csv_path):
        raise ConfigError(f"no such file {csv_path!r}")
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        raw = list(reader)
    rows = [{k: _num(v) for k, v in r.items()} for r in raw]
    try:
        if kind == "isolation_vs_power":
            svg = svgplot.transmission_plot(rows, header, "pin_dbm", "input power (dBm)")
        elif kind == "spectra_vs_freq":
            svg = svgplot.transmission_plot(rows, header, "f0_hz", "frequency (GHz)", 1e-9)
        else:
            svg = svgplot.eigen_plot(rows, header)
    except SchemaMismatch as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_CONFIG)
    if output:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    else:
        click.echo(svg, nl=False)


def _num(v):
    if v in ("", None):
        return None
    if v in ("true", "false"):
        return v == "true"
    try:
        return float(v)
    except ValueError:
        return v


if __name__ == "__main__":
    main()
