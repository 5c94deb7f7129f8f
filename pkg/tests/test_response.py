import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isosim.errors import DomainError, EmptySweep
from isosim.hb import solve_hb
from isosim.linmap import small_signal_sparams
from isosim.netlist import Capacitor, Port, Resistor, make_netlist, reference_lorentz, single_transmon
from isosim.response import (
    CSV_COLUMNS,
    DriveSpec,
    effective_inductance,
    efficiency,
    isolation_db,
    lj_diagnostic,
    nonreciprocal_pair,
    power_bandwidth,
    read_csv,
    spectral_bandwidth,
    sweep,
    transmission,
)


def through():
    return make_netlist([Resistor("Rbig", ("a", "0"), 1e300)], [Port("a"), Port("a")], 5e9)


def shunt_c():
    return make_netlist([Capacitor("C", ("a", "0"), 60e-15)], [Port("a"), Port("a")], 5e9)


def test_drive_spec_validation():
    with pytest.raises(DomainError):
        DriveSpec(3, 5e9, -100.0)
    with pytest.raises(DomainError):
        DriveSpec(1, 0.0, -100.0)


def test_efficiency_examples():
    assert efficiency(1.0, 0.0) == 1.0
    assert efficiency(0.5, 0.5) == 0.0
    assert efficiency(0.8, 0.2) == pytest.approx(0.48, rel=1e-14)
    with pytest.raises(DomainError):
        efficiency(0, 0)


@given(st.complex_numbers(max_magnitude=1.0), st.complex_numbers(max_magnitude=1.0))
def test_efficiency_sign_and_bounds(t21, t12):
    a, b = abs(t21), abs(t12)
    if a == 0 or b == 0:
        return
    eps = efficiency(t21, t12)
    assert -a - 1e-15 <= eps <= a + 1e-15
    assert np.sign(eps) == np.sign(a - b)
    assert np.sign(isolation_db(t21, t12)) == np.sign(a - b)


def test_isolation_limits():
    assert isolation_db(0.5, 0.05) == pytest.approx(20.0)
    assert isolation_db(0.5, 0) == math.inf
    assert isolation_db(0, 0.5) == -math.inf


@pytest.mark.parametrize("p", [-200.0, -120.0, -90.0])
def test_through_connection_is_unity(p):
    assert transmission(through(), DriveSpec(1, 5e9, p)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p", [-200.0, -100.0, -60.0])
def test_shunt_capacitor_power_independent(p):
    t = transmission(shunt_c(), DriveSpec(1, 5e9, p))
    assert t == pytest.approx(small_signal_sparams(shunt_c(), 5e9)["t21"], rel=1e-8)


def test_linearized_network_is_reciprocal():
    r = nonreciprocal_pair(reference_lorentz().linearized(), 4.9e9, -123.0)
    assert abs(r.isolation_db) < 1e-8


def test_reciprocity_restored_at_vanishing_power():
    r = nonreciprocal_pair(reference_lorentz(delta=9e-2), 4.9e9, -300.0)
    assert abs(r.isolation_db) < 1e-3
    assert r.diagnostics["converged_fwd"] and r.diagnostics["converged_bwd"]


def test_mirrored_netlist_swaps_directions():
    net = reference_lorentz()
    a = nonreciprocal_pair(net, 4.9e9, -123.0)
    b = nonreciprocal_pair(net.mirrored(), 4.9e9, -123.0)
    assert b.t21 == pytest.approx(a.t12, rel=1e-8)
    assert b.t12 == pytest.approx(a.t21, rel=1e-8)
    assert b.isolation_db == pytest.approx(-a.isolation_db, abs=1e-7)


def test_nonreciprocal_at_operating_point():
    r = nonreciprocal_pair(reference_lorentz(), 4.9e9, -123.0)
    assert abs(r.isolation_db) > 1.0
    assert r.epsilon == pytest.approx(efficiency(r.t21, r.t12))
    assert r.diagnostics["iters_fwd"] > 0


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=4.8e9, max_value=5.0e9), st.floats(min_value=-135.0, max_value=-110.0))
def test_passivity(f0, p):
    r = nonreciprocal_pair(reference_lorentz(), f0, p)
    if r.diagnostics["converged_fwd"]:
        assert abs(r.t21) <= 1 + 1e-6
    if r.diagnostics["converged_bwd"]:
        assert abs(r.t12) <= 1 + 1e-6


def test_saturable_transmon_monotone():
    net = single_transmon()
    f = 4.892e9
    res = sweep(net, {"f0": [f], "power_dbm": list(np.arange(-160.0, -89.0, 5.0))})
    t = res.column("t21_mag")
    assert t[0] < 0.3 and t[-1] > 0.9
    assert np.all(np.diff(t) >= -1e-9)


def staircase(values, step=50e6):
    return [{"f0_hz": 4.9e9 + i * step, "pin_dbm": -120.0 + i, "isolation_db": v} for i, v in enumerate(values)]


def test_bandwidth_staircase():
    assert spectral_bandwidth(staircase([5, 15, 15, 5]), 10.0) == pytest.approx(100e6)
    assert power_bandwidth(staircase([5, 15, 15, 5]), 10.0) == pytest.approx(2.0)


def test_bandwidth_edges_and_errors():
    assert spectral_bandwidth(staircase([1, 2, 3]), 10.0) == 0.0
    assert spectral_bandwidth(staircase([12, 12, 3]), 10.0) == pytest.approx(50e6 + 50e6 * 2 / 9)
    # an unconverged row breaks the interval
    assert spectral_bandwidth(staircase([12, float("nan"), 12, 12, 12]), 10.0) == pytest.approx(100e6)
    with pytest.raises(EmptySweep):
        spectral_bandwidth([], 10.0)
    with pytest.raises(DomainError):
        spectral_bandwidth(staircase([5, 15]), 0.0)


@given(st.lists(st.floats(min_value=-30, max_value=50), min_size=1, max_size=30),
       st.floats(min_value=0.5, max_value=20), st.floats(min_value=0.0, max_value=20))
def test_bandwidth_monotone_in_threshold(values, thr, extra):
    rows = staircase(values)
    assert spectral_bandwidth(rows, thr + extra) <= spectral_bandwidth(rows, thr) + 1e-6


def test_effective_inductance_closed_form():
    j = single_transmon().element("J1")
    assert effective_inductance(0.0, j)["lj_effective"] == j.lj0
    assert effective_inductance(j.ic / math.sqrt(2), j)["lj_effective"] == pytest.approx(j.lj0 * math.sqrt(2))
    with pytest.raises(DomainError):
        effective_inductance(j.ic, j)


def test_lj_diagnostic_from_solution():
    net = single_transmon()
    j = net.element("J1")
    weak = lj_diagnostic(solve_hb(net, 4.9e9, 0, -200.0), j)
    assert weak["lj_effective"] == pytest.approx(j.lj0, rel=1e-9)
    strong = lj_diagnostic(solve_hb(net, 4.9e9, 0, -120.0), j)
    assert 0 < strong["i_fundamental"] < j.ic
    assert strong["lj_effective"] > j.lj0


def test_single_point_sweep_equals_pair():
    net = reference_lorentz()
    row = sweep(net, {"f0": [4.9e9], "power_dbm": [-123.0]}).rows[0]
    pair = nonreciprocal_pair(net, 4.9e9, -123.0)
    assert row["t21_mag"] == pytest.approx(abs(pair.t21), rel=1e-9)
    assert row["t12_mag"] == pytest.approx(abs(pair.t12), rel=1e-9)
    assert row["isolation_db"] == pytest.approx(pair.isolation_db, abs=1e-7)


def test_sweep_order_and_delta_axis():
    grid = {"f0": [4.88e9, 4.9e9], "power_dbm": [-140.0, -130.0], "delta": [0.03, 0.09]}
    res = sweep(reference_lorentz(), grid)
    keys = [(r["f0_hz"], r["pin_dbm"], r["delta"]) for r in res.rows]
    assert keys == [(f, p, d) for f in grid["f0"] for p in grid["power_dbm"] for d in grid["delta"]]
    with pytest.raises(EmptySweep):
        sweep(reference_lorentz(), {"f0": [], "power_dbm": [-120.0]})


def test_parallel_sweep_matches_serial():
    grid = {"f0": [4.88e9, 4.9e9, 4.92e9], "power_dbm": [-130.0, -125.0]}
    a = sweep(reference_lorentz(), grid, workers=1)
    b = sweep(reference_lorentz(), grid, workers=2)
    assert a.rows == b.rows


def test_csv_round_trip(tmp_path):
    res = sweep(reference_lorentz(), {"f0": [4.9e9], "power_dbm": [-140.0, -123.0], "lj": [8e-9]})
    path = tmp_path / "out.csv"
    res.to_csv(path)
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert tuple(header.split(",")) == CSV_COLUMNS
    again = read_csv(path)
    assert again.rows == res.rows
