import math

import numpy as np
import pytest

from isosim.errors import DomainError, NotSettled, StepSizeIncompatibleWithDelay
from isosim.linmap import ac_solve
from isosim.netlist import Capacitor, Port, Resistor, TransmissionLine, make_netlist, reference_lorentz, single_transmon
from isosim.oracle import (
    TransientConfig,
    Waveforms,
    compare_hb_transient,
    steady_state_harmonics,
    transient_solve,
)
from isosim.response import DriveSpec

F0 = 5e9


def series_rc(r=20.0, c=1e-12):
    return make_netlist(
        [Resistor("R", ("a", "b"), r), Capacitor("C", ("b", "0"), c)],
        [Port("a"), Port("b")], F0,
    )


def synthetic(samples_per_period, periods, signal):
    dt = 1 / (samples_per_period * F0)
    t = (np.arange(samples_per_period * periods) + 1) * dt
    return Waveforms(t, {"x": signal(t)}, {}, dt, F0, len(t), 1.0)


def test_rc_matches_closed_form():
    r, c, z0 = 20.0, 1e-12, 50.0
    cfg = TransientConfig(dt=1 / (4000 * F0), n_periods=60, settle_periods=50)
    w = transient_solve(series_rc(r, c), DriveSpec(1, F0, -100.0), cfg)
    h = steady_state_harmonics(w, F0, 3)
    # two-node admittance solved by hand: Norton source Vs/z0 into node a
    s = 2j * math.pi * F0
    ga, gb, gr = 1 / z0, 1 / z0 + s * c, 1 / r
    det = (ga + gr) * (gb + gr) - gr * gr
    vs = w.source_voltage
    va = (vs / z0) * (gb + gr) / det
    vb = (vs / z0) * gr / det
    assert h["a"][1] == pytest.approx(va, rel=1e-6)
    assert h["b"][1] == pytest.approx(vb, rel=1e-6)


def test_zero_drive_stays_at_rest():
    cfg = TransientConfig(n_periods=30, settle_periods=20)
    w = transient_solve(reference_lorentz(), DriveSpec(1, 4.9e9, None), cfg)
    assert all(np.all(v == 0) for v in w.node_voltages.values())
    assert all(np.all(p == 0) for p in w.junction_phases.values())
    h = steady_state_harmonics(w, 4.9e9, 4)
    assert h["_steadiness"] == 0


def test_sample_count_and_finiteness():
    cfg = TransientConfig(n_periods=40, settle_periods=30)
    w = transient_solve(series_rc(), DriveSpec(1, F0, -120.0), cfg)
    assert w.total_steps == pytest.approx(40 / (F0 * w.dt), abs=1)
    assert len(w.time) == pytest.approx(10 / (F0 * w.dt), abs=1)
    assert all(np.all(np.isfinite(v)) for v in w.node_voltages.values())


def test_linearized_lorentz_matches_ac():
    f = 4.6e9
    net = reference_lorentz().linearized()
    cfg = TransientConfig(dt=1 / (800 * f), n_periods=2200, settle_periods=2000)
    w = transient_solve(net, DriveSpec(1, f, -150.0), cfg)
    h = steady_state_harmonics(w, f, 4)
    ac = ac_solve(net, f, 0, w.source_voltage)
    for node in ("A", "B", "q1", "q2"):
        assert h[node][1] == pytest.approx(ac.node_voltages[node], rel=1e-4)


def test_projection_of_pure_sinusoid():
    w = synthetic(400, 12, lambda t: 0.7 * np.cos(2 * math.pi * F0 * t + 0.3))
    h = steady_state_harmonics(w, F0, 6)["x"]
    assert h[1] == pytest.approx(0.7 * np.exp(0.3j), rel=1e-12)
    others = np.delete(np.abs(h.coefficients), 1)
    assert np.max(others) < 1e-12 * 0.7


def test_clipped_wave_has_odd_harmonics_only():
    w = synthetic(400, 12, lambda t: np.clip(np.sin(2 * math.pi * F0 * t), -0.5, 0.5))
    c = np.abs(steady_state_harmonics(w, F0, 7)["x"].coefficients)
    assert c[3] > 1e-2 and c[5] > 1e-3
    assert max(c[0], c[2], c[4], c[6]) < 1e-10


def test_short_window_rejected():
    w = synthetic(400, 1, lambda t: np.cos(2 * math.pi * F0 * t))
    with pytest.raises(DomainError):
        steady_state_harmonics(w, F0, 3)


def test_matched_line_delays_exactly():
    delay = 137e-12
    net = make_netlist([TransmissionLine("TL", ("a", "b"), 50.0, delay)], [Port("a"), Port("b")], F0)
    cfg = TransientConfig(n_periods=20, settle_periods=10)
    w = transient_solve(net, DriveSpec(1, F0, -100.0), cfg, record_periods=20)
    nd = round(delay / w.dt)
    assert nd * w.dt == pytest.approx(delay, rel=1e-12)
    va, vb = w.node_voltages["a"], w.node_voltages["b"]
    amp = np.max(np.abs(va))
    assert np.all(vb[:nd] == 0)
    assert np.max(np.abs(vb[nd:] - va[:-nd])) < 1e-10 * amp
    assert amp == pytest.approx(w.source_voltage / 2, rel=1e-4)


def test_unsettled_run_raises():
    net = reference_lorentz().linearized()
    cfg = TransientConfig(n_periods=40, settle_periods=10)
    w = transient_solve(net, DriveSpec(1, 4.9e9, -150.0), cfg)
    with pytest.raises(NotSettled):
        steady_state_harmonics(w, 4.9e9, 4)


def test_step_size_limits():
    with pytest.raises(StepSizeIncompatibleWithDelay):
        transient_solve(series_rc(), DriveSpec(1, F0, -100.0), TransientConfig(dt=1 / (100 * F0), n_periods=20, settle_periods=10))
    with pytest.raises(DomainError):
        transient_solve(series_rc(), DriveSpec(1, F0, -100.0), TransientConfig(n_periods=10, settle_periods=10))


def test_dt_halving_converges_second_order():
    f = 4.3e9
    net = single_transmon()
    out = []
    for div in (400, 800, 1600):
        cfg = TransientConfig(dt=1 / (div * f), n_periods=1700, settle_periods=1500)
        w = transient_solve(net, DriveSpec(1, f, -130.0), cfg)
        out.append(steady_state_harmonics(w, f, 4)["A"][1])
    e1, e2 = abs(out[0] - out[1]), abs(out[1] - out[2])
    assert e2 / abs(out[2]) < 1e-5
    assert 3.5 < e1 / e2 < 4.5


def test_energy_balance_lossless():
    f = 4.9e9
    cfg = TransientConfig(n_periods=3200, settle_periods=3000)
    w = transient_solve(reference_lorentz(r_j=0.0), DriveSpec(2, f, -123.0), cfg)
    vs = w.source_voltage * np.cos(2 * math.pi * f * w.time)
    v_in, v_out = w.node_voltages["B"], w.node_voltages["A"]
    p_source = np.mean(vs * (vs - v_in)) / 50
    p_delivered = np.mean((vs - v_in) ** 2) / 50 + np.mean(v_out**2) / 50
    assert p_delivered == pytest.approx(p_source, rel=1e-6)


def test_linear_compare_agrees():
    f = 4.6e9
    cfg = TransientConfig(dt=1 / (800 * f), n_periods=2200, settle_periods=2000)
    out = compare_hb_transient(reference_lorentz().linearized(), DriveSpec(1, f, -150.0), cfg)
    assert out["rel_diff_fundamental"] < 1e-4


@pytest.mark.slow
def test_single_transmon_knee_agrees():
    cfg = TransientConfig(n_periods=6000, settle_periods=5000)
    out = compare_hb_transient(single_transmon(), DriveSpec(1, 4.9e9, -123.0), cfg)
    assert out["t_rel_diff"] < 0.02
    assert out["rel_diff_fundamental"] < 0.02
