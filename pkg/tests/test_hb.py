import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isosim.constants import PHI0_REDUCED
from isosim.errors import DomainError
from isosim.hb import (
    HarmonicBasis,
    HBOptions,
    HBProblem,
    Spectrum,
    assemble_residual,
    jacobian,
    jacobian_fd_error,
    junction_current,
    phase_from_voltage,
    solve_hb,
    source_amplitude,
)
from isosim.linmap import ac_solve, small_signal_sparams
from isosim.netlist import Capacitor, Port, Resistor, make_netlist, reference_lorentz, single_transmon


def shunt_rc():
    return make_netlist(
        [Resistor("R", ("a", "b"), 20.0), Capacitor("C", ("b", "0"), 1e-12)],
        [Port("a"), Port("b")], 5e9,
    )


def test_basis_invariants():
    with pytest.raises(DomainError):
        HarmonicBasis(5e9, K=2, N=64)
    with pytest.raises(DomainError):
        HarmonicBasis(5e9, K=8, N=96)
    with pytest.raises(DomainError):
        HarmonicBasis(5e9, K=8, N=64)
    b = HarmonicBasis(5e9)
    assert b.analysis() @ b.synthesis() == pytest.approx(np.eye(b.size), abs=1e-13)


def test_source_amplitude():
    # -123 dBm into 50 ohm: sqrt(8 * 50 * 5.01e-16 W)
    assert source_amplitude(-123.0) == pytest.approx(math.sqrt(400 * 10 ** (-15.3)), rel=1e-12)


def test_phase_from_zero_voltage():
    b = HarmonicBasis(5e9)
    phi = phase_from_voltage(Spectrum(b, np.zeros(b.K + 1)), 0.25)
    assert np.all(phi.coefficients[1:] == 0) and phi[0] == 0.25


def test_phase_single_harmonic():
    b = HarmonicBasis(5e9)
    c = np.zeros(b.K + 1, dtype=complex)
    c[1] = 1e-6 * (0.3 - 0.8j)
    phi = phase_from_voltage(Spectrum(b, c), 0.0)
    assert phi[1] == pytest.approx(c[1] / (1j * b.omega * PHI0_REDUCED), rel=1e-15)
    assert np.all(phi.coefficients[2:] == 0)


def test_phase_derivative_matches_voltage():
    b = HarmonicBasis(5e9)
    rng = np.random.default_rng(3)
    c = np.zeros(b.K + 1, dtype=complex)
    c[1:] = 1e-6 * (rng.standard_normal(b.K) + 1j * rng.standard_normal(b.K))
    v = Spectrum(b, c)
    phi = phase_from_voltage(v, 0.1)
    k = np.arange(b.K + 1)
    dphi = Spectrum(b, 1j * k * b.omega * phi.coefficients)
    t = b.times()
    scale = np.max(np.abs(v.at(t))) / PHI0_REDUCED
    assert np.max(np.abs(dphi.at(t) - v.at(t) / PHI0_REDUCED)) < 1e-10 * scale


def sine_phase(amplitude, b):
    # A sin(wt) = Re(-jA exp(jwt))
    c = np.zeros(b.K + 1, dtype=complex)
    c[1] = -1j * amplitude
    return Spectrum(b, c)


def test_junction_current_small_angle():
    b = HarmonicBasis(5e9)
    i = junction_current(sine_phase(1e-3, b), 40e-9)
    assert abs(i[1]) == pytest.approx(40e-9 * 1e-3, rel=1e-6)


def test_junction_current_third_harmonic():
    b = HarmonicBasis(5e9)
    A = 0.3
    i = junction_current(sine_phase(A, b), 40e-9)
    assert abs(i[3]) == pytest.approx(40e-9 * A**3 / 24, rel=0.02)


def test_junction_current_constant_phase():
    b = HarmonicBasis(5e9)
    c = np.zeros(b.K + 1)
    c[0] = 0.4
    i = junction_current(Spectrum(b, c), 40e-9)
    assert i[0].real == pytest.approx(40e-9 * math.sin(0.4), rel=1e-14)
    assert np.max(np.abs(i.coefficients[1:])) < 1e-22


def test_zero_drive_zero_residual():
    net = reference_lorentz()
    b = HarmonicBasis(4.9e9)
    prob = HBProblem(net, b)
    F = assemble_residual(net, b, (0, 0.0), np.zeros(prob.size))
    assert np.all(F == 0)


def test_linear_residual_vanishes_at_ac_solution():
    net = shunt_rc()
    b = HarmonicBasis(5e9)
    prob = HBProblem(net, b)
    vs = 1e-6
    ac = ac_solve(net, 5e9, 0, vs)
    X = prob.from_phasors(ac.node_voltages)
    F = prob.residual(X / prob.col_scale, prob.source_vector(0, vs))
    assert np.max(np.abs(F)) < 1e-12
    F_bad = prob.residual(1.01 * X / prob.col_scale, prob.source_vector(0, vs))
    assert np.max(np.abs(F_bad)) > 1e-6


def test_linear_jacobian_block_diagonal():
    net = shunt_rc()
    b = HarmonicBasis(5e9, K=3, N=32)
    prob = HBProblem(net, b)
    Jm = jacobian(net, b, np.random.default_rng(0).standard_normal(prob.size))
    blocks = np.zeros_like(Jm, dtype=bool)
    n = len(prob.nodes)
    dc = prob.size - 2 * n * b.K - len(prob.junctions)
    blocks[:dc, :dc] = True
    for k in range(1, b.K + 1):
        re, im = prob.harmonic_slices(k)
        s = slice(re.start, im.stop)
        blocks[s, s] = True
    assert np.all(Jm[~blocks] == 0)


def test_jacobian_matches_finite_differences():
    net = reference_lorentz()
    b = HarmonicBasis(4.9e9)
    prob = HBProblem(net, b)
    sol = solve_hb(net, 4.9e9, 0, -123.0)
    J = prob.source_vector(0, sol.source_voltage)
    rng = np.random.default_rng(11)
    for _ in range(3):
        x = sol.x * (1 + 0.3 * rng.standard_normal(prob.size))
        assert jacobian_fd_error(prob, x, J) < 1e-6


def test_zero_phase_jacobian_equals_inductor_stamp():
    net = single_transmon(r_j=0.0)
    lin = net.linearized()
    b = HarmonicBasis(4.9e9)
    p_nl, p_lin = HBProblem(net, b), HBProblem(lin, b)
    J_nl = p_nl.jacobian_unscaled(np.zeros(p_nl.size))
    J_lin = p_lin.jacobian_unscaled(np.zeros(p_lin.size))
    for k in range(1, b.K + 1):
        a, c = p_nl.harmonic_slices(k)
        d, e = p_lin.harmonic_slices(k)
        blk_nl = J_nl[a.start:c.stop, a.start:c.stop]
        blk_lin = J_lin[d.start:e.stop, d.start:e.stop]
        assert np.max(np.abs(blk_nl - blk_lin)) <= 1e-10 * np.max(np.abs(blk_lin))


def test_lorentz_operating_point_converges():
    sol = solve_hb(reference_lorentz(), 4.9e9, 0, -123.0)
    assert sol.residual_norm < 1e-9
    assert sol.iterations > 0
    assert all(abs(v) < math.pi / 2 for v in sol.phi_dc.values())
    assert sol.continuation_trace[-1][0] == -123.0


@pytest.mark.parametrize("net", [reference_lorentz(), single_transmon(), shunt_rc()], ids=["lorentz", "transmon", "rc"])
def test_vanishing_drive_is_linear(net):
    f = 4.9e9
    sol = solve_hb(net, f, 0, -300.0)
    ac = ac_solve(net.linearized(), f, 0, sol.source_voltage)
    for node, spec in sol.node_spectra.items():
        assert spec[1] == pytest.approx(ac.node_voltages[node], rel=1e-8, abs=1e-8 * sol.source_voltage)


def test_weak_drive_matches_small_signal():
    net = reference_lorentz()
    sol = solve_hb(net, 4.9e9, 0, -180.0)
    t = 2 * sol.fundamental("B") / sol.source_voltage
    assert t == pytest.approx(small_signal_sparams(net, 4.9e9)["t21"], rel=1e-6)


def test_saturated_transmon_transmits():
    net = single_transmon()
    sol = solve_hb(net, 4.892e9, 0, -90.0)
    assert abs(2 * sol.fundamental("A") / sol.source_voltage) > 0.9


def test_drive_inversion_symmetry():
    net = single_transmon()
    b = HarmonicBasis(4.9e9)
    prob = HBProblem(net, b)
    sol = solve_hb(net, 4.9e9, 0, -125.0)
    x_neg = -sol.x
    for j in range(len(prob.junctions)):
        x_neg[prob.phi_index(j)] = sol.x[prob.phi_index(j)]
    F = prob.residual(x_neg, prob.source_vector(0, -sol.source_voltage))
    assert np.max(np.abs(F)) < 1e-9
    assert max(abs(v) for v in sol.phi_dc.values()) < 1e-12
    spec = sol.node_spectra["q1"]
    assert np.max(np.abs(spec.coefficients[0::2])) < 1e-12 * abs(spec[1])


@pytest.mark.parametrize("net,f0,p", [
    (reference_lorentz(), 4.9e9, -123.0),
    (single_transmon(), 4.9e9, -123.0),
])
def test_spectral_convergence(net, f0, p):
    a = solve_hb(net, f0, 1 if net.ports[0] != net.ports[1] else 0, p)
    b = solve_hb(net, f0, a.driven_port, p, HBOptions(K=16, N=256))
    scale = max(abs(s[1]) for s in a.node_spectra.values())
    for node in a.node_spectra:
        assert abs(a.node_spectra[node][1] - b.node_spectra[node][1]) < 1e-4 * scale
    c = solve_hb(net, f0, a.driven_port, p, HBOptions(N=256))
    for node in a.node_spectra:
        assert abs(a.node_spectra[node][1] - c.node_spectra[node][1]) < 1e-10 * scale


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=4.7e9, max_value=5.1e9), st.floats(min_value=-170.0, max_value=-130.0))
def test_converged_solutions_satisfy_kcl(f0, p):
    net = single_transmon()
    sol = solve_hb(net, f0, 0, p)
    prob = HBProblem(net, sol.basis)
    F = prob.residual(sol.x, prob.source_vector(0, sol.source_voltage))
    assert np.max(np.abs(F)) < 1e-9
    t = abs(2 * sol.fundamental("A") / sol.source_voltage)
    assert t <= 1 + 1e-6
