"""End-to-end acceptance runs over the built-in systems"""
import math

import numpy as np
import pytest

from checks import CheckOptions, run_check
from conftest import random_phase_point
from diffcore import ScalarField
from geometry import ExtendedPhasePoint, JetPoint, PhasePoint, extended_frame, phase_frame
from hamiltonian import flow_commutator_residual, iom_residual, legendre_inverse, poisson_bracket_T, poisson_bracket_V
from integrate import drift_report, integrate_hamiltonian, integrate_lagrangian
import kepler
from lagrangian import momenta

BUILTINS = ["kepler2d", "kepler3d", "oscillator", "free_particle", "havas", "quadratic_frame"]
ELLIPTIC_PERIOD = 2.0 * math.pi * (1.0 / 1.36) ** 1.5


@pytest.mark.parametrize("name", BUILTINS)
def test_gradients_match_finite_differences(request, name):
    report = run_check(request.getfixturevalue(name), "gradients", samples=100, tol=1e-6, seed=11)
    assert report.passed, report.to_json()


@pytest.mark.parametrize("name", BUILTINS)
def test_first_variational_formula(request, name):
    report = run_check(request.getfixturevalue(name), "variational-identity", samples=100, tol=1e-10, seed=12)
    assert report.passed, report.to_json()


def test_exact_symmetries(kepler2d, havas):
    rotation = run_check(kepler2d, "symmetry", samples=100, tol=1e-12, seed=13,
                         options=CheckOptions(symmetry="v12"))
    friction = run_check(havas, "symmetry", samples=100, tol=1e-12, seed=13,
                         options=CheckOptions(symmetry="frame"))
    assert rotation.passed and friction.passed


def test_lagrangian_currents_along_solutions(kepler2d, havas):
    start = JetPoint(0.0, (1.0, 0.0), (0.0, 0.8))
    traj = integrate_lagrangian(kepler2d.lagrangian, start, 10.0 * ELLIPTIC_PERIOD, rtol=1e-10, atol=1e-12,
                                samples=400)
    monitors = {k: v for k, v in kepler2d.jet_monitors().items() if k in ("J_v12", "A1", "A2", "E_rest")}
    report = drift_report(traj, monitors, 1e-6)
    assert report.passed, report.to_dict()

    traj = integrate_lagrangian(havas.lagrangian, JetPoint(0.0, (0.0,), (1.0,)), 3.0, rtol=1e-10, atol=1e-12,
                                samples=61)
    report = drift_report(traj, {"J_frame": havas.jet_monitors()["J_frame"]}, 1e-6)
    assert report.passed
    assert report["J_frame"].initial == pytest.approx(0.5, abs=1e-12)
    for t, (q, qt) in zip(traj.times, traj.states):
        assert q == pytest.approx(1.0 - math.exp(-t), abs=1e-8)
        closed = 0.5 * math.exp(t) * qt * (qt + q)
        assert closed == pytest.approx(0.5, abs=1e-8)


def test_runge_lenz_in_both_pictures(kepler2d, kepler3d, rng):
    for system in (kepler2d, kepler3d):
        assert run_check(system, "kepler-lagrangian", samples=50, tol=1e-9, seed=14).passed
    for _ in range(50):
        at = random_phase_point(rng, 2)
        for name in ("A1", "A2"):
            assert abs(iom_residual(kepler2d.hamiltonian, kepler2d.integrals[name], at)) <= 1e-10

    start = PhasePoint(0.0, (1.0, 0.0), (0.0, 0.8))
    traj = integrate_hamiltonian(kepler2d.hamiltonian, start, 10.0 * ELLIPTIC_PERIOD, rtol=1e-10, atol=1e-12,
                                 samples=400)
    assert drift_report(traj, kepler2d.phase_monitors(), 1e-6).passed


@pytest.mark.parametrize("name", ["kepler2d", "havas", "quadratic_frame"])
def test_inverse_noether_recovers_integrals(request, name):
    report = run_check(request.getfixturevalue(name), "inverse-noether", samples=1000, tol=1e-12, seed=15)
    assert report.passed, report.to_json()


def test_poisson_algebra(rng):
    frame = phase_frame(2)
    f = ScalarField.from_text("q1*p2^2 + sin(q2)*p1", frame)
    g = ScalarField.from_text("exp(0.3*q1)*p1 - t*q2*p2", frame)
    h = ScalarField.from_text("q1^2*q2 + p1*p2", frame)
    fg = ScalarField(frame, lambda m: f.evaluate(m) * g.evaluate(m))
    for _ in range(25):
        at = random_phase_point(rng, 2)
        assert abs(poisson_bracket_V(f, g, at) + poisson_bracket_V(g, f, at)) <= 1e-10
        leibniz = (poisson_bracket_V(fg, h, at)
                   - f.evaluate(at) * poisson_bracket_V(g, h, at) - g.evaluate(at) * poisson_bracket_V(f, h, at))
        scale = max(1.0, abs(poisson_bracket_V(fg, h, at)))
        assert abs(leibniz) <= 1e-10 * scale
        assert flow_commutator_residual(f, g, at) <= 1e-8 * max(1.0, abs(poisson_bracket_V(f, g, at)))

        ext = ExtendedPhasePoint(at.t, at.q, at.p, 0.7)
        f_ext, g_ext = f.on_frame(extended_frame(2)), g.on_frame(extended_frame(2))
        expected = poisson_bracket_V(f, g, at)
        assert poisson_bracket_T(f_ext, g_ext, ext) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_kepler_identities(kepler2d):
    report = run_check(kepler2d, "casimir", samples=2000, tol=1e-12, seed=16)
    assert report.passed, report.to_json()


@pytest.mark.parametrize("check", ["brackets-so3", "brackets-so21"])
def test_lie_algebra_structure(kepler2d, check):
    assert run_check(kepler2d, check, samples=200, tol=1e-9, seed=17).passed


def test_elliptic_action_angle_over_ten_periods(kepler2d, elliptic_point):
    assert kepler.invariants(elliptic_point).e == pytest.approx(0.36)
    traj = integrate_hamiltonian(kepler2d.hamiltonian, elliptic_point, 10.0 * ELLIPTIC_PERIOD,
                                 rtol=1e-12, atol=1e-14, samples=401)
    t, alpha, action, x1, gamma = np.array(kepler.orbit_table(traj)).T
    for column in (action, x1, gamma):
        assert np.max(np.abs(column - column[0])) <= 1e-6
    assert np.max(np.abs(np.diff(alpha) / np.diff(t) - 1.0)) <= 1e-6


def test_hyperbolic_arc(kepler2d):
    start = PhasePoint(0.0, (1.0, 0.0), (2.0, 1.0))
    traj = integrate_hamiltonian(kepler2d.hamiltonian, start, 5.0, rtol=1e-12, atol=1e-14, samples=101)
    t, tau, action, x1, lam = np.array(kepler.orbit_table(traj)).T
    for column in (action, x1, lam):
        assert np.max(np.abs(column - column[0])) <= 1e-6
    # with the -1 orientation tau advances with time
    assert np.max(np.abs(np.diff(tau) / np.diff(t) - 1.0)) <= 1e-6


def test_chart_is_darboux_in_both_regions(kepler2d):
    report = run_check(kepler2d, "bivector", samples=100, tol=1e-6, seed=18)
    assert report.passed, report.to_json()


def test_lagrange_and_hamilton_trajectories_agree(kepler2d, elliptic_point):
    lsys = kepler2d.lagrangian
    jet = legendre_inverse(lsys, elliptic_point)
    assert np.allclose(momenta(lsys, jet), elliptic_point.p, atol=1e-12, rtol=0.0)
    ham = integrate_hamiltonian(kepler2d.hamiltonian, elliptic_point, ELLIPTIC_PERIOD, rtol=1e-12, atol=1e-14,
                                samples=50)
    lag = integrate_lagrangian(lsys, jet, ELLIPTIC_PERIOD, rtol=1e-12, atol=1e-14, samples=50)
    assert np.max(np.abs(ham.states[:, :2] - lag.states[:, :2])) <= 1e-8
    for k in range(len(lag)):
        assert np.allclose(momenta(lsys, lag.point(k)), ham.states[k, 2:], atol=1e-8, rtol=0.0)


def test_integrator_convergence(kepler2d, circular_point):
    traj = integrate_hamiltonian(kepler2d.hamiltonian, circular_point, 2.0 * math.pi, rtol=1e-12, atol=1e-14,
                                 samples=2)
    assert np.max(np.abs(traj.states[-1] - circular_point.state())) <= 1e-8

    drifts = []
    start = PhasePoint(0.0, (1.0, 0.0), (0.0, 0.8))
    for rtol in (1e-8, 1e-10, 1e-12):
        traj = integrate_hamiltonian(kepler2d.hamiltonian, start, 10.0 * ELLIPTIC_PERIOD, rtol=rtol,
                                     atol=rtol * 1e-2, samples=200)
        drifts.append(drift_report(traj, {"H": kepler2d.hamiltonian.H}, 1.0)["H"].max_abs_drift)
    assert drifts[0] > drifts[1] > drifts[2]
