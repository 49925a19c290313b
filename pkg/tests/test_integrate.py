import math

import numpy as np
import pytest

from diffcore import ScalarField
from errors import ConfigError, NumericError
from geometry import JetPoint, PhasePoint, phase_frame
from integrate import HAMILTONIAN, LAGRANGIAN, dopri5, drift_report, integrate_hamiltonian, integrate_lagrangian


def test_exponential_decay_with_dense_output():
    times, states, accepted, rejected = dopri5(lambda t, y: -y, 0.0, [1.0], 3.0, 1e-10, 1e-12, samples=31)
    assert times[0] == 0.0 and times[-1] == 3.0
    assert np.allclose(states[:, 0], np.exp(-times), rtol=0, atol=1e-9)
    assert accepted > 0


def test_backward_integration_keeps_integration_order():
    times, states, _, _ = dopri5(lambda t, y: np.array([math.cos(t)]), 2.0, [math.sin(2.0)], 0.0, 1e-10, 1e-12,
                                 samples=5)
    assert times[0] == 2.0 and times[-1] == 0.0
    assert np.allclose(states[:, 0], np.sin(times), atol=1e-9)


def test_blow_up_reports_numeric_failure():
    with pytest.raises(NumericError):
        dopri5(lambda t, y: y * y, 0.0, [1.0], 2.0, 1e-8, 1e-10, samples=3)


def test_bad_arguments():
    with pytest.raises(ConfigError):
        dopri5(lambda t, y: y, 0.0, [1.0], 0.0, 1e-8, 1e-10)
    with pytest.raises(ConfigError):
        dopri5(lambda t, y: y, 0.0, [1.0], 1.0, 1e-8, 1e-10, samples=1)
    with pytest.raises(ConfigError):
        dopri5(lambda t, y: y, 0.0, [1.0], 1.0, -1.0, 1e-10)


def test_steps_that_leave_the_domain_are_rejected():
    # sqrt domain ends at y = 0; the exact solution (1 - t/2)^2 stays inside until t = 2
    def rhs(t, y):
        if y[0] < 0:
            from errors import DomainError
            raise DomainError("negative radicand")
        return np.array([-math.sqrt(y[0])])

    times, states, _, _ = dopri5(rhs, 0.0, [1.0], 1.5, 1e-10, 1e-12, samples=4)
    assert np.allclose(states[:, 0], (1.0 - times / 2.0) ** 2, atol=1e-8)


def test_circular_orbit_closes(kepler2d, circular_point):
    traj = integrate_hamiltonian(kepler2d.hamiltonian, circular_point, 2.0 * math.pi, rtol=1e-12, atol=1e-14,
                                 samples=50)
    assert traj.kind == HAMILTONIAN
    assert np.max(np.abs(traj.states[-1] - traj.states[0])) <= 1e-8
    assert traj.final.t == pytest.approx(2.0 * math.pi)
    assert traj.column_names() == ["t", "q1", "q2", "p1", "p2"]


def test_havas_analytic_solution(havas):
    traj = integrate_lagrangian(havas.lagrangian, JetPoint(0.0, (0.0,), (1.0,)), 3.0, samples=61)
    assert traj.kind == LAGRANGIAN
    assert traj.final.q[0] == pytest.approx(1.0 - math.exp(-3.0), abs=1e-8)
    assert np.allclose(traj.states[:, 1], np.exp(-traj.times), atol=1e-8)
    report = drift_report(traj, havas.jet_monitors(), 1e-8)
    assert report["E_frame_closed"].passed
    assert report["J_frame"].max_abs_drift <= 1e-8


def test_drift_report_flags_non_integrals(oscillator):
    traj = integrate_hamiltonian(oscillator.hamiltonian, PhasePoint(0.0, (1.0,), (0.0,)), 3.0, samples=20)
    monitors = {"H": oscillator.hamiltonian.H, "q1": ScalarField.from_text("q1", phase_frame(1))}
    report = drift_report(traj, monitors, 1e-8)
    assert report["H"].passed
    assert not report["q1"].passed
    assert not report.passed
    data = report.to_dict()
    assert [q["name"] for q in data["quantities"]] == ["H", "q1"]


def test_free_particle_moves_linearly(free_particle):
    traj = integrate_hamiltonian(free_particle.hamiltonian, PhasePoint(0.0, (0.0, 1.0), (1.0, -0.5)), 2.0,
                                 samples=5)
    for k, t in enumerate(traj.times):
        assert np.allclose(traj.states[k], [t, 1.0 - 0.5 * t, 1.0, -0.5], atol=1e-12)
