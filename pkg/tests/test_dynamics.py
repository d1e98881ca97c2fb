"""
Tests des Dynamik-Service: Simulation, Jacobi-Matrizen, K-Beschränktheit
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.exceptions import DimensionError, NonFiniteStateError, SampleError
from models.lyapunov import MeasurementFunction
from models.system import ControlSystem
from models.trajectory import ControlSequence
from services.solver.gradients import finite_diff_gradient


def test_one_step_nominal(dynamics, nominal_system, xi):
    traj = dynamics.rollout(nominal_system, xi, ControlSequence.zeros(1, 1))
    assert_allclose(traj.states[1], [0.0, 2.0, 1.5])


def test_equilibrium(dynamics, nominal_system):
    traj = dynamics.rollout(nominal_system, np.zeros(3), ControlSequence.zeros(5, 1))
    assert_array_equal(traj.states, np.zeros((6, 3)))


def test_disturbance_phase_follows_start_time(dynamics, perturbed_system):
    zero = np.zeros(3)
    at_zero = dynamics.rollout(perturbed_system, zero, ControlSequence.zeros(1, 1), start_time=0)
    at_four = dynamics.rollout(perturbed_system, zero, ControlSequence.zeros(1, 1), start_time=4)
    assert_allclose(at_zero.states[1], [0.0, 0.0, 0.0])
    assert_allclose(at_four.states[1], [0.1 * np.sin(1.0), 0.0, 0.0])
    assert at_four.states[1][0] == pytest.approx(0.08415, abs=1e-5)
    assert_array_equal(at_four.times, [4, 5])


def test_input_enters_third_component(dynamics, nominal_system, xi):
    traj = dynamics.rollout(nominal_system, xi, ControlSequence.from_vector([-1.5, 0.0], 1))
    assert_allclose(traj.states[1], [0.0, 2.0, 0.0])
    assert_allclose(traj.states[2], [2.0, 2.0, 0.0])


def test_rollout_is_deterministic(dynamics, perturbed_system, xi):
    controls = ControlSequence.from_vector(np.linspace(-1.0, 1.0, 12), 1)
    first = dynamics.rollout(perturbed_system, xi, controls, start_time=3)
    second = dynamics.rollout(perturbed_system, xi, controls, start_time=3)
    assert first.states.tobytes() == second.states.tobytes()


@pytest.mark.parametrize('start_time', [0, 7])
def test_rollout_composes(dynamics, perturbed_system, xi, start_time):
    u = np.linspace(-1.0, 1.0, 8)
    whole = dynamics.rollout(perturbed_system, xi, ControlSequence.from_vector(u, 1), start_time)
    head = dynamics.rollout(perturbed_system, xi, ControlSequence.from_vector(u[:3], 1), start_time)
    rest = dynamics.rollout(perturbed_system, head.final_state, ControlSequence.from_vector(u[3:], 1),
                            start_time + 3)
    assert_array_equal(whole.states[:4], head.states)
    assert_array_equal(whole.states[3:], rest.states)
    assert_array_equal(rest.times, whole.times[3:])


def test_dimension_errors(dynamics, nominal_system):
    with pytest.raises(DimensionError):
        dynamics.rollout(nominal_system, [1.0, 2.0], ControlSequence.zeros(1, 1))
    with pytest.raises(DimensionError):
        dynamics.rollout(nominal_system, np.zeros(3), ControlSequence.zeros(1, 2))


def test_non_finite_state_reports_step(dynamics):
    system = ControlSystem.linear([[1e200]], [[0.0]])
    with pytest.raises(NonFiniteStateError) as info:
        with np.errstate(over='ignore'):
            dynamics.rollout(system, [1e200], ControlSequence.zeros(3, 1))
    assert info.value.step == 1
    with pytest.raises(NonFiniteStateError):
        dynamics.rollout(system, [np.inf], ControlSequence.zeros(1, 1))


def test_eval_V(dynamics, example_fsclf, xi):
    assert dynamics.eval_V(example_fsclf, xi) == pytest.approx(3.0)
    with pytest.raises(DimensionError):
        dynamics.eval_V(example_fsclf, [1.0])


def test_jacobians_linear(dynamics, nominal_system, xi):
    A, B = dynamics.jacobians(nominal_system, xi, np.zeros(1))
    assert_array_equal(A, nominal_system.A)
    assert_array_equal(B, nominal_system.B)


def test_jacobians_finite_differences(dynamics):
    system = ControlSystem(
        state_dim=1,
        input_dim=1,
        nominal_map=lambda x, u: np.array([x[0] ** 2 + np.sin(u[0])])
    )
    A, B = dynamics.jacobians(system, np.array([2.0]), np.array([0.0]))
    assert_allclose(A, [[4.0]], rtol=1e-6)
    assert_allclose(B, [[1.0]], rtol=1e-6)


class TestFiniteDifferences:

    def test_square(self):
        assert_allclose(finite_diff_gradient(lambda x: float(x[0] ** 2), np.array([3.0])), [6.0], atol=1e-6)

    def test_constant(self):
        assert_array_equal(finite_diff_gradient(lambda x: 4.2, np.ones(3)), np.zeros(3))

    def test_quadratic_form(self, example_fsclf, xi):
        assert_allclose(finite_diff_gradient(example_fsclf.value, xi), [-1.5, 2.5, 2.0], atol=1e-6)


class TestKBoundedness:

    @staticmethod
    def _sphere_samples(n, m, count=50, seed=0, input_scale=0.0):
        rng = np.random.default_rng(seed)
        samples = []
        for _ in range(count):
            x = rng.standard_normal(n)
            x /= np.linalg.norm(x)
            u = input_scale * rng.standard_normal(m)
            samples.append((x, u))
        return samples

    def test_identity_map(self, dynamics):
        system = ControlSystem(state_dim=2, input_dim=1, nominal_map=lambda x, u: x)
        norm2 = MeasurementFunction.euclidean_norm(2)
        norm1 = MeasurementFunction.euclidean_norm(1)
        report = dynamics.check_K_bounded(system, norm2, norm1, self._sphere_samples(2, 1, input_scale=1.0))
        assert report.bounded
        assert report.kappa1.slope == pytest.approx(1.0, abs=1e-9)
        assert report.kappa2.slope == pytest.approx(0.0, abs=1e-9)

    def test_input_map(self, dynamics):
        system = ControlSystem(state_dim=1, input_dim=1, nominal_map=lambda x, u: np.array(u))
        norm = MeasurementFunction.euclidean_norm(1)
        rng = np.random.default_rng(3)
        samples = [(rng.standard_normal(1), rng.standard_normal(1)) for _ in range(40)]
        report = dynamics.check_K_bounded(system, norm, norm, samples)
        assert report.bounded
        assert report.kappa1.slope == pytest.approx(0.0, abs=1e-9)
        assert report.kappa2.slope == pytest.approx(1.0, abs=1e-9)

    def test_example_system_against_operator_norm(self, dynamics, nominal_system):
        norm3 = MeasurementFunction.euclidean_norm(3)
        norm1 = MeasurementFunction.euclidean_norm(1)
        samples = self._sphere_samples(3, 1, count=200, seed=11)
        report = dynamics.check_K_bounded(nominal_system, norm3, norm1, samples)
        assert report.bounded
        observed = max(np.linalg.norm(nominal_system.A @ x) for x, _ in samples)
        spectral = np.linalg.norm(nominal_system.A, 2)
        assert report.kappa1.slope >= observed - 1e-9
        assert report.kappa1.slope <= spectral + 1e-9

    def test_degenerate_sample_is_violation(self, dynamics):
        system = ControlSystem(state_dim=1, input_dim=1, nominal_map=lambda x, u: x + 1.0)
        norm = MeasurementFunction.euclidean_norm(1)
        report = dynamics.check_K_bounded(system, norm, norm, [(np.zeros(1), np.zeros(1))])
        assert not report.bounded
        assert report.violating_samples == (0,)

    def test_empty_samples(self, dynamics, nominal_system):
        norm = MeasurementFunction.euclidean_norm(3)
        with pytest.raises(SampleError):
            dynamics.check_K_bounded(nominal_system, norm, MeasurementFunction.euclidean_norm(1), [])
