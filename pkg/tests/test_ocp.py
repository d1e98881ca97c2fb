"""
Tests der Optimalsteuerungsprobleme OCP-1, OCP-2ⱼ und OCP-3
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.exceptions import (
    DimensionError, HorizonError, InfeasibleStateError, OcpInfeasibleError, SolverFailureError
)
from models.constraint_set import ConstraintSet
from models.lyapunov import FsCLF
from models.ocp import Classic, Contractive, OcpSpec, Shrinking
from models.system import ControlSystem
from models.trajectory import ControlSequence
from services.solver.gradients import finite_diff_gradient
from services.solver.nlp import SolverConfig, SolverStatus


@pytest.fixture
def ocp1_solution(ocp_service, nominal_system, example_fsclf, xi):
    spec = OcpSpec(nominal_system, example_fsclf, xi, Contractive(6))
    return ocp_service.solve_ocp(spec)


def _box_system():
    return ControlSystem.linear(
        [[1.2, 1.0], [0.0, 1.0]], [[0.0], [1.0]],
        state_set=ConstraintSet.box([-5.0, -np.inf], [5.0, np.inf]),
        input_set=ConstraintSet.box([-1.0], [1.0])
    )


class TestOcp1:

    def test_contraction_satisfied(self, ocp1_solution, xi):
        assert ocp1_solution.status.is_feasible
        assert ocp1_solution.contraction_residual <= 1e-6
        assert ocp1_solution.predicted.states.shape == (7, 3)
        assert_array_equal(ocp1_solution.predicted.states[0], xi)
        final_V = ocp1_solution.predicted.states[6] @ np.array(
            [[1.0, 0.0, 0.25], [0.0, 1.0, 0.25], [0.25, 0.25, 1.0]]
        ) @ ocp1_solution.predicted.states[6]
        assert final_V <= 0.9 * 3.0 + 1e-6

    def test_last_input_minimizes_terminal_value(self, ocp1_solution):
        a, b, c = ocp1_solution.predicted.final_state
        assert c == pytest.approx(-(a + b) / 4.0, abs=1e-6)

    def test_residual_is_clamped(self, ocp1_solution):
        assert ocp1_solution.contraction_residual == 0.0
        assert ocp1_solution.max_residual == 0.0

    def test_cost_includes_initial_term(self, ocp1_solution):
        assert ocp1_solution.cost >= 3.0

    def test_zero_state(self, ocp_service, nominal_system, example_fsclf):
        spec = OcpSpec(nominal_system, example_fsclf, np.zeros(3), Contractive(6))
        solution = ocp_service.solve_ocp(spec)
        assert solution.cost == 0.0
        assert_array_equal(solution.controls.inputs, np.zeros((6, 1)))
        assert solution.contraction_residual == 0.0

    def test_warm_start_at_solution(self, ocp_service, ocp1_solution, nominal_system, example_fsclf, xi):
        spec = OcpSpec(nominal_system, example_fsclf, xi, Contractive(6))
        again = ocp_service.solve_ocp(spec, warm_start=ocp1_solution.controls)
        assert again.status.is_feasible
        assert again.cost <= ocp1_solution.cost + 1e-7

    def test_small_state_keeps_relative_accuracy(self, ocp_service, nominal_system, example_fsclf, xi):
        """Lösung skaliert linear mit dem Zustand"""
        config = SolverConfig(feasibility_tol=1e-8, optimality_tol=1e-9)
        big = ocp_service.solve_ocp(OcpSpec(nominal_system, example_fsclf, xi / 2.0, Contractive(6)), config)
        small = ocp_service.solve_ocp(OcpSpec(nominal_system, example_fsclf, xi * 1e-6, Contractive(6)), config)
        assert_allclose(small.controls.inputs * 5e5, big.controls.inputs, rtol=1e-4, atol=1e-6)
        v0 = example_fsclf.value(xi * 1e-6)
        assert example_fsclf.value(small.predicted.final_state) <= 0.9 * v0 * (1.0 + 1e-6)

    def test_horizon_must_match_M(self, ocp_service, nominal_system, example_fsclf, xi):
        with pytest.raises(HorizonError):
            ocp_service.build_ocp1(OcpSpec(nominal_system, example_fsclf, xi, Contractive(5)))

    def test_dimension_mismatch(self, ocp_service, nominal_system, example_fsclf):
        with pytest.raises(DimensionError):
            ocp_service.solve_ocp(OcpSpec(nominal_system, example_fsclf, np.zeros(2), Contractive(6)))

    def test_warm_start_shape(self, ocp_service, nominal_system, example_fsclf, xi):
        spec = OcpSpec(nominal_system, example_fsclf, xi, Contractive(6))
        with pytest.raises(DimensionError):
            ocp_service.solve_ocp(spec, warm_start=ControlSequence.zeros(5, 1))

    def test_state_outside_X(self, ocp_service):
        system = _box_system()
        fsclf = FsCLF.quadratic(np.eye(2), 0.8, 4)
        with pytest.raises(InfeasibleStateError):
            ocp_service.solve_ocp(OcpSpec(system, fsclf, np.array([6.0, 0.0]), Contractive(4)))

    def test_infeasible_contraction(self, ocp_service):
        system = ControlSystem.linear([[2.0]], [[1.0]], input_set=ConstraintSet.box([-0.1], [0.1]))
        fsclf = FsCLF.quadratic(np.eye(1), 0.5, 1)
        with pytest.raises((OcpInfeasibleError, SolverFailureError)) as info:
            ocp_service.solve_ocp(OcpSpec(system, fsclf, np.array([1.0]), Contractive(1)))
        assert info.value.result is not None
        assert not info.value.result.status.is_feasible

    def test_box_constraints_respected(self, ocp_service):
        system = _box_system()
        fsclf = FsCLF.quadratic(np.eye(2), 0.8, 4)
        solution = ocp_service.solve_ocp(OcpSpec(system, fsclf, np.array([2.0, 0.5]), Contractive(4)))
        assert solution.controls.is_admissible(system.input_set)
        for x in solution.predicted.states:
            assert system.state_set.contains(x, 1e-6)
        assert solution.max_residual <= 1e-6


class TestOcp2:

    def test_truncated_tail_is_feasible(self, ocp_service, ocp1_solution, nominal_system, example_fsclf):
        for j in range(1, 7):
            state, tail = ocp_service.truncate_tail(ocp1_solution, j)
            assert tail.length == j
            spec = OcpSpec(nominal_system, example_fsclf, state, Shrinking(j, 3.0), 6 - j)
            rollout = ocp_service.dynamics.rollout(nominal_system, state, tail)
            assert example_fsclf.value(rollout.final_state) <= spec.contraction_target + 1e-6

    def test_warm_started_tail_is_not_worsened(self, ocp_service, ocp1_solution, nominal_system, example_fsclf):
        state, tail = ocp_service.truncate_tail(ocp1_solution, 4)
        spec = OcpSpec(nominal_system, example_fsclf, state, Shrinking(4, 3.0), 2)
        tail_cost = sum(example_fsclf.value(x) for x in ocp_service.dynamics.rollout(
            nominal_system, state, tail).states[:4])
        solution = ocp_service.solve_ocp(spec, warm_start=tail)
        assert solution.contraction_residual <= 1e-6
        assert solution.cost <= tail_cost + 1e-6 * max(1.0, tail_cost)

    def test_single_remaining_step(self, ocp_service, ocp1_solution, nominal_system, example_fsclf):
        state = ocp1_solution.predicted.states[5]
        spec = OcpSpec(nominal_system, example_fsclf, state, Shrinking(1, 3.0), 5)
        solution = ocp_service.solve_ocp(spec)
        assert solution.controls.inputs.shape == (1, 1)
        assert solution.contraction_residual <= 1e-6
        a, b, c = solution.predicted.final_state
        assert c == pytest.approx(-(a + b) / 4.0, abs=1e-6)

    def test_full_length_equals_ocp1(self, ocp_service, ocp1_solution, nominal_system, example_fsclf, xi):
        spec = OcpSpec(nominal_system, example_fsclf, xi, Shrinking(6, 3.0))
        solution = ocp_service.solve_ocp(spec)
        assert solution.cost == pytest.approx(ocp1_solution.cost, abs=1e-6)

    def test_truncate_range(self, ocp_service, ocp1_solution):
        with pytest.raises(HorizonError):
            ocp_service.truncate_tail(ocp1_solution, 0)
        with pytest.raises(HorizonError):
            ocp_service.truncate_tail(ocp1_solution, 7)

    def test_remaining_length_above_M(self, ocp_service, nominal_system, example_fsclf, xi):
        with pytest.raises(HorizonError):
            ocp_service.build_ocp2(OcpSpec(nominal_system, example_fsclf, xi, Shrinking(7, 3.0)))


class TestOcp3:

    def test_horizon_one_is_V(self, ocp_service, nominal_system, example_fsclf, xi):
        assert ocp_service.optimal_value_VN(nominal_system, example_fsclf, xi, 1) == pytest.approx(3.0)

    def test_horizon_six(self, ocp_service, nominal_system, example_fsclf, xi):
        solution = ocp_service.solve_ocp(OcpSpec(nominal_system, example_fsclf, xi, Classic(6)))
        assert solution.status == SolverStatus.OPTIMAL
        assert solution.contraction_residual == 0.0
        assert solution.max_residual == 0.0
        assert np.isfinite(solution.cost)
        assert solution.cost >= 3.0

    def test_zero_state(self, ocp_service, nominal_system, example_fsclf):
        for N in (1, 3, 6):
            assert ocp_service.optimal_value_VN(nominal_system, example_fsclf, np.zeros(3), N) == 0.0

    def test_value_function_nondecreasing_in_N(self, ocp_service, nominal_system, example_fsclf):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            state = rng.standard_normal(3)
            values = [ocp_service.optimal_value_VN(nominal_system, example_fsclf, state, N)
                      for N in range(1, 9)]
            assert values[0] == pytest.approx(example_fsclf.value(state), rel=1e-14)
            for previous, current in zip(values, values[1:]):
                assert current >= previous - 1e-6 * max(1.0, previous)


class TestAnalyticGradients:
    """Adjungierte Gradienten gegen zentrale Differenzen"""

    @staticmethod
    def _check(problem, points):
        for z in points:
            fd = finite_diff_gradient(problem.cost, z)
            scale = max(1.0, float(np.max(np.abs(fd))))
            assert_allclose(problem.cost_gradient(z), fd, rtol=1e-4, atol=1e-5 * scale)
            for c, grad in zip(problem.inequality_constraints, problem.constraint_gradients):
                fd = finite_diff_gradient(c, z)
                scale = max(1.0, float(np.max(np.abs(fd))))
                assert_allclose(grad(z), fd, rtol=1e-4, atol=1e-5 * scale)

    def test_example_problems(self, ocp_service, nominal_system, example_fsclf, xi):
        rng = np.random.default_rng(5)
        specs = [
            OcpSpec(nominal_system, example_fsclf, xi, Contractive(6)),
            OcpSpec(nominal_system, example_fsclf, xi * 0.1, Shrinking(3, 3.0)),
            OcpSpec(nominal_system, example_fsclf, xi, Classic(4)),
            OcpSpec(nominal_system, example_fsclf, xi * 0.01, Contractive(6)),
        ]
        for spec in specs:
            problem = ocp_service.build(spec)
            self._check(problem, [rng.standard_normal(problem.dim) for _ in range(25)])

    def test_box_problem_with_state_constraints(self, ocp_service):
        system = _box_system()
        fsclf = FsCLF.quadratic(np.array([[2.0, 0.5], [0.5, 1.0]]), 0.8, 4)
        problem = ocp_service.build(OcpSpec(system, fsclf, np.array([1.0, -2.0]), Contractive(4)))
        assert problem.num_constraints == 1 + 2 * 4
        rng = np.random.default_rng(9)
        self._check(problem, [rng.uniform(-1.0, 1.0, problem.dim) for _ in range(20)])

    def test_terminal_problem(self, ocp_service, nominal_system, example_fsclf, xi):
        problem = ocp_service.build_terminal_problem(OcpSpec(nominal_system, example_fsclf, xi, Contractive(3)))
        rng = np.random.default_rng(13)
        self._check(problem, [rng.standard_normal(problem.dim) for _ in range(20)])


def test_best_terminal_ratio_reaches_zero_for_controllable_horizon(ocp_service, nominal_system, xi):
    fsclf = FsCLF.quadratic(np.array([[1.0, 0.0, 0.25], [0.0, 1.0, 0.25], [0.25, 0.25, 1.0]]), 0.9, 3)
    ratio = ocp_service.best_terminal_ratio(OcpSpec(nominal_system, fsclf, xi, Contractive(3)))
    assert 0.0 <= ratio <= 1e-6
