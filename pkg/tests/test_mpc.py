"""
Tests der geschlossenen Regelkreise (Algorithmus 1, 2, 3 und offener Kreis)
"""

import logging

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from core.exceptions import (
    HorizonError, MpcInfeasibleError, MpcSolverError, OcpInfeasibleError, SolverFailureError
)
from models.closed_loop import Algorithm, ClosedLoopConfig, WarmStartPolicy
from models.constraint_set import ConstraintSet
from models.lyapunov import FsCLF, MeasurementFunction
from models.ocp import Contractive, Shrinking
from models.system import ControlSystem
from services.analysis_service import AnalysisService
from services.mpc_service import TAIL_FALLBACK, MpcService
from services.ocp_service import OcpService
from services.solver.nlp import SolverConfig

WINDOW_START = 36


@pytest.fixture(scope='module')
def mpc():
    return MpcService()


@pytest.fixture(scope='module')
def nominal_multistep(mpc, nominal_system, example_fsclf, xi):
    return mpc.run_multistep(nominal_system, nominal_system, example_fsclf, xi, 60)


@pytest.fixture(scope='module')
def nominal_shrinking(mpc, nominal_system, example_fsclf, xi):
    return mpc.run_shrinking(nominal_system, nominal_system, example_fsclf, xi, 60)


@pytest.fixture(scope='module')
def perturbed_runs(mpc, perturbed_system, nominal_system, example_fsclf, xi):
    return {
        'multistep': mpc.run_multistep(perturbed_system, nominal_system, example_fsclf, xi, 100),
        'shrinking': mpc.run_shrinking(perturbed_system, nominal_system, example_fsclf, xi, 100),
        'classic': mpc.run_classic(perturbed_system, nominal_system, example_fsclf, xi, 6, 100),
    }


class TestMultiStep:

    def test_contraction_chain(self, nominal_multistep):
        anchors = nominal_multistep.cycle_anchors
        assert len(anchors) == 11
        for k, value in enumerate(anchors):
            assert value <= 0.9 ** k * 3.0 + 1e-5
        for previous, current in zip(anchors, anchors[1:]):
            assert current <= 0.9 * previous + 1e-6

    def test_converges(self, nominal_multistep):
        assert np.linalg.norm(nominal_multistep.trajectory.final_state) < 1e-2

    def test_one_solve_per_cycle(self, nominal_multistep):
        assert len(nominal_multistep.diagnostics) == 10
        assert nominal_multistep.solve_index == tuple(t // 6 for t in range(60))
        assert [d.time for d in nominal_multistep.diagnostics] == list(range(0, 60, 6))
        assert all(d.horizon == 6 for d in nominal_multistep.diagnostics)
        assert nominal_multistep.diagnostic_for_step(60) is None

    def test_result_shapes(self, nominal_multistep, xi):
        assert nominal_multistep.trajectory.states.shape == (61, 3)
        assert nominal_multistep.applied_inputs.inputs.shape == (60, 1)
        assert_array_equal(nominal_multistep.trajectory.states[0], xi)
        assert nominal_multistep.v_values[0] == pytest.approx(3.0)

    def test_partial_last_cycle(self, mpc, nominal_system, example_fsclf, xi):
        result = mpc.run_multistep(nominal_system, nominal_system, example_fsclf, xi, 8)
        assert result.total_steps == 8
        assert len(result.diagnostics) == 2

    def test_zero_state_stays_at_origin(self, mpc, nominal_system, example_fsclf):
        result = mpc.run_multistep(nominal_system, nominal_system, example_fsclf, np.zeros(3), 12)
        assert_array_equal(result.trajectory.states, np.zeros((13, 3)))
        assert_array_equal(result.applied_inputs.inputs, np.zeros((12, 1)))
        assert np.all(result.v_values == 0.0)

    def test_converse_decay_with_V_as_omega(self, nominal_multistep, example_fsclf):
        omega = MeasurementFunction('V', example_fsclf.value, np.zeros(3))
        report = AnalysisService.converse_decay_check(nominal_multistep, omega, 6)
        assert report.satisfied
        assert report.lambda_hat <= 0.9 + 1e-6


class TestShrinkingUpdated:

    def test_one_solve_per_step(self, nominal_shrinking):
        diagnostics = nominal_shrinking.diagnostics
        assert len(diagnostics) == 60
        assert [d.horizon for d in diagnostics[:6]] == [6, 5, 4, 3, 2, 1]
        assert [d.step_in_cycle for d in diagnostics[:7]] == [0, 1, 2, 3, 4, 5, 0]

    def test_contraction_chain(self, nominal_shrinking):
        for k, value in enumerate(nominal_shrinking.cycle_anchors):
            assert value <= 0.9 ** k * 3.0 + 1e-5

    def test_coincides_with_multistep_on_nominal_system(self, nominal_multistep, nominal_shrinking):
        distance = nominal_multistep.trajectory.max_distance(nominal_shrinking.trajectory)
        assert distance <= 1e-4

    def test_tighter_tolerances_shrink_gap(self, mpc, nominal_system, example_fsclf, xi):
        def gap(solver):
            multistep = mpc.run_multistep(nominal_system, nominal_system, example_fsclf, xi, 60,
                                          ClosedLoopConfig(Algorithm.MULTI_STEP, 6, 60, solver))
            shrinking = mpc.run_shrinking(
                nominal_system, nominal_system, example_fsclf, xi, 60,
                ClosedLoopConfig(Algorithm.SHRINKING_UPDATED, 6, 60, solver, WarmStartPolicy.ZEROS)
            )
            return multistep.trajectory.max_distance(shrinking.trajectory)

        loose = SolverConfig(optimality_tol=1e-4)
        loose_gap = gap(loose)
        tight_gap = gap(loose.tightened(1e4))
        assert loose_gap > 0.0
        assert tight_gap < loose_gap

    def test_zero_state(self, mpc, nominal_system, example_fsclf):
        result = mpc.run_shrinking(nominal_system, nominal_system, example_fsclf, np.zeros(3), 7)
        assert_array_equal(result.trajectory.states, np.zeros((8, 3)))

    def test_box_constraints_hold_in_closed_loop(self, mpc):
        system = ControlSystem.linear(
            [[1.2, 1.0], [0.0, 1.0]], [[0.0], [1.0]],
            state_set=ConstraintSet.box([-5.0, -np.inf], [5.0, np.inf]),
            input_set=ConstraintSet.box([-1.0], [1.0])
        )
        fsclf = FsCLF.quadratic(np.eye(2), 0.8, 4)
        result = mpc.run_shrinking(system, system, fsclf, [0.5, -0.5], 40)
        assert result.applied_inputs.is_admissible(system.input_set)
        for x in result.trajectory.states:
            assert system.state_set.contains(x, 1e-6)
        for k, value in enumerate(result.cycle_anchors):
            assert value <= 0.8 ** k * 0.5 + 1e-5


class TestClassic:

    def test_nominal_convergence(self, mpc, nominal_system, example_fsclf, xi):
        result = mpc.run_classic(nominal_system, nominal_system, example_fsclf, xi, 6, 40)
        assert result.v_values[-1] < 1e-2
        assert len(result.diagnostics) == 40
        assert all(d.contraction_residual == 0.0 for d in result.diagnostics)

    def test_zero_state(self, mpc, nominal_system, example_fsclf):
        result = mpc.run_classic(nominal_system, nominal_system, example_fsclf, np.zeros(3), 3, 5)
        assert_array_equal(result.trajectory.states, np.zeros((6, 3)))


class TestPerturbedComparison:
    """Abweichung von x1 nach dem Einschwingen (t ≥ 36)"""

    @staticmethod
    def _deviation(result):
        return AnalysisService.max_deviation_post_transient(result, 0, WINDOW_START)

    def test_reoptimization_reduces_deviation(self, perturbed_runs):
        multistep = self._deviation(perturbed_runs['multistep'])
        shrinking = self._deviation(perturbed_runs['shrinking'])
        classic = self._deviation(perturbed_runs['classic'])
        assert multistep > shrinking
        assert multistep > classic
        assert (multistep - shrinking) / multistep >= 0.25

    def test_trajectories_stay_bounded(self, perturbed_runs):
        for result in perturbed_runs.values():
            assert np.all(np.isfinite(result.trajectory.states))
            assert np.max(np.abs(result.trajectory.states[WINDOW_START:])) < 10.0

    def test_disturbance_moves_multistep_off_nominal(self, perturbed_runs, nominal_multistep):
        perturbed = perturbed_runs['multistep'].trajectory.states[:61]
        assert np.max(np.abs(perturbed - nominal_multistep.trajectory.states)) > 1e-3

    def test_runs_complete(self, perturbed_runs):
        solves = {'multistep': 17, 'shrinking': 100, 'classic': 100}
        for name, result in perturbed_runs.items():
            assert result.total_steps == 100
            assert len(result.diagnostics) == solves[name]
        assert all(d.step_in_cycle > 0 for d in perturbed_runs['shrinking'].diagnostics if d.fallback)

    def test_solves_start_from_measured_state(self, perturbed_runs):
        for result in perturbed_runs.values():
            for d in result.diagnostics:
                assert_array_equal(d.initial_state, result.trajectory.states[d.time])

    @pytest.mark.parametrize('window_start', [48, 60])
    def test_deviation_settles_after_transient(self, perturbed_runs, window_start):
        result = perturbed_runs['multistep']
        reference = self._deviation(result)
        later = AnalysisService.max_deviation_post_transient(result, 0, window_start)
        assert later == pytest.approx(reference, rel=0.05)


class TestOpenLoop:

    def test_diverges(self, mpc, nominal_system, example_fsclf, xi):
        result = mpc.open_loop(nominal_system, example_fsclf, xi, 20)
        assert result.diagnostics == ()
        assert_array_equal(result.applied_inputs.inputs, np.zeros((20, 1)))
        assert result.v_values[-1] > 100.0 * result.v_values[0]


def _infeasible():
    return OcpInfeasibleError("erzwungen", residuals=(0.5,))


class _ScriptedOcpService(OcpService):
    """
    Wirft die vorgegebenen Fehler der Reihe nach, danach normal

    Mit `only` zählen nur OCPs dieser Variante; OCP-1-Lösungen werden gesammelt.
    """

    def __init__(self, errors, only=None):
        super().__init__()
        self.errors = list(errors)
        self.only = only
        self.configs = []
        self.warm_starts = []
        self.cycle_solutions = []

    def solve_ocp(self, spec, config=None, warm_start=None):
        self.configs.append(config)
        self.warm_starts.append(warm_start)
        if self.errors and (self.only is None or isinstance(spec.variant, self.only)):
            raise self.errors.pop(0)
        solution = super().solve_ocp(spec, config, warm_start)
        if isinstance(spec.variant, Contractive):
            self.cycle_solutions.append(solution)
        return solution


class _LastStepInfeasibleOcpService(_ScriptedOcpService):
    """OCP-2 mit j = 1 ist immer unzulässig"""

    def __init__(self):
        super().__init__([])

    def solve_ocp(self, spec, config=None, warm_start=None):
        if isinstance(spec.variant, Shrinking) and spec.variant.j == 1:
            raise _infeasible()
        return super().solve_ocp(spec, config, warm_start)


class TestRetry:

    def test_single_failure_is_retried(self, nominal_system, example_fsclf, xi, caplog):
        ocp = _ScriptedOcpService([_infeasible()])
        mpc = MpcService(ocp)
        with caplog.at_level(logging.WARNING):
            result = mpc.run_multistep(nominal_system, nominal_system, example_fsclf, xi, 6)
        assert result.diagnostics[0].retried
        assert ocp.configs[1].max_outer_iters == 2 * ocp.configs[0].max_outer_iters
        assert any('Wiederholung' in record.getMessage() for record in caplog.records)

    def test_second_failure_raises(self, nominal_system, example_fsclf, xi):
        mpc = MpcService(_ScriptedOcpService([_infeasible() for _ in range(10)]))
        with pytest.raises(MpcInfeasibleError) as info:
            mpc.run_shrinking(nominal_system, nominal_system, example_fsclf, xi, 6)
        assert info.value.cycle == 0
        assert info.value.step == 0
        assert info.value.time == 0
        assert info.value.best_residual == pytest.approx(0.5)
        assert info.value.exit_code == 3

    def test_solver_failure_on_retry_carries_position(self, nominal_system, example_fsclf, xi):
        mpc = MpcService(_ScriptedOcpService([_infeasible(), SolverFailureError("Iterationsgrenze erreicht")]))
        with pytest.raises(MpcSolverError) as info:
            mpc.run_multistep(nominal_system, nominal_system, example_fsclf, xi, 6)
        assert (info.value.cycle, info.value.step, info.value.time) == (0, 0, 0)
        assert 'Iterationsgrenze' in info.value.reason
        assert info.value.exit_code == 4

    def test_classic_solver_failure(self, nominal_system, example_fsclf, xi):
        errors = [SolverFailureError("erzwungen"), SolverFailureError("erzwungen")]
        mpc = MpcService(_ScriptedOcpService(errors))
        with pytest.raises(MpcSolverError) as info:
            mpc.run_classic(nominal_system, nominal_system, example_fsclf, xi, 3, 4)
        assert info.value.time == 0
        assert info.value.exit_code == 4

    def test_measured_state_outside_X(self, mpc):
        system = ControlSystem.linear(
            [[1.2, 1.0], [0.0, 1.0]], [[0.0], [1.0]],
            state_set=ConstraintSet.box([-5.0, -np.inf], [5.0, np.inf])
        )
        fsclf = FsCLF.quadratic(np.eye(2), 0.8, 4)
        with pytest.raises(MpcInfeasibleError) as info:
            mpc.run_multistep(system, system, fsclf, [6.0, 0.0], 8)
        assert (info.value.cycle, info.value.step, info.value.time) == (0, 0, 0)
        assert info.value.best_residual == pytest.approx(1.0)
        assert info.value.exit_code == 3


class TestTailFallback:

    @pytest.fixture
    def fallback_run(self, nominal_system, example_fsclf, xi, caplog):
        ocp = _LastStepInfeasibleOcpService()
        with caplog.at_level(logging.WARNING):
            result = MpcService(ocp).run_shrinking(nominal_system, nominal_system, example_fsclf, xi, 12)
        return ocp, result

    def test_run_completes(self, fallback_run):
        _, result = fallback_run
        assert result.total_steps == 12
        assert len(result.diagnostics) == 12
        assert result.cycle_anchors[1] <= 0.9 * 3.0 + 1e-6

    def test_fallback_diagnostics(self, fallback_run):
        _, result = fallback_run
        fallbacks = [d for d in result.diagnostics if d.fallback]
        assert [d.time for d in fallbacks] == [5, 11]
        for d in fallbacks:
            assert d.status == TAIL_FALLBACK
            assert d.retried
            assert d.horizon == 1
            assert d.contraction_residual == 0.0
            assert d.to_dict()['fallback']

    def test_cycle_tail_is_applied(self, fallback_run):
        ocp, result = fallback_run
        assert len(ocp.cycle_solutions) == 2
        for cycle, solution in enumerate(ocp.cycle_solutions):
            assert_array_equal(result.applied_inputs.inputs[6 * cycle + 5], solution.controls.inputs[5])

    def test_warning_is_logged(self, fallback_run, caplog):
        assert any('Rest der Zykluslösung' in record.getMessage() for record in caplog.records)

    def test_solver_failure_mid_cycle(self, nominal_system, example_fsclf, xi):
        errors = [SolverFailureError("erzwungen"), SolverFailureError("erzwungen")]
        mpc = MpcService(_ScriptedOcpService(errors, only=Shrinking))
        result = mpc.run_shrinking(nominal_system, nominal_system, example_fsclf, xi, 6)
        assert [d.fallback for d in result.diagnostics] == [False, True, False, False, False, False]

    def test_failure_at_cycle_start_still_raises(self, nominal_system, example_fsclf, xi):
        errors = [_infeasible(), _infeasible()]
        mpc = MpcService(_ScriptedOcpService(errors, only=Contractive))
        with pytest.raises(MpcInfeasibleError):
            mpc.run_shrinking(nominal_system, nominal_system, example_fsclf, xi, 6)


class TestWarmStart:

    def test_multistep_uses_shifted_previous_solution(self, nominal_system, example_fsclf, xi):
        ocp = _ScriptedOcpService([])
        MpcService(ocp).run_multistep(nominal_system, nominal_system, example_fsclf, xi, 18)
        assert len(ocp.warm_starts) == 3
        for guess, previous in zip(ocp.warm_starts[1:], ocp.cycle_solutions):
            assert_array_equal(guess.inputs, previous.controls.shifted(6).inputs)

    def test_multistep_policies_agree(self, mpc, nominal_system, example_fsclf, xi):
        runs = [
            mpc.run_multistep(nominal_system, nominal_system, example_fsclf, xi, 18,
                              ClosedLoopConfig(Algorithm.MULTI_STEP, 6, 18, warm_start_policy=policy))
            for policy in WarmStartPolicy
        ]
        assert_array_equal(runs[0].trajectory.states, runs[1].trajectory.states)

    def test_shrinking_uses_tail_of_previous_solution(self, nominal_system, example_fsclf, xi):
        ocp = _ScriptedOcpService([])
        MpcService(ocp).run_shrinking(nominal_system, nominal_system, example_fsclf, xi, 3)
        assert ocp.warm_starts[1].length == 5
        assert ocp.warm_starts[2].length == 4


class TestConfiguration:

    def test_horizon_mismatch(self, mpc, nominal_system, example_fsclf, xi):
        config = ClosedLoopConfig(Algorithm.MULTI_STEP, horizon=5, total_steps=6)
        with pytest.raises(HorizonError):
            mpc.run_multistep(nominal_system, nominal_system, example_fsclf, xi, 6, config)

    def test_algorithm_mismatch(self, mpc, nominal_system, example_fsclf, xi):
        config = ClosedLoopConfig(Algorithm.CLASSIC, horizon=6, total_steps=6)
        with pytest.raises(ValueError):
            mpc.run_multistep(nominal_system, nominal_system, example_fsclf, xi, 6, config)

    def test_non_positive_T(self, mpc, nominal_system, example_fsclf, xi):
        with pytest.raises(HorizonError):
            mpc.run_multistep(nominal_system, nominal_system, example_fsclf, xi, 0)

    def test_run_dispatches_by_algorithm(self, mpc, nominal_system, example_fsclf, xi):
        config = ClosedLoopConfig(Algorithm.CLASSIC, horizon=3, total_steps=5)
        result = mpc.run(config, nominal_system, nominal_system, example_fsclf, xi)
        assert result.config.label == 'Classic-3'
        assert len(result.diagnostics) == 5
        assert all(d.horizon == 3 for d in result.diagnostics)
