"""
MPC-Service: geschlossene Regelkreise für Algorithmus 1, 2 und 3

Algorithmus 1 (MultiStep):          OCP-1 alle M Schritte, M Eingänge anwenden
Algorithmus 2 (ShrinkingUpdated):   OCP-1 bei s = 0, sonst OCP-2_{M−s}; je ein Eingang
Algorithmus 3 (Classic):            OCP-3 mit Horizont N in jedem Schritt
"""

import logging
import time
from typing import List, Optional

import numpy as np

from core.exceptions import (
    HorizonError, InfeasibleStateError, MpcInfeasibleError, MpcSolverError, NonFiniteStateError,
    OcpInfeasibleError, SolverFailureError
)
from models.closed_loop import (
    Algorithm, ClosedLoopConfig, ClosedLoopResult, SolveDiagnostics, WarmStartPolicy
)
from models.lyapunov import FsCLF
from models.ocp import Classic, Contractive, OcpSolution, OcpSpec, Shrinking
from models.system import ControlSystem
from models.trajectory import ControlSequence, Trajectory
from services.ocp_service import OcpService
from services.solver.nlp import SolverConfig

logger = logging.getLogger(__name__)

# Diagnose-Status, wenn OCP-2ⱼ durch den Rest der Zykluslösung ersetzt wurde
TAIL_FALLBACK = 'tail_fallback'


class _LoopRecorder:
    """Sammelt Zustände, Eingänge und Solve-Protokolle eines Laufs"""

    def __init__(self, initial_state: np.ndarray):
        self.states: List[np.ndarray] = [np.array(initial_state, dtype=float)]
        self.inputs: List[np.ndarray] = []
        self.diagnostics: List[SolveDiagnostics] = []
        self.solve_index: List[int] = []

    @property
    def time(self) -> int:
        return len(self.inputs)

    @property
    def state(self) -> np.ndarray:
        return self.states[-1]

    def apply(self, system_true: ControlSystem, u: np.ndarray) -> None:
        t = self.time
        x_next = system_true.transition(self.state, u, t)
        if not np.all(np.isfinite(x_next)):
            raise NonFiniteStateError(t + 1)
        self.states.append(np.asarray(x_next, dtype=float))
        self.inputs.append(np.array(u, dtype=float))
        self.solve_index.append(len(self.diagnostics) - 1)


class MpcService:
    """
    Führt die drei MPC-Varianten auf dem wahren System aus;
    vorhergesagt wird immer auf dem nominalen System.
    """

    def __init__(self, ocp_service: Optional[OcpService] = None):
        self.ocp = ocp_service or OcpService()
        self.logger = logger

    def run(
        self,
        config: ClosedLoopConfig,
        system_true: ControlSystem,
        system_nominal: ControlSystem,
        fsclf: FsCLF,
        initial_state
    ) -> ClosedLoopResult:
        """Verteilt nach config.algorithm"""
        if config.algorithm == Algorithm.MULTI_STEP:
            return self.run_multistep(system_true, system_nominal, fsclf, initial_state,
                                      config.total_steps, config)
        if config.algorithm == Algorithm.SHRINKING_UPDATED:
            return self.run_shrinking(system_true, system_nominal, fsclf, initial_state,
                                      config.total_steps, config)
        if config.algorithm == Algorithm.CLASSIC:
            return self.run_classic(system_true, system_nominal, fsclf, initial_state,
                                    config.horizon, config.total_steps, config)
        return self.open_loop(system_true, fsclf, initial_state, config.total_steps, config)

    # ========================================================================
    # ALGORITHMUS 1
    # ========================================================================

    def run_multistep(
        self,
        system_true: ControlSystem,
        system_nominal: ControlSystem,
        fsclf: FsCLF,
        initial_state,
        T: int,
        config: Optional[ClosedLoopConfig] = None
    ) -> ClosedLoopResult:
        """
        Algorithmus 1: OCP-1 zu den Zeiten kM, danach M Eingänge offen anwenden

        Warmstart bei shift_previous: vorige Lösung um M verschoben. Jeder
        Zyklus verbraucht alle M Eingänge, beide Strategien starten daher
        mit der Nullfolge.

        Returns:
            ClosedLoopResult mit ⌈T/M⌉ Solves

        Raises:
            MpcInfeasibleError: OCP-1 auch nach Wiederholung unzulässig
            MpcSolverError: Solver versagt auch nach Wiederholung
        """
        M = fsclf.M
        config = self._config(config, Algorithm.MULTI_STEP, M, T)
        self._log_start(config, system_true)
        recorder = _LoopRecorder(initial_state)
        previous: Optional[OcpSolution] = None
        cycle = 0
        while recorder.time < T:
            spec = OcpSpec(system_nominal, fsclf, recorder.state, Contractive(M), recorder.time)
            if config.warm_start_policy == WarmStartPolicy.SHIFT_PREVIOUS and previous is not None:
                guess = previous.controls.shifted(M)
            else:
                guess = ControlSequence.zeros(M, system_nominal.input_dim)
            previous = self._solve(spec, config.solver, guess, recorder, cycle, 0)
            for s in range(min(M, T - recorder.time)):
                recorder.apply(system_true, previous.controls.inputs[s])
            cycle += 1
        return self._result(config, fsclf, recorder, M)

    # ========================================================================
    # ALGORITHMUS 2
    # ========================================================================

    def run_shrinking(
        self,
        system_true: ControlSystem,
        system_nominal: ControlSystem,
        fsclf: FsCLF,
        initial_state,
        T: int,
        config: Optional[ClosedLoopConfig] = None
    ) -> ClosedLoopResult:
        """
        Algorithmus 2: in jedem Schritt neu lösen, Horizont schrumpft M, M−1, …, 1

        Der Anker Ṽ = V(x(kM)) bleibt über den Zyklus fest. Der Warmstart
        bei s > 0 ist der Rest der vorigen Lösung.

        Bleibt OCP-2ⱼ bei s > 0 auch nach Wiederholung unzulässig, wird der
        nächste Eingang aus dem Rest der OCP-1-Lösung des Zyklus genommen
        (Abschneiden der Zykluslösung) und eine Warnung protokolliert.

        Raises:
            MpcInfeasibleError: OCP-1 zu Zyklusbeginn auch nach Wiederholung unzulässig
            MpcSolverError: Solver versagt zu Zyklusbeginn auch nach Wiederholung
        """
        M = fsclf.M
        config = self._config(config, Algorithm.SHRINKING_UPDATED, M, T)
        self._log_start(config, system_true)
        recorder = _LoopRecorder(initial_state)
        anchor = 0.0
        previous: Optional[OcpSolution] = None
        cycle_solution: Optional[OcpSolution] = None
        m = system_nominal.input_dim

        for t in range(T):
            cycle, s = divmod(t, M)
            xi = recorder.state
            if s == 0:
                anchor = fsclf.value(xi)
                spec = OcpSpec(system_nominal, fsclf, xi, Contractive(M), t)
                previous = self._solve(spec, config.solver, ControlSequence.zeros(M, m), recorder, cycle, s)
                cycle_solution = previous
            else:
                if config.warm_start_policy == WarmStartPolicy.SHIFT_PREVIOUS and previous is not None:
                    guess = previous.controls.tail(1)
                else:
                    guess = ControlSequence.zeros(M - s, m)
                spec = OcpSpec(system_nominal, fsclf, xi, Shrinking(M - s, anchor), t)
                started = time.perf_counter()
                try:
                    previous = self._solve(spec, config.solver, guess, recorder, cycle, s)
                except (MpcInfeasibleError, MpcSolverError) as error:
                    previous = self._tail_fallback(spec, cycle_solution, recorder, cycle, s, started, error)
            recorder.apply(system_true, previous.controls.inputs[0])

        return self._result(config, fsclf, recorder, M)

    # ========================================================================
    # ALGORITHMUS 3
    # ========================================================================

    def run_classic(
        self,
        system_true: ControlSystem,
        system_nominal: ControlSystem,
        fsclf: FsCLF,
        initial_state,
        N: int,
        T: int,
        config: Optional[ClosedLoopConfig] = None
    ) -> ClosedLoopResult:
        """
        Algorithmus 3: OCP-3 mit Horizont N in jedem Schritt, ersten Eingang anwenden

        Warmstart: vorige Lösung um einen Schritt verschoben, Null angehängt.
        """
        config = self._config(config, Algorithm.CLASSIC, N, T)
        self._log_start(config, system_true)
        recorder = _LoopRecorder(initial_state)
        previous: Optional[OcpSolution] = None
        m = system_nominal.input_dim

        for t in range(T):
            if config.warm_start_policy == WarmStartPolicy.SHIFT_PREVIOUS and previous is not None:
                guess = previous.controls.shifted()
            else:
                guess = ControlSequence.zeros(N, m)
            spec = OcpSpec(system_nominal, fsclf, recorder.state, Classic(N), t)
            previous = self._solve(spec, config.solver, guess, recorder, t, 0)
            recorder.apply(system_true, previous.controls.inputs[0])

        return self._result(config, fsclf, recorder, fsclf.M)

    def open_loop(
        self,
        system_true: ControlSystem,
        fsclf: FsCLF,
        initial_state,
        T: int,
        config: Optional[ClosedLoopConfig] = None
    ) -> ClosedLoopResult:
        """Offener Kreis mit u ≡ 0"""
        config = self._config(config, Algorithm.OPEN_LOOP, fsclf.M, T)
        recorder = _LoopRecorder(initial_state)
        zero = np.zeros(system_true.input_dim)
        for _ in range(T):
            recorder.apply(system_true, zero)
        return self._result(config, fsclf, recorder, fsclf.M)

    # ========================================================================
    # HILFSFUNKTIONEN
    # ========================================================================

    @staticmethod
    def _config(
        config: Optional[ClosedLoopConfig],
        algorithm: Algorithm,
        horizon: int,
        T: int
    ) -> ClosedLoopConfig:
        if T < 1:
            raise HorizonError(f"T muss >= 1 sein, erhalten: {T}")
        if config is None:
            return ClosedLoopConfig(algorithm=algorithm, horizon=horizon, total_steps=T)
        if config.algorithm != algorithm:
            raise ValueError(f"Konfiguration für {config.algorithm.value}, erwartet {algorithm.value}")
        if config.horizon != horizon:
            raise HorizonError(f"Horizont {config.horizon} passt nicht zu {horizon}")
        if config.total_steps != T:
            return ClosedLoopConfig(config.algorithm, config.horizon, T, config.solver,
                                    config.warm_start_policy)
        return config

    def _log_start(self, config: ClosedLoopConfig, system: ControlSystem) -> None:
        self.logger.info(
            f"Starte {config.algorithm.value} (Horizont {config.horizon}, "
            f"T={config.total_steps}) auf System '{system.name}'"
        )

    def _solve(
        self,
        spec: OcpSpec,
        solver_config: SolverConfig,
        guess: ControlSequence,
        recorder: _LoopRecorder,
        cycle: int,
        step: int
    ) -> OcpSolution:
        """
        Ein OCP lösen; bei Misserfolg einmal mit gelockerter Konfiguration
        und Null-Startwert wiederholen

        Raises:
            MpcInfeasibleError: OCP unzulässig oder Messzustand außerhalb von X
            MpcSolverError: Solver versagt auch bei der Wiederholung
        """
        started = time.perf_counter()
        retried = False
        t = spec.initial_time
        try:
            try:
                solution = self.ocp.solve_ocp(spec, solver_config, guess)
            except (OcpInfeasibleError, SolverFailureError) as first_error:
                retried = True
                self.logger.warning(
                    f"OCP bei t={t} fehlgeschlagen ({first_error}), "
                    f"Wiederholung mit gelockerter Konfiguration"
                )
                zeros = ControlSequence.zeros(spec.horizon, spec.system.input_dim)
                solution = self.ocp.solve_ocp(spec, solver_config.relaxed(), zeros)
        except OcpInfeasibleError as error:
            self.logger.error(f"OCP bei t={t} endgültig unzulässig (Residuum {error.max_residual:.3e})")
            raise MpcInfeasibleError(cycle, step, t, error.max_residual) from error
        except InfeasibleStateError as error:
            violation = float(np.max(spec.system.state_set.violations(spec.initial_state), initial=0.0))
            self.logger.error(f"Messzustand bei t={t} außerhalb der Zustandsmenge ({error})")
            raise MpcInfeasibleError(cycle, step, t, violation) from error
        except SolverFailureError as error:
            self.logger.error(f"Solver bei t={t} auch nach Wiederholung gescheitert ({error})")
            raise MpcSolverError(cycle, step, t, str(error)) from error

        self._record(recorder, spec, solution, cycle, step, started, retried)
        return solution

    def _tail_fallback(
        self,
        spec: OcpSpec,
        cycle_solution: OcpSolution,
        recorder: _LoopRecorder,
        cycle: int,
        step: int,
        started: float,
        error: Exception
    ) -> OcpSolution:
        """Rest der OCP-1-Lösung des Zyklus ab Schritt `step` als Lösung von OCP-2_{M−step}"""
        self.logger.warning(
            f"OCP-2 bei t={spec.initial_time} nicht lösbar ({error}), "
            f"Rest der Zykluslösung ab Schritt {step} wird angewandt"
        )
        controls = cycle_solution.controls.tail(step)
        predicted = self.ocp.dynamics.rollout(
            spec.system.nominal(), spec.initial_state, controls, spec.initial_time
        )
        fsclf = spec.fsclf
        residual = max(0.0, fsclf.value(predicted.final_state) - spec.contraction_target)
        solution = OcpSolution(
            controls=controls,
            predicted=predicted,
            cost=float(sum(fsclf.value(x) for x in predicted.states[:-1])),
            contraction_residual=residual,
            status=cycle_solution.status,
            outer_iterations=0,
            inner_iterations=0,
            max_residual=residual
        )
        self._record(recorder, spec, solution, cycle, step, started, retried=True, fallback=True)
        return solution

    @staticmethod
    def _record(
        recorder: _LoopRecorder,
        spec: OcpSpec,
        solution: OcpSolution,
        cycle: int,
        step: int,
        started: float,
        retried: bool,
        fallback: bool = False
    ) -> None:
        recorder.diagnostics.append(SolveDiagnostics(
            time=spec.initial_time,
            cycle=cycle,
            step_in_cycle=step,
            horizon=spec.horizon,
            status=TAIL_FALLBACK if fallback else solution.status.value,
            outer_iterations=solution.outer_iterations,
            inner_iterations=solution.inner_iterations,
            contraction_residual=solution.contraction_residual,
            max_residual=solution.max_residual,
            cost=solution.cost,
            wall_time=time.perf_counter() - started,
            retried=retried,
            initial_state=tuple(float(v) for v in spec.initial_state),
            fallback=fallback
        ))

    def _result(
        self,
        config: ClosedLoopConfig,
        fsclf: FsCLF,
        recorder: _LoopRecorder,
        cycle_length: int
    ) -> ClosedLoopResult:
        states = np.array(recorder.states)
        inputs = np.array(recorder.inputs).reshape(len(recorder.inputs), -1)
        trajectory = Trajectory(states=states, inputs=inputs)
        v_values = np.array([fsclf.value(x) for x in states])
        result = ClosedLoopResult(
            config=config,
            trajectory=trajectory,
            v_values=v_values,
            diagnostics=tuple(recorder.diagnostics),
            solve_index=tuple(recorder.solve_index),
            cycle_length=cycle_length
        )
        self.logger.info(
            f"{config.label} beendet: {len(recorder.diagnostics)} Solves, "
            f"V(x(T))={v_values[-1]:.6e}, Rechenzeit {result.wall_time_total:.2f} s"
        )
        return result
