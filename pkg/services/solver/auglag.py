"""
Augmented-Lagrangian-Verfahren (PHR) für NLPs mit Ungleichungen und Box-Grenzen

Äußere Schleife: Multiplikator-Update λ ← max(0, λ + ρ·c(z)), Strafparameter ρ
wächst bei unzureichender Abnahme des Residuums. Innere Schleife: projiziertes
BFGS mit Armijo-Backtracking auf der Box.
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np

from core.exceptions import DimensionError, NonFiniteEvaluationError
from services.solver.nlp import (
    IterationRecord, NlpProblem, SolverConfig, SolverResult, SolverStatus
)

logger = logging.getLogger(__name__)

Merit = Callable[[np.ndarray], Tuple[float, np.ndarray]]

# Ein Kandidat gilt als "Residuum gestiegen" erst oberhalb dieser Schwelle
RESIDUAL_SLACK = 1e-12
# Residuum muss pro äußerer Iteration mindestens um diesen Faktor fallen
SUFFICIENT_DECREASE = 0.25


def _max_residual(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    return float(max(np.max(values), 0.0))


def _projected_gradient_norm(z: np.ndarray, grad: np.ndarray, problem: NlpProblem) -> float:
    return float(np.max(np.abs(problem.project(z - grad) - z)))


class AugmentedLagrangianSolver:
    """
    Lokaler NLP-Solver

    Eigenschaften:
    - das Residuum der akzeptierten äußeren Iterierten fällt monoton
    - ist der Startwert zulässig, sind die Kosten der Lösung höchstens
      cost(Startwert) + optimality_tol
    - deterministisch, keine Zustände zwischen Aufrufen
    """

    def __init__(self):
        self.logger = logger

    def solve(
        self,
        problem: NlpProblem,
        config: Optional[SolverConfig] = None,
        initial_guess: Optional[np.ndarray] = None
    ) -> SolverResult:
        """
        Löst das NLP ausgehend vom Startwert

        Args:
            problem: NLP
            config: Toleranzen (Default: SolverConfig())
            initial_guess: Startwert (Default: Nullvektor), wird auf die Box projiziert

        Returns:
            SolverResult

        Raises:
            DimensionError: Startwert hat falsche Länge
            NonFiniteEvaluationError: Kosten oder Restriktionen am Startwert nicht endlich
        """
        config = config or SolverConfig()
        if initial_guess is None:
            z = problem.project(np.zeros(problem.dim))
        else:
            z = np.array(initial_guess, dtype=float)
            if z.shape != (problem.dim,):
                raise DimensionError(
                    f"Startwert der Länge {problem.dim} erwartet, erhalten: {z.shape}"
                )
            z = problem.project(z)

        f = problem.evaluate_cost(z)
        c = problem.constraint_values(z)
        best = (z.copy(), f) if _max_residual(c) <= config.feasibility_tol else None
        # Der Startwert zählt nicht als akzeptierte Iterierte
        accepted_residual = np.inf

        lam = np.zeros(problem.num_constraints)
        rho = config.initial_penalty
        trace = []
        total_inner = 0
        inner_ok = False
        cap_reached = False
        stationarity = np.inf
        outer = 0

        while outer < config.max_outer_iters:
            outer += 1
            merit = self._merit_function(problem, lam, rho, config.fd_step)
            candidate, inner_iters, cand_stationarity, cand_ok = self._minimize_box(
                merit, z, problem, config
            )
            total_inner += inner_iters
            c_candidate = problem.constraint_values(candidate)
            candidate_residual = _max_residual(c_candidate)

            if candidate_residual > accepted_residual + RESIDUAL_SLACK:
                rho *= config.penalty_growth
                self.logger.debug(
                    f"[{problem.name}] Iteration {outer} verworfen: Residuum "
                    f"{candidate_residual:.3e} > {accepted_residual:.3e}, ρ={rho:.1e}"
                )
                if rho > config.max_penalty:
                    cap_reached = True
                    break
                continue

            previous_residual = accepted_residual
            z, c = candidate, c_candidate
            accepted_residual = candidate_residual
            inner_ok = cand_ok
            stationarity = cand_stationarity
            f = problem.evaluate_cost(z)
            trace.append(IterationRecord(outer, f, accepted_residual, rho, inner_iters))
            self.logger.debug(
                f"[{problem.name}] Iteration {outer}: f={f:.6e}, "
                f"Residuum={accepted_residual:.3e}, ρ={rho:.1e}, innere={inner_iters}"
            )

            if accepted_residual <= config.feasibility_tol:
                if best is None or f <= best[1]:
                    best = (z.copy(), f)
                if inner_ok:
                    break

            lam = np.maximum(0.0, lam + rho * c)
            if (accepted_residual > config.feasibility_tol
                    and accepted_residual > SUFFICIENT_DECREASE * previous_residual):
                rho *= config.penalty_growth
                if rho > config.max_penalty:
                    cap_reached = True
                    break

        final_cost = problem.evaluate_cost(z)
        if accepted_residual <= config.feasibility_tol:
            status = SolverStatus.OPTIMAL if inner_ok else SolverStatus.FEASIBLE_SUBOPTIMAL
            if best is not None and best[1] + config.optimality_tol < final_cost:
                z, final_cost = best
                status = SolverStatus.FEASIBLE_SUBOPTIMAL
        elif best is not None:
            z, final_cost = best
            status = SolverStatus.FEASIBLE_SUBOPTIMAL
        elif not inner_ok and not cap_reached:
            status = SolverStatus.MAX_ITERS
        else:
            status = SolverStatus.INFEASIBLE

        residuals = np.maximum(problem.constraint_values(z), 0.0)
        self.logger.debug(
            f"[{problem.name}] Ende: Status={status.value}, f={final_cost:.6e}, "
            f"Residuum={_max_residual(residuals):.3e}, äußere={outer}, innere={total_inner}"
        )
        return SolverResult(
            solution=z,
            cost_value=final_cost,
            constraint_residuals=residuals,
            status=status,
            outer_iterations=outer,
            inner_iterations=total_inner,
            stationarity=float(stationarity),
            trace=tuple(trace)
        )

    # ========================================================================
    # AUGMENTED LAGRANGIAN
    # ========================================================================

    @staticmethod
    def _merit_function(problem: NlpProblem, lam: np.ndarray, rho: float, fd_step: float) -> Merit:
        """
        L(z) = f(z) + 1/(2ρ) Σ [max(0, λ_i + ρ c_i(z))² − λ_i²]
        """

        def merit(z: np.ndarray) -> Tuple[float, np.ndarray]:
            value = problem.evaluate_cost(z)
            grad = problem.cost_grad(z, fd_step)
            if problem.num_constraints:
                c = problem.constraint_values(z)
                shifted = np.maximum(0.0, lam + rho * c)
                value += float(np.sum(shifted ** 2 - lam ** 2)) / (2.0 * rho)
                for i in np.flatnonzero(shifted > 0.0):
                    grad = grad + shifted[i] * problem.constraint_grad(i, z, fd_step)
            if not np.all(np.isfinite(grad)):
                raise NonFiniteEvaluationError(f"Gradient von '{problem.name}' nicht endlich")
            return value, grad

        return merit

    # ========================================================================
    # INNERE SCHLEIFE: PROJIZIERTES BFGS
    # ========================================================================

    def _minimize_box(
        self,
        merit: Merit,
        z0: np.ndarray,
        problem: NlpProblem,
        config: SolverConfig
    ) -> Tuple[np.ndarray, int, float, bool]:
        """
        Returns:
            (z, Iterationen, projizierte Gradientennorm, konvergiert)
        """
        z = problem.project(z0)
        f, g = merit(z)
        n = z.size
        H = np.eye(n)
        scaled = False
        stationarity = _projected_gradient_norm(z, g, problem)

        for k in range(config.max_inner_iters):
            if stationarity <= config.optimality_tol:
                return z, k, stationarity, True

            # Aktive Grenzen mit nach außen zeigendem Gradienten festhalten
            free = ~(((z <= problem.lower) & (g > 0.0)) | ((z >= problem.upper) & (g < 0.0)))
            direction = np.zeros(n)
            direction[free] = -H[np.ix_(free, free)] @ g[free]
            steepest = False
            if not g @ direction < 0.0:
                H = np.eye(n)
                scaled = False
                direction = np.where(free, -g, 0.0)
                steepest = True

            step = self._line_search(merit, z, f, g, direction, stationarity, problem, config)
            if step is None and not steepest:
                H = np.eye(n)
                scaled = False
                direction = np.where(free, -g, 0.0)
                step = self._line_search(merit, z, f, g, direction, stationarity, problem, config)
            if step is None:
                return z, k + 1, stationarity, False

            z_new, f_new, g_new = step
            s = z_new - z
            y = g_new - g
            sy = float(s @ y)
            if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                if not scaled:
                    H = (sy / float(y @ y)) * np.eye(n)
                    scaled = True
                r = 1.0 / sy
                V = np.eye(n) - r * np.outer(s, y)
                H = V @ H @ V.T + r * np.outer(s, s)

            z, f, g = z_new, f_new, g_new
            stationarity = _projected_gradient_norm(z, g, problem)

        return z, config.max_inner_iters, stationarity, stationarity <= config.optimality_tol

    @staticmethod
    def _line_search(
        merit: Merit,
        z: np.ndarray,
        f: float,
        g: np.ndarray,
        direction: np.ndarray,
        stationarity: float,
        problem: NlpProblem,
        config: SolverConfig
    ):
        """
        Armijo-Backtracking entlang des projizierten Pfads

        Nahe am Optimum ist die Abnahme von f kleiner als die Rundung von f;
        dann wird ein Schritt auch akzeptiert, wenn f nur im Rundungsrahmen
        steigt und die projizierte Gradientennorm fällt.
        """
        rounding = 10.0 * np.finfo(float).eps * max(1.0, abs(f))
        t = 1.0
        while t > 1e-16:
            trial = problem.project(z + t * direction)
            s = trial - z
            if not np.any(s):
                return None
            try:
                f_trial, g_trial = merit(trial)
            except NonFiniteEvaluationError:
                t *= config.backtrack
                continue
            if f_trial <= f + config.armijo * float(g @ s):
                return trial, f_trial, g_trial
            if (f_trial - f <= rounding
                    and _projected_gradient_norm(trial, g_trial, problem) < stationarity):
                return trial, f_trial, g_trial
            t *= config.backtrack
        return None


def solve(
    problem: NlpProblem,
    config: Optional[SolverConfig] = None,
    initial_guess: Optional[np.ndarray] = None
) -> SolverResult:
    """Kurzform für AugmentedLagrangianSolver().solve(...)"""
    return AugmentedLagrangianSolver().solve(problem, config, initial_guess)
