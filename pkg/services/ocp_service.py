"""
OCP-Service: baut OCP-1, OCP-2ⱼ und OCP-3 als NLP (Single Shooting) und löst sie

Entscheidungsvariable ist die gestapelte Eingangsfolge (u(0), …, u(H−1)),
für kleine Zustände skaliert (siehe _ShootingModel).
Kosten Σ_{i=0}^{H−1} V(x(i)); Gradienten über die adjungierte Rekursion
p_H = w_H,  p_i = w_i + A_iᵀ p_{i+1},  ∂/∂u_k = B_kᵀ p_{k+1}.
"""

import logging
from typing import Callable, List, Optional, Tuple

import numpy as np

from core.exceptions import (
    DimensionError, HorizonError, InfeasibleStateError, OcpInfeasibleError, SolverFailureError
)
from models.lyapunov import FsCLF
from models.ocp import Classic, Contractive, OcpSolution, OcpSpec, Shrinking
from models.system import ControlSystem
from models.trajectory import ControlSequence
from services.dynamics_service import DynamicsService
from services.solver.auglag import AugmentedLagrangianSolver
from services.solver.gradients import finite_diff_gradient
from services.solver.nlp import NlpProblem, SolverConfig, SolverResult, SolverStatus

logger = logging.getLogger(__name__)


class _ShootingModel:
    """
    Vorhersage x(0..H) und Jacobi-Matrizen zu einer Eingangsfolge

    Das letzte Ergebnis wird zwischengespeichert, da Kosten, Restriktionen
    und Gradienten am selben Punkt ausgewertet werden.

    Für V(ξ) < 1 wird skaliert: Werte durch value_scale = V(ξ), Eingänge
    u = input_scale · z mit input_scale = sqrt(V(ξ)). Die Toleranzen des
    Solvers wirken dann relativ zur Zustandsgröße; absolute Residuen
    bleiben ≤ feasibility_tol.
    """

    def __init__(self, dynamics: DynamicsService, spec: OcpSpec, fd_step: float):
        self.dynamics = dynamics
        self.system = spec.system.nominal()
        self.fsclf = spec.fsclf
        self.xi = np.array(spec.initial_state, dtype=float)
        self.start_time = spec.initial_time
        self.horizon = spec.horizon
        self.m = self.system.input_dim
        self.fd_step = fd_step
        self.value_scale = value_scale(spec)
        self.input_scale = float(np.sqrt(self.value_scale))
        self._states_cache = (None, None)
        self._jac_cache = (None, None)

    def unpack(self, z: np.ndarray) -> np.ndarray:
        return self.input_scale * np.asarray(z, dtype=float).reshape(self.horizon, self.m)

    def states(self, z: np.ndarray) -> np.ndarray:
        key = np.asarray(z, dtype=float).tobytes()
        cached_key, cached = self._states_cache
        if cached_key == key:
            return cached
        states = self.dynamics.propagate(self.system, self.xi, self.unpack(z), self.start_time)
        self._states_cache = (key, states)
        return states

    def jacobians(self, z: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
        key = np.asarray(z, dtype=float).tobytes()
        cached_key, cached = self._jac_cache
        if cached_key == key:
            return cached
        states = self.states(z)
        U = self.unpack(z)
        jacs = [self.dynamics.jacobians(self.system, states[i], U[i]) for i in range(self.horizon)]
        self._jac_cache = (key, jacs)
        return jacs

    def v_gradient(self, x: np.ndarray) -> np.ndarray:
        grad = self.fsclf.gradient(x)
        if grad is None:
            grad = finite_diff_gradient(self.fsclf.value, x, self.fd_step)
        return grad

    def adjoint(self, z: np.ndarray, weights: Callable[[int, np.ndarray], Optional[np.ndarray]]) -> np.ndarray:
        """
        Gradient von Σ_i φ_i(x(i)) nach z, mit w_i = ∇φ_i(x(i)) = weights(i, x(i))
        """
        states = self.states(z)
        jacs = self.jacobians(z)
        grad = np.zeros((self.horizon, self.m))
        p = np.zeros(self.system.state_dim)
        w_H = weights(self.horizon, states[self.horizon])
        if w_H is not None:
            p = p + w_H
        for k in range(self.horizon - 1, -1, -1):
            A_k, B_k = jacs[k]
            grad[k] = B_k.T @ p
            if k == 0:
                break
            p = A_k.T @ p
            w_k = weights(k, states[k])
            if w_k is not None:
                p = p + w_k
        return self.input_scale * grad.ravel()


def value_scale(spec: OcpSpec) -> float:
    """min(1, V(ξ)); 1 für V(ξ) = 0"""
    v0 = spec.fsclf.value(spec.initial_state)
    return v0 if 0.0 < v0 < 1.0 else 1.0


class OcpService:
    """
    Baut und löst die Optimalsteuerungsprobleme
    """

    def __init__(
        self,
        dynamics: Optional[DynamicsService] = None,
        solver: Optional[AugmentedLagrangianSolver] = None
    ):
        self.dynamics = dynamics or DynamicsService()
        self.solver = solver or AugmentedLagrangianSolver()
        self.logger = logger

    # ========================================================================
    # BUILDER
    # ========================================================================

    def build_ocp1(self, spec: OcpSpec, fd_step: float = 1e-6) -> NlpProblem:
        """OCP-1: Horizont M, V(x(M)) ≤ α(V(ξ))"""
        if not isinstance(spec.variant, Contractive):
            raise TypeError("build_ocp1 erwartet Contractive{M}")
        if spec.variant.M != spec.fsclf.M:
            raise HorizonError(
                f"OCP-1-Horizont {spec.variant.M} passt nicht zu fsCLF-M {spec.fsclf.M}"
            )
        return self._build(spec, fd_step, f"OCP-1(M={spec.variant.M})")

    def build_ocp2(self, spec: OcpSpec, fd_step: float = 1e-6) -> NlpProblem:
        """OCP-2ⱼ: Horizont j ∈ [1, M], V(x(j)) ≤ α(Ṽ)"""
        if not isinstance(spec.variant, Shrinking):
            raise TypeError("build_ocp2 erwartet Shrinking{j, Ṽ}")
        if spec.variant.j > spec.fsclf.M:
            raise HorizonError(f"Restlänge j={spec.variant.j} > M={spec.fsclf.M}")
        return self._build(spec, fd_step, f"OCP-2(j={spec.variant.j})")

    def build_ocp3(self, spec: OcpSpec, fd_step: float = 1e-6) -> NlpProblem:
        """OCP-3: Horizont N, keine Kontraktionsbedingung"""
        if not isinstance(spec.variant, Classic):
            raise TypeError("build_ocp3 erwartet Classic{N}")
        return self._build(spec, fd_step, f"OCP-3(N={spec.variant.N})")

    def build(self, spec: OcpSpec, fd_step: float = 1e-6) -> NlpProblem:
        if isinstance(spec.variant, Contractive):
            return self.build_ocp1(spec, fd_step)
        if isinstance(spec.variant, Shrinking):
            return self.build_ocp2(spec, fd_step)
        return self.build_ocp3(spec, fd_step)

    def build_terminal_problem(self, spec: OcpSpec, fd_step: float = 1e-6) -> NlpProblem:
        """
        min V(x(H)) nur unter Mengenrestriktionen

        Liefert das bestmögliche Verhältnis V(x(H)) / V(ξ) für die Zertifizierung.
        """
        model = self._model(spec, fd_step)
        fsclf = spec.fsclf
        H = spec.horizon

        def cost(z):
            return fsclf.value(model.states(z)[H]) / model.value_scale

        def cost_gradient(z):
            grad = model.adjoint(z, lambda i, x: model.v_gradient(x) if i == H else None)
            return grad / model.value_scale

        constraints, gradients = self._state_constraints(spec, model)
        return self._problem(spec, model, f"Terminal(H={H})", cost, cost_gradient, constraints, gradients)

    def _model(self, spec: OcpSpec, fd_step: float) -> _ShootingModel:
        system = spec.system
        xi = spec.initial_state
        if xi.shape != (system.state_dim,):
            raise DimensionError(
                f"ξ der Länge {system.state_dim} erwartet, erhalten: {xi.shape}"
            )
        if spec.fsclf.state_dim != system.state_dim:
            raise DimensionError("fsCLF und System haben unterschiedliche Zustandsdimension")
        if not system.state_set.contains(xi):
            raise InfeasibleStateError(f"ξ = {xi.tolist()} liegt nicht in der Zustandsmenge")
        return _ShootingModel(self.dynamics, spec, fd_step)

    def _build(self, spec: OcpSpec, fd_step: float, name: str) -> NlpProblem:
        model = self._model(spec, fd_step)
        fsclf = spec.fsclf
        H = spec.horizon

        def cost(z):
            states = model.states(z)
            return float(sum(fsclf.value(states[i]) for i in range(H))) / model.value_scale

        def cost_gradient(z):
            grad = model.adjoint(z, lambda i, x: model.v_gradient(x) if 1 <= i < H else None)
            return grad / model.value_scale

        constraints, gradients = [], []
        target = spec.contraction_target
        if target is not None:
            def contraction(z):
                return (fsclf.value(model.states(z)[H]) - target) / model.value_scale

            def contraction_gradient(z):
                grad = model.adjoint(z, lambda i, x: model.v_gradient(x) if i == H else None)
                return grad / model.value_scale

            constraints.append(contraction)
            gradients.append(contraction_gradient)

        state_constraints, state_gradients = self._state_constraints(spec, model)
        constraints.extend(state_constraints)
        gradients.extend(state_gradients)
        return self._problem(spec, model, name, cost, cost_gradient, constraints, gradients)

    @staticmethod
    def _state_constraints(spec: OcpSpec, model: _ShootingModel):
        """x(i) ∈ X für i = 1..H als Komponenten-Ungleichungen"""
        state_set = spec.system.state_set
        constraints, gradients = [], []
        if state_set.is_unbounded:
            return constraints, gradients
        n = spec.system.state_dim
        for step in range(1, spec.horizon + 1):
            for comp in range(n):
                for sign, bound in ((1.0, state_set.upper[comp]), (-1.0, state_set.lower[comp])):
                    if not np.isfinite(bound):
                        continue

                    def constraint(z, step=step, comp=comp, sign=sign, bound=bound):
                        return sign * (model.states(z)[step][comp] - bound) / model.input_scale

                    def gradient(z, step=step, comp=comp, sign=sign):
                        unit = np.zeros(n)
                        unit[comp] = sign
                        grad = model.adjoint(z, lambda i, x: unit if i == step else None)
                        return grad / model.input_scale

                    constraints.append(constraint)
                    gradients.append(gradient)
        return constraints, gradients

    @staticmethod
    def _problem(spec, model, name, cost, cost_gradient, constraints, gradients) -> NlpProblem:
        system = spec.system
        H = spec.horizon
        lower = upper = None
        if not system.input_set.is_unbounded:
            lower = np.tile(system.input_set.lower, H) / model.input_scale
            upper = np.tile(system.input_set.upper, H) / model.input_scale
        return NlpProblem(
            dim=H * system.input_dim,
            cost=cost,
            inequality_constraints=tuple(constraints),
            lower=lower,
            upper=upper,
            cost_gradient=cost_gradient,
            constraint_gradients=tuple(gradients),
            name=name
        )

    # ========================================================================
    # LÖSEN
    # ========================================================================

    def solve_ocp(
        self,
        spec: OcpSpec,
        config: Optional[SolverConfig] = None,
        warm_start: Optional[ControlSequence] = None
    ) -> OcpSolution:
        """
        Löst das OCP und simuliert die Vorhersage

        Args:
            spec: OCP-Spezifikation
            config: Solver-Toleranzen
            warm_start: Startwert (Länge = Horizont), sonst Nullfolge

        Returns:
            OcpSolution mit Status optimal oder feasible_suboptimal

        Raises:
            OcpInfeasibleError: Residuum nach Abschluss > feasibility_tol
            SolverFailureError: Iterationsgrenze ohne zulässigen Punkt
        """
        config = config or SolverConfig()
        problem = self.build(spec, config.fd_step)
        H = spec.horizon
        m = spec.system.input_dim

        guess = None
        if warm_start is not None:
            if warm_start.length != H or warm_start.input_dim != m:
                raise DimensionError(
                    f"Warmstart der Form ({H}, {m}) erwartet, erhalten: {warm_start.inputs.shape}"
                )
            guess = warm_start.as_vector() / np.sqrt(value_scale(spec))

        result = self.solver.solve(problem, config, guess)
        self._raise_on_failure(problem.name, result, config)
        controls = self.controls_from_result(spec, result)
        if spec.contraction_target is not None:
            controls = self._settle_last_input(spec, controls, config)
        return self._solution(spec, result, controls)

    def _raise_on_failure(self, name: str, result: SolverResult, config: SolverConfig) -> None:
        if result.status.is_feasible:
            return
        if result.status == SolverStatus.INFEASIBLE:
            self.logger.debug(f"{name} unzulässig, Residuum {result.max_residual:.3e}")
            raise OcpInfeasibleError(
                f"{name} unzulässig: Residuum {result.max_residual:.3e} > {config.feasibility_tol:.1e}",
                residuals=np.maximum(result.constraint_residuals, 0.0),
                result=result
            )
        raise SolverFailureError(
            f"{name}: Iterationsgrenze erreicht, Residuum {result.max_residual:.3e}",
            result=result
        )

    @staticmethod
    def controls_from_result(spec: OcpSpec, result: SolverResult) -> ControlSequence:
        """Eingangsfolge in Originaleinheiten aus einem Solver-Ergebnis"""
        scaled = np.sqrt(value_scale(spec)) * np.asarray(result.solution, dtype=float)
        return ControlSequence.from_vector(scaled, spec.system.input_dim)

    def _settle_last_input(
        self,
        spec: OcpSpec,
        controls: ControlSequence,
        config: SolverConfig
    ) -> ControlSequence:
        """
        u(H−1) auf min V(x(H)) setzen, übrige Eingänge unverändert

        Die Kosten Σ_{i<H} V(x(i)) hängen nicht von u(H−1) ab. Unter den
        gleichwertigen Lösungen wird die mit kleinstem V(x(H)) genommen.
        """
        H = spec.horizon
        nominal = spec.system.nominal()
        states = self.dynamics.propagate(nominal, spec.initial_state, controls.inputs, spec.initial_time)
        x_last = states[H - 1]
        if not spec.system.state_set.contains(x_last):
            return controls

        last_time = spec.initial_time + H - 1
        last = OcpSpec(spec.system, spec.fsclf, x_last, Classic(1), last_time)
        scale = float(np.sqrt(value_scale(last)))
        problem = self.build_terminal_problem(last, config.fd_step)
        result = self.solver.solve(problem, config, controls.inputs[H - 1] / scale)
        if not result.status.is_feasible:
            return controls

        u_last = scale * np.asarray(result.solution, dtype=float)
        x_end = nominal.transition(x_last, u_last, last_time)
        if spec.fsclf.value(x_end) > spec.fsclf.value(states[H]):
            return controls
        inputs = np.array(controls.inputs, dtype=float)
        inputs[H - 1] = u_last
        self.logger.debug(
            f"Letzter Eingang (t={last_time}) neu gewählt: V(x(H)) "
            f"{spec.fsclf.value(states[H]):.3e} → {spec.fsclf.value(x_end):.3e}"
        )
        return ControlSequence(inputs)

    def _solution(self, spec: OcpSpec, result: SolverResult, controls: ControlSequence) -> OcpSolution:
        predicted = self.dynamics.rollout(
            spec.system.nominal(), spec.initial_state, controls, spec.initial_time
        )
        H = spec.horizon
        cost = float(sum(spec.fsclf.value(predicted.states[i]) for i in range(H)))
        target = spec.contraction_target
        residual = 0.0
        if target is not None:
            residual = max(0.0, spec.fsclf.value(predicted.states[H]) - target)
        max_residual = residual
        state_set = spec.system.state_set
        if not state_set.is_unbounded:
            for x in predicted.states[1:]:
                max_residual = max(max_residual, float(np.max(state_set.violations(x))))
        self.logger.debug(
            f"OCP (H={H}, t={spec.initial_time}) gelöst: Status={result.status.value}, "
            f"Kosten={cost:.6e}, äußere={result.outer_iterations}"
        )
        return OcpSolution(
            controls=controls,
            predicted=predicted,
            cost=cost,
            contraction_residual=residual,
            status=result.status,
            outer_iterations=result.outer_iterations,
            inner_iterations=result.inner_iterations,
            max_residual=max_residual
        )

    def best_terminal_ratio(
        self,
        spec: OcpSpec,
        config: Optional[SolverConfig] = None
    ) -> float:
        """min_u V(x(H)) / V(ξ) (lokal), 0 für V(ξ) = 0"""
        v0 = spec.fsclf.value(spec.initial_state)
        if v0 == 0.0:
            return 0.0
        config = config or SolverConfig()
        problem = self.build_terminal_problem(spec, config.fd_step)
        result = self.solver.solve(problem, config)
        return result.cost_value * value_scale(spec) / v0

    def optimal_value_VN(
        self,
        system: ControlSystem,
        fsclf: FsCLF,
        initial_state,
        N: int,
        config: Optional[SolverConfig] = None
    ) -> float:
        """V_N(ξ) = optimale Kosten von OCP-3 mit Horizont N"""
        spec = OcpSpec(system=system, fsclf=fsclf, initial_state=initial_state, variant=Classic(N))
        return self.solve_ocp(spec, config).cost

    # ========================================================================
    # ABSCHNEIDEN
    # ========================================================================

    def truncate_tail(self, solution: OcpSolution, j: int) -> Tuple[np.ndarray, ControlSequence]:
        """
        Letzte j Eingänge einer OCP-1-Lösung und der Zustand x(M−j)

        Die Folge ist zulässig für OCP-2ⱼ am Zustand x(M−j) mit Ṽ = V(ξ).
        """
        M = solution.controls.length
        if not 1 <= j <= M:
            raise HorizonError(f"j muss in [1, {M}] liegen, erhalten: {j}")
        return np.array(solution.predicted.states[M - j]), solution.controls.tail(M - j)
