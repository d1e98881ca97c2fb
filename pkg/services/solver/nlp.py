"""
Datentypen des nichtlinearen Programms (NLP) und des Solvers

    minimiere f(z) unter c_i(z) ≤ 0, lb ≤ z ≤ ub
"""

from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from core.exceptions import DimensionError, NonFiniteEvaluationError
from services.solver.gradients import finite_diff_gradient

ScalarFunction = Callable[[np.ndarray], float]
GradientFunction = Callable[[np.ndarray], np.ndarray]


class SolverStatus(str, Enum):
    OPTIMAL = 'optimal'
    FEASIBLE_SUBOPTIMAL = 'feasible_suboptimal'
    INFEASIBLE = 'infeasible'
    MAX_ITERS = 'max_iters'

    @property
    def is_feasible(self) -> bool:
        return self in (SolverStatus.OPTIMAL, SolverStatus.FEASIBLE_SUBOPTIMAL)


@dataclass(frozen=True)
class SolverConfig:
    """
    Toleranzen und Grenzen des Augmented-Lagrangian-Verfahrens

    optimality_tol ist eine absolute Schranke für die projizierte
    Gradientennorm (Maximumnorm) des inneren Problems.
    """

    feasibility_tol: float = 1e-6
    optimality_tol: float = 1e-8
    max_outer_iters: int = 50
    max_inner_iters: int = 200
    initial_penalty: float = 10.0
    penalty_growth: float = 10.0
    fd_step: float = 1e-6
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_penalty: float = 1e12

    def __post_init__(self):
        for name in ('feasibility_tol', 'optimality_tol', 'initial_penalty', 'fd_step', 'max_penalty'):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0.0):
                raise ValueError(f"SolverConfig.{name} muss > 0 sein, erhalten: {value}")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("Iterationsgrenzen müssen >= 1 sein")
        if not self.penalty_growth > 1.0:
            raise ValueError(f"penalty_growth muss > 1 sein, erhalten: {self.penalty_growth}")
        if not (0.0 < self.armijo < 1.0 and 0.0 < self.backtrack < 1.0):
            raise ValueError("armijo und backtrack müssen in (0, 1) liegen")

    def tightened(self, factor: float) -> 'SolverConfig':
        """Toleranzen um `factor` verschärft"""
        return replace(
            self,
            feasibility_tol=self.feasibility_tol / factor,
            optimality_tol=self.optimality_tol / factor
        )

    def relaxed(self) -> 'SolverConfig':
        """Konfiguration für einen Wiederholungsversuch: mehr Iterationen, sanfteres Strafwachstum"""
        return replace(
            self,
            max_outer_iters=2 * self.max_outer_iters,
            max_inner_iters=2 * self.max_inner_iters,
            penalty_growth=max(2.0, self.penalty_growth ** 0.5)
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SolverConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unbekannte Solver-Parameter: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class NlpProblem:
    """
    Glattes NLP mit Ungleichungen c_i(z) ≤ 0 und optionalen Box-Grenzen

    Fehlende Gradienten werden über zentrale finite Differenzen gebildet.
    """

    dim: int
    cost: ScalarFunction
    inequality_constraints: Tuple[ScalarFunction, ...] = ()
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    cost_gradient: Optional[GradientFunction] = field(default=None, repr=False)
    constraint_gradients: Optional[Tuple[Optional[GradientFunction], ...]] = field(default=None, repr=False)
    name: str = "nlp"

    def __post_init__(self):
        object.__setattr__(self, 'inequality_constraints', tuple(self.inequality_constraints))
        if self.dim < 1:
            raise DimensionError(f"NLP-Dimension muss >= 1 sein, erhalten: {self.dim}")
        lower = np.full(self.dim, -np.inf) if self.lower is None else np.array(self.lower, dtype=float)
        upper = np.full(self.dim, np.inf) if self.upper is None else np.array(self.upper, dtype=float)
        if lower.shape != (self.dim,) or upper.shape != (self.dim,):
            raise DimensionError("Box-Grenzen passen nicht zur NLP-Dimension")
        if np.any(lower > upper):
            raise DimensionError("Untere Box-Grenze größer als obere")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        if self.constraint_gradients is not None:
            grads = tuple(self.constraint_gradients)
            if len(grads) != len(self.inequality_constraints):
                raise DimensionError("Anzahl der Restriktionsgradienten passt nicht")
            object.__setattr__(self, 'constraint_gradients', grads)

    @property
    def num_constraints(self) -> int:
        return len(self.inequality_constraints)

    def project(self, z: np.ndarray) -> np.ndarray:
        return np.clip(z, self.lower, self.upper)

    def evaluate_cost(self, z: np.ndarray) -> float:
        value = float(self.cost(z))
        if not np.isfinite(value):
            raise NonFiniteEvaluationError(f"Kostenfunktion von '{self.name}' nicht endlich")
        return value

    def constraint_values(self, z: np.ndarray) -> np.ndarray:
        values = np.array([float(c(z)) for c in self.inequality_constraints])
        if not np.all(np.isfinite(values)):
            raise NonFiniteEvaluationError(f"Restriktion von '{self.name}' nicht endlich")
        return values

    def cost_grad(self, z: np.ndarray, fd_step: float) -> np.ndarray:
        if self.cost_gradient is not None:
            return np.asarray(self.cost_gradient(z), dtype=float)
        return finite_diff_gradient(self.cost, z, fd_step)

    def constraint_grad(self, index: int, z: np.ndarray, fd_step: float) -> np.ndarray:
        if self.constraint_gradients is not None and self.constraint_gradients[index] is not None:
            return np.asarray(self.constraint_gradients[index](z), dtype=float)
        return finite_diff_gradient(self.inequality_constraints[index], z, fd_step)


@dataclass(frozen=True)
class IterationRecord:
    """Eine äußere Iteration im Solver-Protokoll"""

    iteration: int
    cost: float
    max_residual: float
    penalty: float
    inner_iterations: int


@dataclass(frozen=True, eq=False)
class SolverResult:
    """constraint_residuals[i] = max(0, c_i(z)) an der Lösung"""

    solution: np.ndarray
    cost_value: float
    constraint_residuals: np.ndarray
    status: SolverStatus
    outer_iterations: int
    inner_iterations: int
    stationarity: float
    trace: Tuple[IterationRecord, ...] = ()

    @property
    def max_residual(self) -> float:
        """max_i max(0, c_i(z)); 0 ohne Restriktionen"""
        if self.constraint_residuals.size == 0:
            return 0.0
        return float(max(np.max(self.constraint_residuals), 0.0))
