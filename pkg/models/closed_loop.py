"""
Konfiguration und Ergebnis eines MPC-Regelkreises
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np

from core.exceptions import HorizonError
from models.trajectory import ControlSequence, Trajectory
from services.solver.nlp import SolverConfig


class Algorithm(str, Enum):
    MULTI_STEP = 'MultiStep'                 # Algorithmus 1
    SHRINKING_UPDATED = 'ShrinkingUpdated'   # Algorithmus 2
    CLASSIC = 'Classic'                      # Algorithmus 3
    OPEN_LOOP = 'OpenLoop'                   # u ≡ 0, nur zum Vergleich


class WarmStartPolicy(str, Enum):
    ZEROS = 'zeros'
    SHIFT_PREVIOUS = 'shift_previous'


@dataclass(frozen=True)
class ClosedLoopConfig:
    algorithm: Algorithm
    horizon: int
    total_steps: int = 100
    solver: SolverConfig = field(default_factory=SolverConfig)
    warm_start_policy: WarmStartPolicy = WarmStartPolicy.SHIFT_PREVIOUS

    def __post_init__(self):
        object.__setattr__(self, 'algorithm', Algorithm(self.algorithm))
        object.__setattr__(self, 'warm_start_policy', WarmStartPolicy(self.warm_start_policy))
        if self.horizon < 1:
            raise HorizonError(f"Horizont muss >= 1 sein, erhalten: {self.horizon}")
        if self.total_steps < 1:
            raise HorizonError(f"total_steps muss >= 1 sein, erhalten: {self.total_steps}")

    @property
    def label(self) -> str:
        return f"{self.algorithm.value}-{self.horizon}"


@dataclass(frozen=True, eq=False)
class SolveDiagnostics:
    """
    Protokoll eines OCP-Aufrufs im Regelkreis

    initial_state ist der gemessene Zustand x(time), an dem gelöst wurde.
    fallback: OCP-2ⱼ blieb unzulässig, angewandt wurde der Rest der
    Zykluslösung (status = 'tail_fallback').
    """

    time: int
    cycle: int
    step_in_cycle: int
    horizon: int
    status: str
    outer_iterations: int
    inner_iterations: int
    contraction_residual: float
    max_residual: float
    cost: float
    wall_time: float
    retried: bool = False
    initial_state: Tuple[float, ...] = ()
    fallback: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'time': self.time,
            'cycle': self.cycle,
            'step_in_cycle': self.step_in_cycle,
            'horizon': self.horizon,
            'status': self.status,
            'outer_iterations': self.outer_iterations,
            'inner_iterations': self.inner_iterations,
            'contraction_residual': self.contraction_residual,
            'max_residual': self.max_residual,
            'cost': self.cost,
            'wall_time': self.wall_time,
            'retried': self.retried,
            'fallback': self.fallback,
            'initial_state': list(self.initial_state)
        }


@dataclass(frozen=True, eq=False)
class ClosedLoopResult:
    """
    Geschlossene Trajektorie x(0..T), angewandte Eingänge u(0..T−1),
    V entlang der Trajektorie und Solve-Protokoll

    solve_index[t] ist der Index in `diagnostics` des Solves, der u(t) geliefert hat.
    """

    config: ClosedLoopConfig
    trajectory: Trajectory
    v_values: np.ndarray
    diagnostics: Tuple[SolveDiagnostics, ...]
    solve_index: Tuple[int, ...]
    cycle_length: int

    @property
    def applied_inputs(self) -> ControlSequence:
        return self.trajectory.controls

    @property
    def total_steps(self) -> int:
        return self.trajectory.length

    @property
    def cycle_anchors(self) -> Tuple[float, ...]:
        """V(x(kM)) für alle k mit kM ≤ T"""
        M = self.cycle_length
        return tuple(float(v) for v in self.v_values[::M])

    @property
    def wall_time_total(self) -> float:
        return float(sum(d.wall_time for d in self.diagnostics))

    def diagnostic_for_step(self, t: int) -> Optional[SolveDiagnostics]:
        """Solve, dessen Eingang zur Zeit t angewandt wurde (None für t = T)"""
        if t < 0 or t >= len(self.solve_index):
            return None
        index = self.solve_index[t]
        return self.diagnostics[index] if index >= 0 else None
