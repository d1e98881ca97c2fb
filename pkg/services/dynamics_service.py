"""
Dynamik-Service: Simulation, Auswertung von V, Jacobi-Matrizen, K-Beschränktheit
"""

import logging
from typing import Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from core.exceptions import DimensionError, NonFiniteStateError, SampleError
from models.comparison import ComparisonFunction
from models.lyapunov import FsCLF, MeasurementFunction
from models.reports import KBoundednessReport
from models.system import ControlSystem
from models.trajectory import ControlSequence, Trajectory
from services.solver.gradients import finite_diff_jacobian

logger = logging.getLogger(__name__)


class DynamicsService:
    """
    Zentrale Operationen auf Regelstrecken
    """

    def __init__(self, fd_step: float = 1e-6):
        self.logger = logger
        self.fd_step = fd_step

    # ========================================================================
    # SIMULATION
    # ========================================================================

    def propagate(
        self,
        system: ControlSystem,
        initial: np.ndarray,
        inputs: np.ndarray,
        start_time: int = 0
    ) -> np.ndarray:
        """
        Zustandsfolge als Array (k+1, n) ohne Objekt-Overhead

        Raises:
            NonFiniteStateError: Zustand wird nicht-endlich
        """
        states = np.empty((inputs.shape[0] + 1, system.state_dim))
        states[0] = initial
        for i, u in enumerate(inputs):
            states[i + 1] = system.transition(states[i], u, start_time + i)
            if not np.all(np.isfinite(states[i + 1])):
                raise NonFiniteStateError(i + 1)
        return states

    def rollout(
        self,
        system: ControlSystem,
        initial_state: Sequence[float],
        inputs: ControlSequence,
        start_time: int = 0
    ) -> Trajectory:
        """
        Simuliert x(i+1) = g(x(i), u(i)) + d(start_time + i)

        Args:
            system: Regelstrecke
            initial_state: x(0) der Länge n
            inputs: Eingangsfolge der Länge k mit Elementen der Länge m
            start_time: globale Zeit von x(0) (Phase der Störung)

        Returns:
            Trajectory mit k+1 Zuständen

        Raises:
            DimensionError: Dimensionen passen nicht
            NonFiniteStateError: Zustand wird nicht-endlich
        """
        x0 = np.array(initial_state, dtype=float)
        if x0.shape != (system.state_dim,):
            raise DimensionError(
                f"Anfangszustand der Länge {system.state_dim} erwartet, erhalten: {x0.shape}"
            )
        if inputs.length and inputs.input_dim != system.input_dim:
            raise DimensionError(
                f"Eingänge der Länge {system.input_dim} erwartet, erhalten: {inputs.input_dim}"
            )
        if not np.all(np.isfinite(x0)):
            raise NonFiniteStateError(0, "Anfangszustand nicht endlich")

        u = np.asarray(inputs.inputs, dtype=float).reshape(-1, system.input_dim)
        states = self.propagate(system, x0, u, start_time)
        return Trajectory(states=states, inputs=u, start_time=start_time)

    def eval_V(self, fsclf: FsCLF, x: Sequence[float]) -> float:
        """V(x); die Dimension wird gegen die fsCLF geprüft"""
        return fsclf.value(x)

    def jacobians(self, system: ControlSystem, x: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(∂g/∂x, ∂g/∂u) am Punkt (x, u)"""
        if system.jacobian is not None:
            A, B = system.jacobian(x, u)
            return np.asarray(A, dtype=float), np.asarray(B, dtype=float)
        A = finite_diff_jacobian(lambda xx: system.nominal_map(xx, u), x, self.fd_step)
        B = finite_diff_jacobian(lambda uu: system.nominal_map(x, uu), u, self.fd_step)
        return A, B

    # ========================================================================
    # K-BESCHRÄNKTHEIT
    # ========================================================================

    def check_K_bounded(
        self,
        system: ControlSystem,
        omega1: MeasurementFunction,
        omega2: MeasurementFunction,
        samples: Sequence[Tuple[Sequence[float], Sequence[float]]]
    ) -> KBoundednessReport:
        """
        Schätzt lineare κ1, κ2 mit ω1(g(x, u)) ≤ κ1(ω1(x)) + κ2(ω2(u))

        Die Koeffizienten minimieren c1 + c2 unter allen Stichproben-
        ungleichungen (lineares Programm). Stichproben mit ω1(x) = ω2(u) = 0,
        aber ω1(g(x, u)) > 0 lassen sich mit keinem linearen Paar abdecken und
        werden als Verletzung gemeldet.

        Raises:
            SampleError: leere Stichprobe oder Punkt außerhalb X × U
        """
        if len(samples) == 0:
            raise SampleError("Stichprobe für K-Beschränktheit ist leer")

        nominal = system.nominal()
        a, b, y = [], [], []
        for idx, (x, u) in enumerate(samples):
            x = np.asarray(x, dtype=float)
            u = np.asarray(u, dtype=float)
            if not (system.state_set.contains(x) and system.input_set.contains(u)):
                raise SampleError(f"Stichprobe {idx} liegt außerhalb von X × U")
            a.append(omega1(x))
            b.append(omega2(u))
            y.append(omega1(nominal.transition(x, u, 0)))
        a, b, y = np.array(a), np.array(b), np.array(y)

        degenerate = (a == 0.0) & (b == 0.0) & (y > 0.0)
        active = ~degenerate & ~((a == 0.0) & (b == 0.0))

        c1 = c2 = 0.0
        if np.any(active):
            lp = linprog(
                c=[1.0, 1.0],
                A_ub=-np.column_stack([a[active], b[active]]),
                b_ub=-y[active],
                bounds=[(0.0, None), (0.0, None)],
                method='highs'
            )
            if lp.status != 0:
                self.logger.warning(f"LP für K-Beschränktheit ohne Lösung: {lp.message}")
                return KBoundednessReport(None, None, float('inf'), tuple(np.flatnonzero(active)))
            c1, c2 = (float(max(v, 0.0)) for v in lp.x)
            # LP-Toleranz ausgleichen: beide Koeffizienten minimal hochskalieren
            bound = c1 * a[active] + c2 * b[active]
            positive = bound > 0.0
            if np.any(positive):
                factor = float(np.max(y[active][positive] / bound[positive]))
                if factor > 1.0:
                    c1 *= factor
                    c2 *= factor

        gap = y - c1 * a - c2 * b
        scale = np.maximum(1.0, y)
        violating = degenerate | (gap > 1e-9 * scale)
        worst = float(max(np.max(gap), 0.0))
        self.logger.debug(f"K-Beschränktheit: c1={c1:.6g}, c2={c2:.6g}, Verletzung={worst:.3e}")
        return KBoundednessReport(
            kappa1=ComparisonFunction.linear(c1),
            kappa2=ComparisonFunction.linear(c2),
            worst_violation=worst,
            violating_samples=tuple(int(i) for i in np.flatnonzero(violating))
        )
