"""
Zeitdiskrete Regelstrecke x(t+1) = g(x(t), u(t)) + d(t)
"""

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import DimensionError
from models.constraint_set import ConstraintSet

NominalMap = Callable[[np.ndarray, np.ndarray], np.ndarray]
JacobianMap = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class Disturbance:
    """
    Additive Sinusstörung d_l(t) = amplitude * sin(frequency * t + phase)
    für alle Komponenten l in `components` (0-basiert), sonst 0.

    t ist die globale Zeit des Regelkreises.
    """

    amplitude: float
    frequency: float
    components: Tuple[int, ...] = (0,)
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'components', tuple(int(c) for c in self.components))
        if not self.components:
            raise DimensionError("Störung benötigt mindestens eine Komponente")

    def value(self, t: int, state_dim: int) -> np.ndarray:
        d = np.zeros(state_dim)
        s = self.amplitude * np.sin(self.frequency * t + self.phase)
        for comp in self.components:
            d[comp] = s
        return d

    def to_dict(self) -> Dict[str, Any]:
        return {
            'amplitude': self.amplitude,
            'frequency': self.frequency,
            'components': list(self.components),
            'phase': self.phase
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Disturbance':
        return cls(
            amplitude=float(data['amplitude']),
            frequency=float(data['frequency']),
            components=tuple(data.get('components', (0,))),
            phase=float(data.get('phase', 0.0))
        )


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """
    Regelstrecke mit nominaler Abbildung g, Mengen X und U und optionaler Störung

    `jacobian` liefert (dg/dx, dg/du); fehlt sie, werden Ableitungen über
    finite Differenzen gebildet. Für lineare Systeme sind A und B gesetzt.
    """

    state_dim: int
    input_dim: int
    nominal_map: NominalMap
    state_set: ConstraintSet = None
    input_set: ConstraintSet = None
    disturbance: Optional[Disturbance] = None
    jacobian: Optional[JacobianMap] = None
    name: str = ""
    A: Optional[np.ndarray] = field(default=None, repr=False)
    B: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.state_dim < 1 or self.input_dim < 1:
            raise DimensionError(
                f"Dimensionen müssen >= 1 sein: n={self.state_dim}, m={self.input_dim}"
            )
        if self.state_set is None:
            object.__setattr__(self, 'state_set', ConstraintSet.unbounded(self.state_dim))
        if self.input_set is None:
            object.__setattr__(self, 'input_set', ConstraintSet.unbounded(self.input_dim))
        if self.state_set.dim != self.state_dim:
            raise DimensionError("Zustandsmenge passt nicht zur Zustandsdimension")
        if self.input_set.dim != self.input_dim:
            raise DimensionError("Eingangsmenge passt nicht zur Eingangsdimension")
        if self.disturbance is not None:
            for comp in self.disturbance.components:
                if not 0 <= comp < self.state_dim:
                    raise DimensionError(
                        f"Störkomponente {comp} außerhalb 0..{self.state_dim - 1}"
                    )

    # ------------------------------------------------------------------
    # Konstruktion
    # ------------------------------------------------------------------

    @classmethod
    def linear(
        cls,
        A: Sequence[Sequence[float]],
        B: Sequence[Sequence[float]],
        state_set: Optional[ConstraintSet] = None,
        input_set: Optional[ConstraintSet] = None,
        disturbance: Optional[Disturbance] = None,
        name: str = "linear"
    ) -> 'ControlSystem':
        """Lineares System x+ = A x + B u (+ d)"""
        A = np.array(A, dtype=float)
        B = np.array(B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"A muss quadratisch sein, erhalten: {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(f"B muss {A.shape[0]} Zeilen haben, erhalten: {B.shape}")
        A.setflags(write=False)
        B.setflags(write=False)

        def nominal_map(x, u):
            return A @ x + B @ u

        def jacobian(x, u):
            return A, B

        return cls(
            state_dim=A.shape[0],
            input_dim=B.shape[1],
            nominal_map=nominal_map,
            state_set=state_set,
            input_set=input_set,
            disturbance=disturbance,
            jacobian=jacobian,
            name=name,
            A=A,
            B=B
        )

    def nominal(self) -> 'ControlSystem':
        """Dasselbe System ohne Störung"""
        if self.disturbance is None:
            return self
        return replace(self, disturbance=None, name=f"{self.name} (nominal)")

    def with_disturbance(self, disturbance: Optional[Disturbance]) -> 'ControlSystem':
        return replace(self, disturbance=disturbance)

    @property
    def is_linear(self) -> bool:
        return self.A is not None

    # ------------------------------------------------------------------
    # Auswertung
    # ------------------------------------------------------------------

    def transition(self, x: np.ndarray, u: np.ndarray, t: int = 0) -> np.ndarray:
        """Ein Schritt x(t+1) = g(x, u) + d(t)"""
        x_next = np.asarray(self.nominal_map(x, u), dtype=float)
        if self.disturbance is not None:
            x_next = x_next + self.disturbance.value(t, self.state_dim)
        return x_next
