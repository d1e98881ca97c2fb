"""
Eingangsfolgen und Zustandstrajektorien
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from core.exceptions import DimensionError
from models.constraint_set import ConstraintSet


def _frozen_2d(values, width: int = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 1 and width is not None:
        arr = arr.reshape(-1, width) if arr.size else np.zeros((0, width))
    if arr.ndim != 2:
        raise DimensionError(f"2D-Array erwartet, erhalten: Form {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ControlSequence:
    """Eingangsfolge (u(0), …, u(k−1)) als Array der Form (k, m)"""

    inputs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'inputs', _frozen_2d(self.inputs))

    @classmethod
    def zeros(cls, length: int, input_dim: int) -> 'ControlSequence':
        return cls(np.zeros((length, input_dim)))

    @classmethod
    def from_vector(cls, vector: Sequence[float], input_dim: int) -> 'ControlSequence':
        """Entscheidungsvektor (u(0)ᵀ, …, u(k−1)ᵀ) → Folge"""
        vector = np.asarray(vector, dtype=float)
        if vector.size % input_dim:
            raise DimensionError(
                f"Vektorlänge {vector.size} ist kein Vielfaches von m={input_dim}"
            )
        return cls(vector.reshape(-1, input_dim))

    @property
    def length(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def as_vector(self) -> np.ndarray:
        return np.array(self.inputs, dtype=float).ravel()

    def tail(self, start: int) -> 'ControlSequence':
        """Elemente ab Index start"""
        return ControlSequence(self.inputs[start:].reshape(-1, self.input_dim))

    def shifted(self, steps: int = 1) -> 'ControlSequence':
        """Erste `steps` Elemente verwerfen, Nullen anhängen (gleiche Länge)"""
        if steps < 0:
            raise ValueError(f"steps muss >= 0 sein, erhalten: {steps}")
        steps = min(steps, self.length)
        if steps == 0:
            return self
        return ControlSequence(np.vstack([self.inputs[steps:], np.zeros((steps, self.input_dim))]))

    def is_admissible(self, input_set: ConstraintSet, tol: float = 1e-9) -> bool:
        return all(input_set.contains(u, tol) for u in self.inputs)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Zustandsfolge x(start_time), …, x(start_time+T) und Eingänge u(start_time), …

    states hat die Form (T+1, n), inputs die Form (T, m).
    """

    states: np.ndarray
    inputs: np.ndarray
    start_time: int = 0

    def __post_init__(self):
        states = _frozen_2d(self.states)
        inputs = np.array(self.inputs, dtype=float)
        if inputs.size == 0:
            inputs = np.zeros((0, inputs.shape[1] if inputs.ndim == 2 else 1))
        inputs = _frozen_2d(inputs)
        if states.shape[0] != inputs.shape[0] + 1:
            raise DimensionError(
                f"Trajektorie: {states.shape[0]} Zustände, aber {inputs.shape[0]} Eingänge"
            )
        object.__setattr__(self, 'states', states)
        object.__setattr__(self, 'inputs', inputs)

    @property
    def length(self) -> int:
        """Anzahl der Schritte T"""
        return self.inputs.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.length + 1)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def controls(self) -> ControlSequence:
        return ControlSequence(self.inputs)

    def max_distance(self, other: 'Trajectory') -> float:
        """Supremumsnorm des Zustandsabstands zweier gleich langer Trajektorien"""
        if self.states.shape != other.states.shape:
            raise DimensionError("Trajektorien unterschiedlicher Länge")
        return float(np.max(np.abs(self.states - other.states)))
