"""
Spezifikation und Lösung der Optimalsteuerungsprobleme

    Contractive{M}        OCP-1:  Horizont M, V(x(M)) ≤ α(V(ξ))
    Shrinking{j, Ṽ}       OCP-2ⱼ: Horizont j, V(x(j)) ≤ α(Ṽ)
    Classic{N}            OCP-3:  Horizont N, keine Kontraktionsbedingung
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from core.exceptions import HorizonError
from models.lyapunov import FsCLF
from models.system import ControlSystem
from models.trajectory import ControlSequence, Trajectory
from services.solver.nlp import SolverStatus


@dataclass(frozen=True)
class Contractive:
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise HorizonError(f"M muss >= 1 sein, erhalten: {self.M}")

    @property
    def horizon(self) -> int:
        return self.M


@dataclass(frozen=True)
class Shrinking:
    j: int
    anchor_value: float

    def __post_init__(self):
        if self.j < 1:
            raise HorizonError(f"Restlänge j muss >= 1 sein, erhalten: {self.j}")
        if not (np.isfinite(self.anchor_value) and self.anchor_value >= 0.0):
            raise ValueError(f"Ankerwert muss endlich und >= 0 sein: {self.anchor_value}")

    @property
    def horizon(self) -> int:
        return self.j


@dataclass(frozen=True)
class Classic:
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise HorizonError(f"N muss >= 1 sein, erhalten: {self.N}")

    @property
    def horizon(self) -> int:
        return self.N


OcpVariant = Union[Contractive, Shrinking, Classic]


@dataclass(frozen=True, eq=False)
class OcpSpec:
    """
    Ein OCP am Messzustand ξ

    initial_time ist die globale Zeit von ξ; die Vorhersage läuft immer
    auf dem nominalen System.
    """

    system: ControlSystem
    fsclf: FsCLF
    initial_state: np.ndarray
    variant: OcpVariant
    initial_time: int = 0

    def __post_init__(self):
        xi = np.array(self.initial_state, dtype=float)
        xi.setflags(write=False)
        object.__setattr__(self, 'initial_state', xi)

    @property
    def horizon(self) -> int:
        return self.variant.horizon

    @property
    def contraction_anchor(self) -> Optional[float]:
        """V(ξ) für OCP-1, Ṽ für OCP-2ⱼ, None für OCP-3"""
        if isinstance(self.variant, Contractive):
            return self.fsclf.value(self.initial_state)
        if isinstance(self.variant, Shrinking):
            return float(self.variant.anchor_value)
        return None

    @property
    def contraction_target(self) -> Optional[float]:
        anchor = self.contraction_anchor
        return None if anchor is None else float(self.fsclf.decay(anchor))


@dataclass(frozen=True, eq=False)
class OcpSolution:
    """
    Lösung eines OCP

    contraction_residual = max(0, V(x(H)) − α(Anker)); 0 bei OCP-3.
    u(H−1) ist bei OCP-1 und OCP-2ⱼ die Wahl mit kleinstem V(x(H)).
    """

    controls: ControlSequence
    predicted: Trajectory
    cost: float
    contraction_residual: float
    status: SolverStatus
    outer_iterations: int
    inner_iterations: int
    max_residual: float

