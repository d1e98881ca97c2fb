"""
Beispiel-Generator: dreidimensionales Beispielsystem mit quadratischer fsCLF

    x1+ = x1 + x2 (+ 0.1·sin(t/4) im gestörten Fall)
    x2+ = x2 + x3
    x3+ = 1.5·x3 + u
"""

from typing import Optional, Sequence

import numpy as np

from models.lyapunov import FsCLF
from models.scenario import (
    AnalysisConfig, FsclfConfig, OutputConfig, ScenarioConfig, SystemConfig, VariantConfig
)
from models.system import ControlSystem, Disturbance

EXAMPLE_A = ((1.0, 1.0, 0.0),
             (0.0, 1.0, 1.0),
             (0.0, 0.0, 1.5))
EXAMPLE_B = ((0.0,), (0.0,), (1.0,))
EXAMPLE_P = ((1.0, 0.0, 0.25),
             (0.0, 1.0, 0.25),
             (0.25, 0.25, 1.0))
EXAMPLE_INITIAL_STATE = (-1.0, 1.0, 1.0)
EXAMPLE_DECAY = 0.9
EXAMPLE_M = 6
EXAMPLE_DISTURBANCE = Disturbance(amplitude=0.1, frequency=0.25, components=(0,))


def create_example_system(perturbed: bool = False) -> ControlSystem:
    """
    Erstellt das Beispielsystem

    Args:
        perturbed: True = additive Störung 0.1·sin(t/4) auf x1

    Returns:
        ControlSystem (unbeschränkte Mengen, analytische Jacobi-Matrizen)
    """
    return ControlSystem.linear(
        EXAMPLE_A,
        EXAMPLE_B,
        disturbance=EXAMPLE_DISTURBANCE if perturbed else None,
        name='paper-perturbed' if perturbed else 'paper-nominal'
    )


def create_example_fsclf(M: int = EXAMPLE_M, decay_c: float = EXAMPLE_DECAY) -> FsCLF:
    """V(x) = xᵀPx mit α(r) = decay_c·r"""
    return FsCLF.quadratic(np.array(EXAMPLE_P), decay_c, M)


def create_example_scenario(
    perturbed: bool = False,
    algorithm: str = 'MultiStep',
    horizon: int = EXAMPLE_M,
    total_steps: int = 100,
    variants: Optional[Sequence[VariantConfig]] = None,
    name: Optional[str] = None
) -> ScenarioConfig:
    """
    Szenario für das Beispielsystem

    Returns:
        ScenarioConfig mit ξ = (−1, 1, 1), M = 6, α = 0.9·r
    """
    builtin = 'paper-perturbed' if perturbed else 'paper-nominal'
    return ScenarioConfig(
        name=name or f"{builtin}-{algorithm}",
        system=SystemConfig(builtin=builtin),
        fsclf=FsclfConfig(kind='quadratic', decay_c=EXAMPLE_DECAY, M=EXAMPLE_M, P=EXAMPLE_P),
        algorithm=algorithm,
        horizon=horizon,
        initial_state=EXAMPLE_INITIAL_STATE,
        total_steps=total_steps,
        variants=tuple(variants or ()),
        output=OutputConfig(prefix=builtin),
        analysis=AnalysisConfig()
    )
