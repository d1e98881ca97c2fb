"""
Ergebnisberichte der Analysefunktionen
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from models.comparison import ComparisonFunction


@dataclass(frozen=True)
class KBoundednessReport:
    """
    Lineare Koeffizienten κ1(r) = c1·r, κ2(r) = c2·r mit
    ω1(g(x, u)) ≤ κ1(ω1(x)) + κ2(ω2(u)) auf der Stichprobe
    """

    kappa1: Optional[ComparisonFunction]
    kappa2: Optional[ComparisonFunction]
    worst_violation: float
    violating_samples: Tuple[int, ...] = ()

    @property
    def bounded(self) -> bool:
        return self.kappa1 is not None and not self.violating_samples


@dataclass(frozen=True)
class SampleCertification:
    """Ergebnis von OCP-1 an einer Stichprobe ξ"""

    state: Tuple[float, ...]
    feasible: bool
    status: str
    ratio: float                  # V(x(M)) / V(ξ) der OCP-1-Lösung
    residual: float
    best_ratio: Optional[float]   # min über alle Eingänge von V(x(M)) / V(ξ)
    v_profile: Tuple[float, ...] = ()   # V(x(i)) / V(ξ), i = 0..M

    def to_dict(self) -> Dict[str, Any]:
        return {
            'state': list(self.state),
            'feasible': self.feasible,
            'status': self.status,
            'ratio': self.ratio,
            'residual': self.residual,
            'best_ratio': self.best_ratio
        }


@dataclass(frozen=True)
class CertificationReport:
    M: int
    decay_c: float
    samples_tested: int
    feasible_count: int
    min_ratio: float
    max_ratio: float
    worst_residual: float
    margin: float
    samples: Tuple[SampleCertification, ...] = field(default=(), repr=False)

    @property
    def certified(self) -> bool:
        return (self.feasible_count == self.samples_tested
                and self.max_ratio < 1.0 - self.margin)

    @property
    def verdict(self) -> str:
        return 'certified' if self.certified else 'not_certified'

    @property
    def best_uniform_ratio(self) -> Optional[float]:
        """Größtes über alle Stichproben erreichbares Minimalverhältnis"""
        values = [s.best_ratio for s in self.samples if s.best_ratio is not None]
        return max(values) if values else None

    @property
    def infeasible_samples(self) -> Tuple[SampleCertification, ...]:
        return tuple(s for s in self.samples if not s.feasible)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'M': self.M,
            'decay_c': self.decay_c,
            'verdict': self.verdict,
            'samples_tested': self.samples_tested,
            'feasible_count': self.feasible_count,
            'min_ratio': self.min_ratio,
            'max_ratio': self.max_ratio,
            'worst_residual': self.worst_residual,
            'best_uniform_ratio': self.best_uniform_ratio,
            'margin': self.margin,
            'samples': [s.to_dict() for s in self.samples]
        }


@dataclass(frozen=True)
class HorizonBoundInputs:
    """Konstanten (c, d, M) mit γ = M·d / (1 − c)"""

    c: float
    d: float
    M: int

    def __post_init__(self):
        if not 0.0 <= self.c < 1.0:
            raise ValueError(f"c muss in [0, 1) liegen, erhalten: {self.c}")
        if not (np.isfinite(self.d) and self.d > 0.0):
            raise ValueError(f"d muss endlich und > 0 sein, erhalten: {self.d}")
        if self.M < 1:
            raise ValueError(f"M muss >= 1 sein, erhalten: {self.M}")

    @property
    def gamma(self) -> float:
        return self.M * self.d / (1.0 - self.c)


@dataclass(frozen=True)
class TransientConstants:
    c: float
    d: float
    d_transient: float
    M: int
    samples_used: int

    @property
    def bound_inputs(self) -> HorizonBoundInputs:
        return HorizonBoundInputs(self.c, self.d, self.M)

    @property
    def gamma(self) -> float:
        return self.bound_inputs.gamma

    def to_dict(self) -> Dict[str, Any]:
        return {
            'c': self.c,
            'd': self.d,
            'd_transient': self.d_transient,
            'M': self.M,
            'gamma': self.gamma,
            'samples_used': self.samples_used
        }


@dataclass(frozen=True)
class ConverseDecayReport:
    """
    λ̂ = max_k ω(x((k+1)M)) / ω(x(kM)) über Zyklen mit ω(x(kM)) ≥ 1e-12
    """

    lambda_hat: float
    cycles_used: int
    cycle_ratios: Tuple[float, ...] = ()

    @property
    def vacuous(self) -> bool:
        return self.cycles_used == 0

    @property
    def satisfied(self) -> bool:
        return self.lambda_hat < 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'lambda_hat': self.lambda_hat,
            'satisfied': self.satisfied,
            'vacuous': self.vacuous,
            'cycles_used': self.cycles_used
        }


@dataclass(frozen=True)
class ExponentialEnvelope:
    """Hüllkurve ω(x(t)) ≤ C·σ^t·ω(x(0))"""

    C: float
    sigma: float
    fitted_steps: int

    @property
    def exponential(self) -> bool:
        return self.sigma < 1.0

    @property
    def verdict(self) -> str:
        return 'exponential' if self.exponential else 'not_exponential'

    def to_dict(self) -> Dict[str, Any]:
        return {
            'C': self.C,
            'sigma': self.sigma,
            'verdict': self.verdict,
            'fitted_steps': self.fitted_steps
        }


@dataclass(frozen=True)
class ValueBoundCheck:
    """Stichprobenmaximum von V_N(ξ) / V(ξ) über Horizonte N"""

    gamma: float
    max_ratio: float
    per_horizon: Tuple[Tuple[int, float], ...]

    @property
    def satisfied(self) -> bool:
        return self.max_ratio <= self.gamma * (1.0 + 1e-9)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'gamma': self.gamma,
            'max_ratio': self.max_ratio,
            'satisfied': self.satisfied,
            'per_horizon': {str(n): r for n, r in self.per_horizon}
        }


def as_tuple(x) -> Tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(x, dtype=float))
