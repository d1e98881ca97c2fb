"""
Messfunktionen ω und endlich-schrittige Kontroll-Lyapunov-Funktionen (fsCLF)
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

import numpy as np

from core.exceptions import DimensionError
from models.comparison import ComparisonFunction


@dataclass(frozen=True, eq=False)
class MeasurementFunction:
    """
    Stetige Funktion ω: X → [0, ∞) mit mindestens einer Nullstelle

    Der Nullstellen-Zeuge wird bei der Konstruktion geprüft.
    """

    name: str
    func: Callable[[np.ndarray], float]
    zero_witness: np.ndarray
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        witness = np.array(self.zero_witness, dtype=float)
        witness.setflags(write=False)
        object.__setattr__(self, 'zero_witness', witness)
        value = float(self.func(witness))
        if value != 0.0:
            raise ValueError(f"ω '{self.name}' ist am Nullstellen-Zeugen nicht 0: {value}")

    @property
    def dim(self) -> int:
        return self.zero_witness.size

    def __call__(self, x) -> float:
        return float(self.func(np.asarray(x, dtype=float)))

    @classmethod
    def euclidean_norm(cls, dim: int) -> 'MeasurementFunction':
        """ω(x) = |x| (Abstand zum Ursprung)"""

        def grad(x):
            nrm = np.linalg.norm(x)
            return x / nrm if nrm > 0.0 else np.zeros_like(x)

        return cls('euclidean', lambda x: float(np.linalg.norm(x)), np.zeros(dim), grad)

    @classmethod
    def quadratic_root(cls, P: np.ndarray) -> 'MeasurementFunction':
        """ω(x) = sqrt(xᵀPx) für positiv semidefinites P"""
        P = np.array(P, dtype=float)

        def func(x):
            return float(np.sqrt(max(x @ P @ x, 0.0)))

        return cls('quadratic_root', func, np.zeros(P.shape[0]))


@dataclass(frozen=True)
class SandwichReport:
    """Ergebnis der Prüfung α̲(ω(x)) ≤ V(x) ≤ ᾱ(ω(x))"""

    samples_tested: int
    max_lower_violation: float
    max_upper_violation: float

    @property
    def holds(self) -> bool:
        return self.max_lower_violation <= 0.0 and self.max_upper_violation <= 0.0


@dataclass(frozen=True, eq=False)
class FsCLF:
    """
    Endlich-schrittige CLF (V, α̲, ᾱ, α, M)

    kind = 'quadratic':  V(x) = xᵀPx
    kind = 'omega':      V(x) = ω(x), α̲ = ᾱ = id
    """

    kind: str
    omega: MeasurementFunction
    lower: ComparisonFunction
    upper: ComparisonFunction
    decay: ComparisonFunction
    M: int
    P: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ('quadratic', 'omega'):
            raise ValueError(f"Unbekannte fsCLF-Art: {self.kind}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M muss eine ganze Zahl >= 1 sein, erhalten: {self.M}")
        if self.kind == 'quadratic' and self.P is None:
            raise ValueError("Quadratische fsCLF benötigt P")
        if self.decay.is_linear and not self.decay.slope < 1.0:
            raise ValueError(f"Abklingfunktion muss unterhalb der Identität liegen: c={self.decay.slope}")

    # ------------------------------------------------------------------
    # Konstruktoren
    # ------------------------------------------------------------------

    @classmethod
    def quadratic(cls, P, decay_c: float, M: int) -> 'FsCLF':
        """
        V(x) = xᵀPx mit linearer Abklingrate α(r) = decay_c·r

        Für positiv definites P ist ω die euklidische Norm mit
        α̲(r) = λ_min r², ᾱ(r) = λ_max r². Für singuläres P wird
        ω(x) = sqrt(xᵀPx) mit α̲ = ᾱ = r² verwendet.

        Raises:
            ValueError: P nicht symmetrisch / nicht positiv semidefinit
        """
        P = np.array(P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DimensionError(f"P muss quadratisch sein, erhalten: {P.shape}")
        if not np.allclose(P, P.T, rtol=0.0, atol=1e-12):
            raise ValueError("P muss symmetrisch sein")
        eigenvalues = np.linalg.eigvalsh(P)
        if eigenvalues[0] < -1e-12:
            raise ValueError(f"P muss positiv semidefinit sein (λ_min = {eigenvalues[0]:.3e})")
        if not 0.0 <= decay_c < 1.0:
            raise ValueError(f"decay_c muss in [0, 1) liegen, erhalten: {decay_c}")
        P.setflags(write=False)

        lam_min, lam_max = float(eigenvalues[0]), float(eigenvalues[-1])
        if lam_min > 1e-12:
            omega = MeasurementFunction.euclidean_norm(P.shape[0])
            lower = ComparisonFunction.power_max(lam_min, 2.0, 2.0)
            upper = ComparisonFunction.power_max(lam_max, 2.0, 2.0)
        else:
            omega = MeasurementFunction.quadratic_root(P)
            lower = upper = ComparisonFunction.power_max(1.0, 2.0, 2.0)

        return cls(
            kind='quadratic',
            omega=omega,
            lower=lower,
            upper=upper,
            decay=ComparisonFunction.linear(decay_c),
            M=M,
            P=P
        )

    @classmethod
    def omega_passthrough(
        cls,
        omega: MeasurementFunction,
        decay: ComparisonFunction,
        M: int
    ) -> 'FsCLF':
        """V = ω mit α̲ = ᾱ = id"""
        identity = ComparisonFunction.identity()
        return cls(kind='omega', omega=omega, lower=identity, upper=identity, decay=decay, M=M)

    def with_M(self, M: int) -> 'FsCLF':
        return replace(self, M=M)

    def with_decay(self, decay_c: float) -> 'FsCLF':
        if not 0.0 <= decay_c < 1.0:
            raise ValueError(f"decay_c muss in [0, 1) liegen, erhalten: {decay_c}")
        return replace(self, decay=ComparisonFunction.linear(decay_c))

    # ------------------------------------------------------------------
    # Auswertung
    # ------------------------------------------------------------------

    @property
    def state_dim(self) -> int:
        return self.omega.dim

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.state_dim,):
            raise DimensionError(f"Zustand der Länge {self.state_dim} erwartet, erhalten: {x.shape}")
        if self.kind == 'quadratic':
            return float(x @ self.P @ x)
        return self.omega(x)

    def gradient(self, x) -> Optional[np.ndarray]:
        """∇V(x); None, falls ω keinen Gradienten liefert"""
        x = np.asarray(x, dtype=float)
        if self.kind == 'quadratic':
            return 2.0 * (self.P @ x)
        if self.omega.gradient is None:
            return None
        return np.asarray(self.omega.gradient(x), dtype=float)

    def check_sandwich(self, samples: Iterable[np.ndarray], rtol: float = 1e-12) -> SandwichReport:
        """
        Prüft α̲(ω(x)) ≤ V(x) ≤ ᾱ(ω(x)) mit relativer Rundungstoleranz

        Returns:
            SandwichReport mit den größten (positiven) Verletzungen
        """
        worst_lower = -np.inf
        worst_upper = -np.inf
        count = 0
        for x in samples:
            w = self.omega(x)
            v = self.value(x)
            lo = self.lower(w)
            hi = self.upper(w)
            slack = rtol * max(abs(v), abs(lo), abs(hi), 1e-300)
            worst_lower = max(worst_lower, lo - v - slack)
            worst_upper = max(worst_upper, v - hi - slack)
            count += 1
        return SandwichReport(
            samples_tested=count,
            max_lower_violation=float(max(worst_lower, 0.0)) if count else 0.0,
            max_upper_violation=float(max(worst_upper, 0.0)) if count else 0.0
        )
