"""
Zustands- und Eingangsmengen (unbeschränkt oder Box)
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from core.exceptions import DimensionError


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """
    Teilmenge des R^dim

    Ohne Grenzen ist die Menge unbeschränkt. Eine Box darf einzelne
    unendliche Grenzen enthalten (±inf = Komponente frei).
    """

    dim: int
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError(f"Dimension muss >= 1 sein, erhalten: {self.dim}")
        if (self.lower is None) != (self.upper is None):
            raise DimensionError("Box benötigt untere und obere Grenze")
        if self.lower is not None:
            lower = _frozen(self.lower)
            upper = _frozen(self.upper)
            if lower.shape != (self.dim,) or upper.shape != (self.dim,):
                raise DimensionError(
                    f"Grenzen müssen Länge {self.dim} haben, "
                    f"erhalten: {lower.shape}, {upper.shape}"
                )
            if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
                raise DimensionError("Grenzen dürfen nicht NaN sein")
            if np.any(lower > upper):
                raise DimensionError("Untere Grenze größer als obere Grenze")
            object.__setattr__(self, 'lower', lower)
            object.__setattr__(self, 'upper', upper)

    @classmethod
    def unbounded(cls, dim: int) -> 'ConstraintSet':
        return cls(dim=dim)

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> 'ConstraintSet':
        lower = np.asarray(lower, dtype=float)
        return cls(dim=lower.size, lower=lower, upper=upper)

    @property
    def kind(self) -> str:
        return 'unbounded' if self.lower is None else 'box'

    @property
    def is_unbounded(self) -> bool:
        if self.lower is None:
            return True
        return bool(np.all(np.isneginf(self.lower)) and np.all(np.isposinf(self.upper)))

    def violations(self, value) -> np.ndarray:
        """
        Komponentenweise Verletzungen max(0, v - ub) bzw. max(0, lb - v)

        Returns:
            Array der Länge dim (0 = erfüllt)
        """
        v = np.asarray(value, dtype=float)
        if v.shape != (self.dim,):
            raise DimensionError(f"Vektor der Länge {self.dim} erwartet, erhalten: {v.shape}")
        if self.lower is None:
            return np.zeros(self.dim)
        with np.errstate(invalid='ignore'):
            over = np.maximum(v - self.upper, 0.0)
            under = np.maximum(self.lower - v, 0.0)
        return np.nan_to_num(np.maximum(over, under), nan=0.0)

    def contains(self, value, tol: float = 1e-9) -> bool:
        return bool(np.all(self.violations(value) <= tol))

    def project(self, value) -> np.ndarray:
        """Euklidische Projektion auf die Menge"""
        v = np.array(value, dtype=float)
        if self.lower is None:
            return v
        return np.clip(v, self.lower, self.upper)

    def to_dict(self) -> Optional[Dict[str, Any]]:
        """Serialisierung (None = unbeschränkt, ±inf als null)"""
        if self.lower is None:
            return None

        def encode(arr):
            return [None if not np.isfinite(a) else float(a) for a in arr]

        return {'lower': encode(self.lower), 'upper': encode(self.upper)}
