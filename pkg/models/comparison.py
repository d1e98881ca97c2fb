"""
Vergleichsfunktionen der Klasse K_inf (Beträge ≥ 0 auf ≥ 0)

Unterstützte Formen:
    linear(c)            r ↦ c·r
    power_max(q, a, b)   r ↦ q·max(r^a, r^b)
    composition(f1..fk)  r ↦ f1(f2(...fk(r)))
"""

from dataclasses import dataclass
from typing import Any, Dict, Tuple, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

KINDS = ('linear', 'power_max', 'composition')


@dataclass(frozen=True)
class ComparisonFunction:
    """
    Unveränderliche Vergleichsfunktion

    linear(0) ist als Sonderfall zugelassen (nicht streng wachsend), weil
    K-Beschränktheits-Fits einen der beiden Koeffizienten auf 0 setzen können.
    """

    kind: str
    params: Tuple[float, ...] = ()
    parts: Tuple['ComparisonFunction', ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unbekannte Vergleichsfunktion: {self.kind}")
        object.__setattr__(self, 'params', tuple(float(p) for p in self.params))
        if self.kind == 'linear':
            if len(self.params) != 1 or not self.params[0] >= 0.0 or not np.isfinite(self.params[0]):
                raise ValueError(f"linear(c) benötigt endliches c >= 0, erhalten: {self.params}")
        elif self.kind == 'power_max':
            if len(self.params) != 3 or not all(p > 0.0 and np.isfinite(p) for p in self.params):
                raise ValueError(f"power_max(q, a, b) benötigt q, a, b > 0, erhalten: {self.params}")
        elif not self.parts:
            raise ValueError("Komposition benötigt mindestens eine Funktion")

    # ------------------------------------------------------------------
    # Konstruktoren
    # ------------------------------------------------------------------

    @classmethod
    def linear(cls, c: float) -> 'ComparisonFunction':
        return cls('linear', (c,))

    @classmethod
    def identity(cls) -> 'ComparisonFunction':
        return cls.linear(1.0)

    @classmethod
    def power_max(cls, q: float, a: float, b: float) -> 'ComparisonFunction':
        return cls('power_max', (q, a, b))

    @classmethod
    def compose(cls, *functions: 'ComparisonFunction') -> 'ComparisonFunction':
        """compose(f, g)(r) = f(g(r))"""
        if len(functions) == 1:
            return functions[0]
        return cls('composition', (), tuple(functions))

    # ------------------------------------------------------------------
    # Auswertung
    # ------------------------------------------------------------------

    def __call__(self, r: ArrayLike) -> ArrayLike:
        values = np.asarray(r, dtype=float)
        if np.any(values < 0.0):
            raise ValueError("Vergleichsfunktionen sind nur für r >= 0 definiert")
        result = self._evaluate(values)
        if np.ndim(result) == 0:
            return float(result)
        return result

    def _evaluate(self, r: np.ndarray) -> np.ndarray:
        if self.kind == 'linear':
            return self.params[0] * r
        if self.kind == 'power_max':
            q, a, b = self.params
            return q * np.maximum(r ** a, r ** b)
        for part in reversed(self.parts):
            r = part._evaluate(r)
        return r

    @property
    def is_linear(self) -> bool:
        if self.kind == 'linear':
            return True
        if self.kind == 'composition':
            return all(p.is_linear for p in self.parts)
        return False

    @property
    def slope(self) -> float:
        """Steigung einer (zusammengesetzt) linearen Funktion"""
        if not self.is_linear:
            raise ValueError(f"{self.kind} ist nicht linear")
        if self.kind == 'linear':
            return self.params[0]
        return float(np.prod([p.slope for p in self.parts]))

    def check_class_k(self, grid: np.ndarray) -> bool:
        """Prüft f(0) = 0 und strenges Wachstum auf einem aufsteigenden Gitter"""
        r = np.unique(np.asarray(grid, dtype=float))
        values = self._evaluate(np.concatenate([[0.0], r[r > 0.0]]))
        return bool(values[0] == 0.0 and np.all(np.diff(values) > 0.0))

    def is_below_identity(self, grid: np.ndarray) -> bool:
        """f(r) < r für alle r > 0 des Gitters"""
        r = np.asarray(grid, dtype=float)
        r = r[r > 0.0]
        return bool(np.all(self._evaluate(r) < r))

    # ------------------------------------------------------------------
    # Serialisierung
    # ------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == 'composition':
            return {'kind': self.kind, 'parts': [p.to_dict() for p in self.parts]}
        return {'kind': self.kind, 'params': list(self.params)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ComparisonFunction':
        if data['kind'] == 'composition':
            return cls('composition', (), tuple(cls.from_dict(p) for p in data['parts']))
        return cls(data['kind'], tuple(data['params']))
