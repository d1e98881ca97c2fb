"""
Finite-Differenzen-Ableitungen
"""

from typing import Callable

import numpy as np

from core.exceptions import NonFiniteEvaluationError


def _steps(x: np.ndarray, fd_step: float) -> np.ndarray:
    return fd_step * (1.0 + np.abs(x))


def finite_diff_gradient(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    fd_step: float = 1e-6
) -> np.ndarray:
    """
    Zentraler Differenzenquotient mit Schrittweite fd_step·(1+|x_i|)

    Raises:
        NonFiniteEvaluationError: f liefert an einem Stützpunkt keinen endlichen Wert
    """
    x = np.array(x, dtype=float)
    grad = np.empty_like(x)
    for i, h in enumerate(_steps(x, fd_step)):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteEvaluationError(f"Nicht-endlicher Funktionswert bei Komponente {i}")
        grad[i] = (fp - fm) / (xp[i] - xm[i])
    return grad


def finite_diff_jacobian(
    f: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    fd_step: float = 1e-6
) -> np.ndarray:
    """Jacobi-Matrix df/dx (Spalte j = zentrale Differenz in Richtung x_j)"""
    x = np.array(x, dtype=float)
    columns = []
    for j, h in enumerate(_steps(x, fd_step)):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        fp = np.asarray(f(xp), dtype=float)
        fm = np.asarray(f(xm), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFiniteEvaluationError(f"Nicht-endlicher Funktionswert bei Komponente {j}")
        columns.append((fp - fm) / (xp[j] - xm[j]))
    return np.column_stack(columns)
