"""
Fehlerhierarchie des fsCLF-MPC-Werkzeugs

Jede Fehlerklasse trägt den Exit-Code, den die Kommandozeile bei diesem
Fehler zurückgibt:
    2 = ungültige Eingabe / Konfiguration
    3 = Optimalsteuerungsproblem (OCP) unzulässig
    4 = Solver-Fehler / nicht-endliche Werte
    5 = Datei-I/O
"""

from typing import Optional, Sequence


class FsclfMpcError(Exception):
    """Basisklasse aller Fehler des Werkzeugs"""

    exit_code: int = 1


# ============================================================================
# EINGABE / KONFIGURATION (Exit-Code 2)
# ============================================================================

class ConfigValidationError(FsclfMpcError, ValueError):
    """Ungültiges Feld in einer Szenario-Konfiguration"""

    exit_code = 2

    def __init__(self, field: str, message: str, line: Optional[int] = None):
        self.field = field
        self.message = message
        self.line = line
        location = f" (Zeile {line})" if line is not None else ""
        super().__init__(f"Feld '{field}'{location}: {message}")

    def with_line(self, line: Optional[int]) -> 'ConfigValidationError':
        """Kopie mit Zeilenangabe"""
        return ConfigValidationError(self.field, self.message, line)


class DimensionError(FsclfMpcError, ValueError):
    """Dimensionen von Zustand / Eingang passen nicht zum System"""

    exit_code = 2


class HorizonError(FsclfMpcError, ValueError):
    """Horizont oder Restlänge außerhalb des zulässigen Bereichs"""

    exit_code = 2


class SampleError(FsclfMpcError, ValueError):
    """Leere Stichprobe oder Stichprobe außerhalb von X × U"""

    exit_code = 2


class TrajectoryError(FsclfMpcError, ValueError):
    """Trajektorie zu kurz, Komponente oder Zeitfenster ungültig"""

    exit_code = 2


# ============================================================================
# UNZULÄSSIGKEIT (Exit-Code 3)
# ============================================================================

class InfeasibleStateError(FsclfMpcError):
    """Anfangszustand liegt nicht in der Zustandsmenge"""

    exit_code = 3


class OcpInfeasibleError(FsclfMpcError):
    """OCP konnte nicht innerhalb der Toleranz zulässig gelöst werden"""

    exit_code = 3

    def __init__(self, message: str, residuals: Sequence[float] = (), result=None):
        self.residuals = tuple(float(r) for r in residuals)
        self.result = result
        super().__init__(message)

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)


class MpcInfeasibleError(FsclfMpcError):
    """Regelkreis abgebrochen, weil ein OCP auch nach Wiederholung unzulässig blieb"""

    exit_code = 3

    def __init__(self, cycle: int, step: int, time: int, best_residual: float):
        self.cycle = cycle
        self.step = step
        self.time = time
        self.best_residual = best_residual
        super().__init__(
            f"OCP unzulässig in Zyklus {cycle}, Schritt {step} (t={time}), "
            f"bestes Residuum {best_residual:.3e}"
        )


class FitUndefinedError(FsclfMpcError):
    """Transientenkonstanten nicht definiert (unzulässige Stichprobe)"""

    exit_code = 3


class CertificationFailedError(FsclfMpcError):
    """fsCLF-Zertifikat an mindestens einer Stichprobe verletzt"""

    exit_code = 3


# ============================================================================
# NUMERIK (Exit-Code 4)
# ============================================================================

class NonFiniteStateError(FsclfMpcError, ArithmeticError):
    """Zustand wurde während einer Simulation nicht-endlich"""

    exit_code = 4

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"Nicht-endlicher Zustand bei Schritt {step}")


class NonFiniteEvaluationError(FsclfMpcError, ArithmeticError):
    """Kosten- oder Restriktionsfunktion liefert nicht-endlichen Wert"""

    exit_code = 4


class SolverFailureError(FsclfMpcError):
    """Solver erreichte Iterationsgrenze ohne zulässigen Punkt"""

    exit_code = 4

    def __init__(self, message: str, result=None):
        self.result = result
        super().__init__(message)


class MpcSolverError(FsclfMpcError):
    """Regelkreis abgebrochen, weil der Solver auch nach Wiederholung versagte"""

    exit_code = 4

    def __init__(self, cycle: int, step: int, time: int, reason: str):
        self.cycle = cycle
        self.step = step
        self.time = time
        self.reason = reason
        super().__init__(
            f"Solver-Versagen in Zyklus {cycle}, Schritt {step} (t={time}): {reason}"
        )


# ============================================================================
# DATEIEN (Exit-Code 5)
# ============================================================================

class OutputError(FsclfMpcError, OSError):
    """Lesen oder Schreiben einer Datei fehlgeschlagen"""

    exit_code = 5
