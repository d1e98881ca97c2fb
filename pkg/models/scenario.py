"""
Szenario-Konfiguration (JSON, schema_version 1)

Alle Felder werden beim Einlesen geprüft; Fehler nennen den Feldpfad.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.exceptions import ConfigValidationError
from models.closed_loop import Algorithm, ClosedLoopConfig, WarmStartPolicy
from models.system import Disturbance
from services.solver.nlp import SolverConfig

SCHEMA_VERSION = 1
BUILTIN_SYSTEMS = ('paper-nominal', 'paper-perturbed')
BUILTIN_DIMENSIONS = (3, 1)
ALGORITHMS = tuple(a.value for a in Algorithm if a != Algorithm.OPEN_LOOP)
OMEGAS = ('euclidean',)

Matrix = Tuple[Tuple[float, ...], ...]


# ============================================================================
# PRÜFHILFEN
# ============================================================================

def _require(data: Dict[str, Any], key: str, path: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigValidationError(path, "Objekt erwartet")
    if key not in data:
        raise ConfigValidationError(f"{path}.{key}" if path else key, "Pflichtfeld fehlt")
    return data[key]


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(path, f"Zahl erwartet, erhalten: {value!r}")
    if not np.isfinite(value):
        raise ConfigValidationError(path, "Zahl muss endlich sein")
    return float(value)


def _integer(value: Any, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigValidationError(path, f"Ganzzahl erwartet, erhalten: {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigValidationError(path, f"muss >= {minimum} sein, erhalten: {value}")
    return int(value)


def _vector(value: Any, path: str, length: Optional[int] = None, allow_null: bool = False) -> Tuple:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigValidationError(path, "nicht-leere Liste erwartet")
    if length is not None and len(value) != length:
        raise ConfigValidationError(path, f"Länge {length} erwartet, erhalten: {len(value)}")
    if allow_null:
        return tuple(None if v is None else _number(v, f"{path}[{i}]") for i, v in enumerate(value))
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))


def _matrix(value: Any, path: str) -> Matrix:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigValidationError(path, "Matrix (Liste von Zeilen) erwartet")
    rows = tuple(_vector(row, f"{path}[{i}]") for i, row in enumerate(value))
    if len({len(r) for r in rows}) != 1:
        raise ConfigValidationError(path, "Zeilen unterschiedlicher Länge")
    return rows


# ============================================================================
# TEILKONFIGURATIONEN
# ============================================================================

@dataclass(frozen=True)
class BoundsConfig:
    """Box-Grenzen; None = unbeschränkt in dieser Komponente"""

    lower: Tuple[Optional[float], ...]
    upper: Tuple[Optional[float], ...]

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        lower = np.array([-np.inf if v is None else v for v in self.lower])
        upper = np.array([np.inf if v is None else v for v in self.upper])
        return lower, upper

    def to_dict(self) -> Dict[str, Any]:
        return {'lower': list(self.lower), 'upper': list(self.upper)}

    @classmethod
    def from_dict(cls, data: Any, path: str, dim: int) -> 'BoundsConfig':
        lower = _vector(_require(data, 'lower', path), f"{path}.lower", dim, allow_null=True)
        upper = _vector(_require(data, 'upper', path), f"{path}.upper", dim, allow_null=True)
        for i, (lo, hi) in enumerate(zip(lower, upper)):
            if lo is not None and hi is not None and lo > hi:
                raise ConfigValidationError(f"{path}.lower[{i}]", "untere Grenze größer als obere")
        return cls(lower, upper)


@dataclass(frozen=True)
class LinearSystemConfig:
    A: Matrix
    B: Matrix
    disturbance: Optional[Disturbance] = None
    state_bounds: Optional[BoundsConfig] = None
    input_bounds: Optional[BoundsConfig] = None

    @property
    def state_dim(self) -> int:
        return len(self.A)

    @property
    def input_dim(self) -> int:
        return len(self.B[0])

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'A': [list(r) for r in self.A], 'B': [list(r) for r in self.B]}
        if self.disturbance is not None:
            data['disturbance'] = self.disturbance.to_dict()
        if self.state_bounds is not None:
            data['state_bounds'] = self.state_bounds.to_dict()
        if self.input_bounds is not None:
            data['input_bounds'] = self.input_bounds.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Any, path: str) -> 'LinearSystemConfig':
        A = _matrix(_require(data, 'A', path), f"{path}.A")
        n = len(A)
        if len(A[0]) != n:
            raise ConfigValidationError(f"{path}.A", f"quadratische Matrix erwartet, erhalten: {n}×{len(A[0])}")
        B = _matrix(_require(data, 'B', path), f"{path}.B")
        if len(B) != n:
            raise ConfigValidationError(f"{path}.B", f"{n} Zeilen erwartet, erhalten: {len(B)}")
        m = len(B[0])

        disturbance = None
        if data.get('disturbance') is not None:
            d_path = f"{path}.disturbance"
            d = data['disturbance']
            components = _require(d, 'components', d_path)
            if not isinstance(components, list) or not components:
                raise ConfigValidationError(f"{d_path}.components", "nicht-leere Liste erwartet")
            for i, comp in enumerate(components):
                _integer(comp, f"{d_path}.components[{i}]", 0)
                if comp >= n:
                    raise ConfigValidationError(
                        f"{d_path}.components[{i}]", f"Komponente {comp} außerhalb 0..{n - 1}"
                    )
            disturbance = Disturbance(
                amplitude=_number(_require(d, 'amplitude', d_path), f"{d_path}.amplitude"),
                frequency=_number(_require(d, 'frequency', d_path), f"{d_path}.frequency"),
                components=tuple(components),
                phase=_number(d.get('phase', 0.0), f"{d_path}.phase")
            )

        state_bounds = input_bounds = None
        if data.get('state_bounds') is not None:
            state_bounds = BoundsConfig.from_dict(data['state_bounds'], f"{path}.state_bounds", n)
        if data.get('input_bounds') is not None:
            input_bounds = BoundsConfig.from_dict(data['input_bounds'], f"{path}.input_bounds", m)
        return cls(A, B, disturbance, state_bounds, input_bounds)


@dataclass(frozen=True)
class SystemConfig:
    builtin: Optional[str] = None
    linear: Optional[LinearSystemConfig] = None

    @property
    def state_dim(self) -> int:
        return BUILTIN_DIMENSIONS[0] if self.builtin else self.linear.state_dim

    @property
    def input_dim(self) -> int:
        return BUILTIN_DIMENSIONS[1] if self.builtin else self.linear.input_dim

    def to_dict(self) -> Dict[str, Any]:
        if self.builtin:
            return {'builtin': self.builtin}
        return {'linear': self.linear.to_dict()}

    @classmethod
    def from_dict(cls, data: Any) -> 'SystemConfig':
        if not isinstance(data, dict) or len(data) != 1 or not {'builtin', 'linear'} & set(data):
            raise ConfigValidationError('system', "genau einer der Schlüssel 'builtin' oder 'linear' erwartet")
        if 'builtin' in data:
            if data['builtin'] not in BUILTIN_SYSTEMS:
                raise ConfigValidationError(
                    'system.builtin', f"unbekannt: {data['builtin']!r}, erlaubt: {', '.join(BUILTIN_SYSTEMS)}"
                )
            return cls(builtin=data['builtin'])
        return cls(linear=LinearSystemConfig.from_dict(data['linear'], 'system.linear'))


@dataclass(frozen=True)
class FsclfConfig:
    kind: str                       # 'quadratic' | 'omega-passthrough'
    decay_c: float
    M: int
    P: Optional[Matrix] = None
    omega: str = 'euclidean'

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == 'quadratic':
            body = {'P': [list(r) for r in self.P], 'decay_c': self.decay_c, 'M': self.M}
        else:
            body = {'omega': self.omega, 'decay_c': self.decay_c, 'M': self.M}
        return {self.kind: body}

    @classmethod
    def from_dict(cls, data: Any, state_dim: int) -> 'FsclfConfig':
        if not isinstance(data, dict) or len(data) != 1 or not {'quadratic', 'omega-passthrough'} & set(data):
            raise ConfigValidationError(
                'fsclf', "genau einer der Schlüssel 'quadratic' oder 'omega-passthrough' erwartet"
            )
        kind = next(iter(data))
        body = data[kind]
        path = f"fsclf.{kind}"
        decay_c = _number(_require(body, 'decay_c', path), f"{path}.decay_c")
        if not 0.0 <= decay_c < 1.0:
            raise ConfigValidationError(f"{path}.decay_c", f"muss in [0, 1) liegen, erhalten: {decay_c}")
        M = _integer(_require(body, 'M', path), f"{path}.M", 1)

        if kind == 'omega-passthrough':
            omega = body.get('omega', 'euclidean')
            if omega not in OMEGAS:
                raise ConfigValidationError(f"{path}.omega", f"unbekannt: {omega!r}")
            return cls(kind=kind, decay_c=decay_c, M=M, omega=omega)

        P = _matrix(_require(body, 'P', path), f"{path}.P")
        P_arr = np.array(P)
        if P_arr.shape != (state_dim, state_dim):
            raise ConfigValidationError(
                f"{path}.P", f"Form ({state_dim}, {state_dim}) erwartet, erhalten: {P_arr.shape}"
            )
        if not np.allclose(P_arr, P_arr.T, rtol=0.0, atol=1e-12):
            raise ConfigValidationError(f"{path}.P", "muss symmetrisch sein")
        if np.linalg.eigvalsh(P_arr)[0] < -1e-12:
            raise ConfigValidationError(f"{path}.P", "muss positiv semidefinit sein")
        return cls(kind=kind, decay_c=decay_c, M=M, P=P)


@dataclass(frozen=True)
class VariantConfig:
    algorithm: str
    horizon: int

    def to_dict(self) -> Dict[str, Any]:
        return {'algorithm': self.algorithm, 'horizon': self.horizon}

    @classmethod
    def from_dict(cls, data: Any, path: str) -> 'VariantConfig':
        prefix = f"{path}." if path else ""
        algorithm = _require(data, 'algorithm', path)
        if algorithm not in ALGORITHMS:
            raise ConfigValidationError(
                f"{prefix}algorithm", f"unbekannt: {algorithm!r}, erlaubt: {', '.join(ALGORITHMS)}"
            )
        horizon = _integer(_require(data, 'horizon', path), f"{prefix}horizon", 1)
        return cls(algorithm, horizon)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = 'results'
    prefix: str = 'fsclf_mpc'

    def to_dict(self) -> Dict[str, Any]:
        return {'directory': self.directory, 'prefix': self.prefix}

    @classmethod
    def from_dict(cls, data: Any) -> 'OutputConfig':
        if not isinstance(data, dict):
            raise ConfigValidationError('output', "Objekt erwartet")
        result = cls(**{k: v for k, v in data.items() if k in ('directory', 'prefix')})
        for key in ('directory', 'prefix'):
            value = getattr(result, key)
            if not isinstance(value, str) or not value:
                raise ConfigValidationError(f"output.{key}", "nicht-leere Zeichenkette erwartet")
        return result


@dataclass(frozen=True)
class AnalysisConfig:
    window_start: int = 36
    deviation_component: int = 0
    certification_samples: int = 64

    def to_dict(self) -> Dict[str, Any]:
        return {
            'window_start': self.window_start,
            'deviation_component': self.deviation_component,
            'certification_samples': self.certification_samples
        }

    @classmethod
    def from_dict(cls, data: Any) -> 'AnalysisConfig':
        if not isinstance(data, dict):
            raise ConfigValidationError('analysis', "Objekt erwartet")
        defaults = cls()
        return cls(
            window_start=_integer(data.get('window_start', defaults.window_start), 'analysis.window_start', 0),
            deviation_component=_integer(
                data.get('deviation_component', defaults.deviation_component), 'analysis.deviation_component', 0
            ),
            certification_samples=_integer(
                data.get('certification_samples', defaults.certification_samples),
                'analysis.certification_samples', 1
            )
        )


# ============================================================================
# SZENARIO
# ============================================================================

@dataclass(frozen=True)
class ScenarioConfig:
    """
    Vollständige Beschreibung eines Experiments
    """

    name: str
    system: SystemConfig
    fsclf: FsclfConfig
    algorithm: str
    horizon: int
    initial_state: Tuple[float, ...]
    total_steps: int = 100
    warm_start_policy: str = WarmStartPolicy.SHIFT_PREVIOUS.value
    variants: Tuple[VariantConfig, ...] = ()
    solver: Dict[str, Any] = field(default_factory=dict)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    # ------------------------------------------------------------------
    # Abgeleitete Objekte
    # ------------------------------------------------------------------

    def solver_config(self) -> SolverConfig:
        return SolverConfig.from_dict(self.solver)

    def run_variants(self) -> List[VariantConfig]:
        """Varianten für compare (Default: nur die Hauptvariante)"""
        return list(self.variants) or [VariantConfig(self.algorithm, self.horizon)]

    def closed_loop_config(self, variant: Optional[VariantConfig] = None) -> ClosedLoopConfig:
        variant = variant or VariantConfig(self.algorithm, self.horizon)
        return ClosedLoopConfig(
            algorithm=Algorithm(variant.algorithm),
            horizon=variant.horizon,
            total_steps=self.total_steps,
            solver=self.solver_config(),
            warm_start_policy=WarmStartPolicy(self.warm_start_policy)
        )

    def with_overrides(
        self,
        out_dir: Optional[str] = None,
        seed: Optional[int] = None,
        tol: Optional[float] = None
    ) -> 'ScenarioConfig':
        """CLI-Überschreibungen (--out, --seed, --tol)"""
        config = self
        if out_dir is not None:
            config = replace(config, output=replace(config.output, directory=str(out_dir)))
        if seed is not None:
            config = replace(config, seed=int(seed))
        if tol is not None:
            if not tol > 0.0:
                raise ConfigValidationError('--tol', f"muss > 0 sein, erhalten: {tol}")
            config = replace(config, solver={**config.solver, 'feasibility_tol': float(tol)})
        return config

    # ------------------------------------------------------------------
    # Serialisierung
    # ------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'schema_version': SCHEMA_VERSION,
            'name': self.name,
            'system': self.system.to_dict(),
            'fsclf': self.fsclf.to_dict(),
            'algorithm': self.algorithm,
            'horizon': self.horizon,
            'initial_state': list(self.initial_state),
            'total_steps': self.total_steps,
            'warm_start_policy': self.warm_start_policy,
            'solver': dict(self.solver),
            'output': self.output.to_dict(),
            'seed': self.seed,
            'analysis': self.analysis.to_dict()
        }
        if self.variants:
            data['variants'] = [v.to_dict() for v in self.variants]
        return data

    @classmethod
    def from_dict(cls, data: Any) -> 'ScenarioConfig':
        """
        Deserialisierung mit Prüfung aller Felder

        Raises:
            ConfigValidationError: erstes ungültiges Feld
        """
        if not isinstance(data, dict):
            raise ConfigValidationError('<root>', "JSON-Objekt erwartet")
        version = data.get('schema_version', SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigValidationError('schema_version', f"Version {SCHEMA_VERSION} erwartet, erhalten: {version!r}")

        name = data.get('name', 'scenario')
        if not isinstance(name, str) or not name:
            raise ConfigValidationError('name', "nicht-leere Zeichenkette erwartet")

        system = SystemConfig.from_dict(_require(data, 'system', ''))
        n = system.state_dim
        fsclf = FsclfConfig.from_dict(_require(data, 'fsclf', ''), n)

        primary = VariantConfig.from_dict(data, '')
        _check_variant_horizon(primary, fsclf, 'horizon')
        raw_variants = data.get('variants') or []
        if not isinstance(raw_variants, list):
            raise ConfigValidationError('variants', "Liste erwartet")
        variants = tuple(
            VariantConfig.from_dict(v, f"variants[{i}]") for i, v in enumerate(raw_variants)
        )
        for i, variant in enumerate(variants):
            _check_variant_horizon(variant, fsclf, f"variants[{i}].horizon")

        initial_state = _vector(_require(data, 'initial_state', ''), 'initial_state', n)
        total_steps = _integer(data.get('total_steps', 100), 'total_steps', 1)
        policy = data.get('warm_start_policy', WarmStartPolicy.SHIFT_PREVIOUS.value)
        if policy not in [p.value for p in WarmStartPolicy]:
            raise ConfigValidationError('warm_start_policy', f"unbekannt: {policy!r}")

        solver = data.get('solver') or {}
        if not isinstance(solver, dict):
            raise ConfigValidationError('solver', "Objekt erwartet")
        try:
            SolverConfig.from_dict(solver)
        except (TypeError, ValueError) as e:
            raise ConfigValidationError('solver', str(e)) from e

        analysis = AnalysisConfig.from_dict(data.get('analysis') or {})
        if analysis.deviation_component >= n:
            raise ConfigValidationError(
                'analysis.deviation_component', f"Komponente außerhalb 0..{n - 1}"
            )
        seed = _integer(data.get('seed', 0), 'seed', 0)

        return cls(
            name=name,
            system=system,
            fsclf=fsclf,
            algorithm=primary.algorithm,
            horizon=primary.horizon,
            initial_state=initial_state,
            total_steps=total_steps,
            warm_start_policy=policy,
            variants=variants,
            solver=dict(solver),
            output=OutputConfig.from_dict(data.get('output') or {}),
            seed=seed,
            analysis=analysis
        )


def _check_variant_horizon(variant: VariantConfig, fsclf: FsclfConfig, path: str) -> None:
    """MultiStep und ShrinkingUpdated laufen mit dem Horizont M der fsCLF"""
    if variant.algorithm in (Algorithm.MULTI_STEP.value, Algorithm.SHRINKING_UPDATED.value):
        if variant.horizon != fsclf.M:
            raise ConfigValidationError(
                path,
                f"{variant.algorithm} benötigt Horizont = M = {fsclf.M}, erhalten: {variant.horizon}"
            )
