"""
Analyse-Service: Zertifizierung von fsCLFs, Horizontschranke, Kenngrößen von Trajektorien
"""

import logging
import math
from typing import Optional, Sequence, Union

import numpy as np

from core.exceptions import (
    FitUndefinedError, HorizonError, OcpInfeasibleError, SampleError, SolverFailureError,
    TrajectoryError
)
from models.closed_loop import ClosedLoopResult
from models.lyapunov import FsCLF, MeasurementFunction
from models.ocp import Classic, Contractive, OcpSpec
from models.reports import (
    CertificationReport, ConverseDecayReport, ExponentialEnvelope, HorizonBoundInputs,
    SampleCertification, TransientConstants, ValueBoundCheck, as_tuple
)
from models.system import ControlSystem
from models.trajectory import Trajectory
from services.ocp_service import OcpService
from services.solver.nlp import SolverConfig

logger = logging.getLogger(__name__)

# Sicherheitsabstand des Zertifikats: Verhältnis muss < 1 − CERTIFICATION_MARGIN sein
CERTIFICATION_MARGIN = 1e-3
# Zyklen, deren Startwert ω darunter liegt, zählen in der Umkehrprüfung nicht
ZERO_MEASURE = 1e-12

TrajectoryLike = Union[ClosedLoopResult, Trajectory]


def _states_of(source: TrajectoryLike) -> np.ndarray:
    if isinstance(source, ClosedLoopResult):
        return source.trajectory.states
    return source.states


class AnalysisService:
    """
    Auswertungen rund um fsCLF und MPC-Trajektorien
    """

    def __init__(self, ocp_service: Optional[OcpService] = None):
        self.ocp = ocp_service or OcpService()
        self.logger = logger

    # ========================================================================
    # STICHPROBEN
    # ========================================================================

    @staticmethod
    def level_set_samples(fsclf: FsCLF, count: int = 64, seed: int = 0) -> list:
        """
        Punkte auf der Niveaumenge V = 1

        n = 3: Fibonacci-Kugel, n = 2: Kreis, n = 1: ±1,
        sonst normalverteilte Richtungen mit festem Seed.
        """
        n = fsclf.state_dim
        if count < 1:
            raise SampleError("Anzahl der Stichproben muss >= 1 sein")
        if n == 1:
            directions = np.array([[1.0], [-1.0]] * ((count + 1) // 2))[:count]
        elif n == 2:
            angles = 2.0 * np.pi * np.arange(count) / count
            directions = np.column_stack([np.cos(angles), np.sin(angles)])
        elif n == 3:
            golden = np.pi * (3.0 - np.sqrt(5.0))
            i = np.arange(count)
            z = 1.0 - 2.0 * (i + 0.5) / count
            radius = np.sqrt(1.0 - z ** 2)
            directions = np.column_stack([radius * np.cos(golden * i), radius * np.sin(golden * i), z])
        else:
            rng = np.random.default_rng(seed)
            directions = rng.standard_normal((count, n))

        samples = []
        for d in directions:
            v = fsclf.value(d)
            samples.append(d / np.sqrt(v) if v > 0.0 else d)
        return samples

    # ========================================================================
    # ZERTIFIZIERUNG
    # ========================================================================

    def certify_fsclf(
        self,
        system: ControlSystem,
        fsclf: FsCLF,
        M: Optional[int] = None,
        decay_c: Optional[float] = None,
        samples: Optional[Sequence[np.ndarray]] = None,
        config: Optional[SolverConfig] = None,
        search_best_ratio: bool = True
    ) -> CertificationReport:
        """
        Prüft an jeder Stichprobe, ob OCP-1 zulässig lösbar ist

        Unzulässige Stichproben werden protokolliert, nicht als Fehler geworfen.

        Args:
            system: Regelstrecke (nominal verwendet)
            fsclf: Kandidat
            M: Schrittzahl (Default: fsclf.M)
            decay_c: lineare Abklingrate (Default: die der fsCLF)
            samples: Zustände (Default: 64 Punkte auf V = 1)
            config: Solver-Toleranzen
            search_best_ratio: zusätzlich min V(x(M)) / V(ξ) bestimmen

        Returns:
            CertificationReport
        """
        config = config or SolverConfig()
        candidate = fsclf
        if M is not None:
            candidate = candidate.with_M(M)
        if decay_c is not None:
            candidate = candidate.with_decay(decay_c)
        if samples is None:
            samples = self.level_set_samples(candidate)
        if len(samples) == 0:
            raise SampleError("Stichprobe für die Zertifizierung ist leer")

        nominal = system.nominal()
        records = [self._certify_sample(nominal, candidate, xi, config, search_best_ratio)
                   for xi in samples]

        feasible = [r for r in records if r.feasible]
        ratios = [r.ratio for r in feasible]
        c = candidate.decay.slope if candidate.decay.is_linear else float('nan')
        report = CertificationReport(
            M=candidate.M,
            decay_c=c,
            samples_tested=len(records),
            feasible_count=len(feasible),
            min_ratio=float(min(ratios)) if ratios else float('nan'),
            max_ratio=float(max(ratios)) if ratios else float('nan'),
            worst_residual=float(max(r.residual for r in records)),
            margin=CERTIFICATION_MARGIN,
            samples=tuple(records)
        )
        self.logger.info(
            f"Zertifizierung M={report.M}: {report.feasible_count}/{report.samples_tested} zulässig, "
            f"Verhältnis max {report.max_ratio:.4f} → {report.verdict}"
        )
        return report

    def _certify_sample(
        self,
        system: ControlSystem,
        fsclf: FsCLF,
        xi: np.ndarray,
        config: SolverConfig,
        search_best_ratio: bool
    ) -> SampleCertification:
        xi = np.asarray(xi, dtype=float)
        v0 = fsclf.value(xi)
        if v0 == 0.0:
            return SampleCertification(
                state=as_tuple(xi), feasible=True, status='optimal', ratio=0.0,
                residual=0.0, best_ratio=0.0, v_profile=(0.0,) * (fsclf.M + 1)
            )

        spec = OcpSpec(system, fsclf, xi, Contractive(fsclf.M))
        best_ratio = self.ocp.best_terminal_ratio(spec, config) if search_best_ratio else None
        try:
            solution = self.ocp.solve_ocp(spec, config)
        except (OcpInfeasibleError, SolverFailureError) as error:
            result = error.result
            ratio = float('nan')
            if result is not None:
                controls = self.ocp.controls_from_result(spec, result)
                predicted = self.ocp.dynamics.rollout(system, xi, controls)
                ratio = fsclf.value(predicted.final_state) / v0
            residual = result.max_residual if result is not None else float('inf')
            self.logger.debug(f"Stichprobe {xi.tolist()} unzulässig (Residuum {residual:.3e})")
            return SampleCertification(
                state=as_tuple(xi), feasible=False,
                status=result.status.value if result is not None else 'infeasible',
                ratio=ratio, residual=residual, best_ratio=best_ratio
            )

        profile = tuple(fsclf.value(x) / v0 for x in solution.predicted.states)
        return SampleCertification(
            state=as_tuple(xi),
            feasible=True,
            status=solution.status.value,
            ratio=profile[-1],
            residual=solution.max_residual,
            best_ratio=best_ratio,
            v_profile=profile
        )

    # ========================================================================
    # UMKEHRPRÜFUNG UND HORIZONTSCHRANKE
    # ========================================================================

    @staticmethod
    def converse_decay_check(
        source: TrajectoryLike,
        omega: MeasurementFunction,
        M: int
    ) -> ConverseDecayReport:
        """
        λ̂ = max_k ω(x((k+1)M)) / ω(x(kM)) über Zyklen mit ω(x(kM)) ≥ ZERO_MEASURE

        Zyklen mit ω(x(kM)) < ZERO_MEASURE werden übersprungen; ohne verwertbaren Zyklus
        ist das Ergebnis leer (λ̂ = 0, vacuous).

        Raises:
            TrajectoryError: weniger als M+1 Zustände
        """
        if M < 1:
            raise HorizonError(f"M muss >= 1 sein, erhalten: {M}")
        states = _states_of(source)
        if states.shape[0] < M + 1:
            raise TrajectoryError(f"Trajektorie mit {states.shape[0]} Zuständen kürzer als M+1={M + 1}")
        ratios = []
        for k in range((states.shape[0] - 1) // M):
            w_start = omega(states[k * M])
            if w_start < ZERO_MEASURE:
                continue
            ratios.append(omega(states[(k + 1) * M]) / w_start)
        return ConverseDecayReport(
            lambda_hat=float(max(ratios)) if ratios else 0.0,
            cycles_used=len(ratios),
            cycle_ratios=tuple(ratios)
        )

    @staticmethod
    def horizon_bound(gamma: float) -> int:
        """
        Kleinstes N mit garantierter Stabilität aus V_N ≤ γ·V

        N = ⌊2 + ln(γ−1)/(ln γ − ln(γ−1))⌋ + 1 für γ > 1, sonst 1.
        Die Formel gilt für jedes γ > 1, auch knapp darüber: γ = 1.0001
        liefert den Wert ≈ 1.00001 und damit N = 2. N = 1 nur für γ ≤ 1.

        Raises:
            ValueError: γ ≤ 0
        """
        if not gamma > 0.0 or not math.isfinite(gamma):
            raise ValueError(f"γ muss endlich und > 0 sein, erhalten: {gamma}")
        if gamma <= 1.0:
            return 1
        bound = 2.0 + math.log(gamma - 1.0) / (math.log(gamma) - math.log(gamma - 1.0))
        return max(1, math.floor(bound) + 1)

    def horizon_bound_from(self, inputs: HorizonBoundInputs) -> int:
        return self.horizon_bound(inputs.gamma)

    def fit_transient_constants(
        self,
        system: ControlSystem,
        fsclf: FsCLF,
        M: Optional[int] = None,
        samples: Optional[Sequence[np.ndarray]] = None,
        config: Optional[SolverConfig] = None,
        report: Optional[CertificationReport] = None
    ) -> TransientConstants:
        """
        c = max V(x(M))/V(ξ),  d = max(1, max_{1≤i<M} V(x(i))/V(ξ)) aus OCP-1-Lösungen

        Ein bereits vorhandener Zertifizierungsbericht wird wiederverwendet.

        Raises:
            FitUndefinedError: eine Stichprobe ist unzulässig
        """
        if report is None:
            report = self.certify_fsclf(system, fsclf, M=M, samples=samples, config=config,
                                        search_best_ratio=False)
        if report.feasible_count < report.samples_tested:
            bad = report.infeasible_samples[0]
            raise FitUndefinedError(
                f"Transientenkonstanten undefiniert: OCP-1 unzulässig bei ξ = {list(bad.state)}"
            )
        used = [s for s in report.samples if len(s.v_profile) == report.M + 1]
        c = max(s.v_profile[-1] for s in used)
        d_transient = max((max(s.v_profile[1:report.M], default=0.0) for s in used), default=0.0)
        constants = TransientConstants(
            c=float(c),
            d=float(max(1.0, d_transient)),
            d_transient=float(d_transient),
            M=report.M,
            samples_used=len(used)
        )
        self.logger.info(
            f"Transientenkonstanten: c={constants.c:.4f}, d={constants.d:.4f}, "
            f"γ={constants.gamma:.4f}"
        )
        return constants

    def check_value_function_bound(
        self,
        system: ControlSystem,
        fsclf: FsCLF,
        samples: Sequence[np.ndarray],
        horizons: Sequence[int],
        gamma: float,
        config: Optional[SolverConfig] = None
    ) -> ValueBoundCheck:
        """Stichprobenmaximum von V_N(ξ) / V(ξ) für die angegebenen Horizonte"""
        if len(samples) == 0:
            raise SampleError("Stichprobe ist leer")
        per_horizon = []
        for N in horizons:
            worst = 0.0
            for xi in samples:
                v0 = fsclf.value(xi)
                if v0 == 0.0:
                    continue
                spec = OcpSpec(system.nominal(), fsclf, xi, Classic(N))
                worst = max(worst, self.ocp.solve_ocp(spec, config).cost / v0)
            per_horizon.append((int(N), float(worst)))
        return ValueBoundCheck(
            gamma=float(gamma),
            max_ratio=max(r for _, r in per_horizon),
            per_horizon=tuple(per_horizon)
        )

    # ========================================================================
    # TRAJEKTORIEN-KENNGRÖSSEN
    # ========================================================================

    @staticmethod
    def max_deviation_post_transient(
        source: TrajectoryLike,
        component: int,
        window_start: int
    ) -> float:
        """max |x_component(t)| für t ≥ window_start (Index 0-basiert)"""
        states = _states_of(source)
        if not 0 <= component < states.shape[1]:
            raise TrajectoryError(f"Komponente {component} außerhalb 0..{states.shape[1] - 1}")
        if not 0 <= window_start < states.shape[0]:
            raise TrajectoryError(
                f"Fensterbeginn {window_start} außerhalb 0..{states.shape[0] - 1}"
            )
        return float(np.max(np.abs(states[window_start:, component])))

    @staticmethod
    def fit_exponential_envelope(
        source: TrajectoryLike,
        omega: MeasurementFunction
    ) -> ExponentialEnvelope:
        """
        Hüllkurve ω(x(t)) ≤ C·σ^t·ω(x(0))

        Gerade durch die obere konvexe Hülle von (t, ln ω(x(t)) − ln ω(x(0)))
        (kleinste Quadrate über die Hüllenecken), danach Achsenabschnitt so weit
        angehoben, dass alle Punkte darunter liegen. Erreicht ω exakt 0, wird
        nur der Abschnitt davor verwendet.

        Raises:
            TrajectoryError: ω(x(0)) = 0
        """
        states = _states_of(source)
        values = np.array([omega(x) for x in states])
        if values[0] == 0.0:
            raise TrajectoryError("ω(x(0)) = 0, keine Hüllkurve definiert")
        zeros = np.flatnonzero(values == 0.0)
        if zeros.size:
            values = values[:zeros[0]]

        t = np.arange(values.size, dtype=float)
        y = np.log(values) - np.log(values[0])
        if values.size == 1:
            return ExponentialEnvelope(C=1.0, sigma=1.0, fitted_steps=0)

        hull = _upper_hull(t, y)
        slope = float(np.polyfit(t[hull], y[hull], 1)[0])
        intercept = float(np.max(y - slope * t))
        return ExponentialEnvelope(C=math.exp(intercept), sigma=math.exp(slope),
                                   fitted_steps=int(values.size - 1))


def _upper_hull(t: np.ndarray, y: np.ndarray) -> list:
    """Indizes der oberen konvexen Hülle (t aufsteigend, Monotone-Chain)"""
    hull = []
    for i in range(t.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (t[b] - t[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (t[i] - t[a])
            if cross >= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull
