"""
Experiment-Orchestrator - Zentrale Steuerungseinheit
Koordiniert Szenario-Laden, Regelkreise, Analysen und Ergebnisdateien
"""

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.exceptions import (
    CertificationFailedError, ConfigValidationError, OutputError, TrajectoryError
)
from core.persistence import ScenarioStore
from models.closed_loop import Algorithm, ClosedLoopConfig, ClosedLoopResult
from models.constraint_set import ConstraintSet
from models.lyapunov import FsCLF, MeasurementFunction
from models.comparison import ComparisonFunction
from models.reports import HorizonBoundInputs, TransientConstants
from models.scenario import FsclfConfig, ScenarioConfig, SystemConfig, VariantConfig
from models.system import ControlSystem
from services.analysis_service import AnalysisService
from services.csv_export import TrajectoryCsvExporter, read_trajectory_csv
from services.dynamics_service import DynamicsService
from services.excel_export import ComparisonExcelExporter
from services.mpc_service import MpcService
from services.ocp_service import OcpService
from services.plotting import TrajectoryPlotter
from services.solver.auglag import AugmentedLagrangianSolver
from utils.example_system import create_example_system

logger = logging.getLogger(__name__)


# ============================================================================
# AUFBAU DER DOMÄNENOBJEKTE
# ============================================================================

def build_systems(config: SystemConfig) -> Tuple[ControlSystem, ControlSystem]:
    """
    Returns:
        (wahres System, nominales System)
    """
    if config.builtin:
        true_system = create_example_system(perturbed=config.builtin == 'paper-perturbed')
        return true_system, true_system.nominal()

    linear = config.linear
    state_set = input_set = None
    if linear.state_bounds is not None:
        state_set = ConstraintSet.box(*linear.state_bounds.arrays())
    if linear.input_bounds is not None:
        input_set = ConstraintSet.box(*linear.input_bounds.arrays())
    true_system = ControlSystem.linear(
        linear.A, linear.B,
        state_set=state_set,
        input_set=input_set,
        disturbance=linear.disturbance,
        name='linear'
    )
    return true_system, true_system.nominal()


def build_fsclf(config: FsclfConfig, state_dim: int) -> FsCLF:
    if config.kind == 'quadratic':
        return FsCLF.quadratic(np.array(config.P), config.decay_c, config.M)
    return FsCLF.omega_passthrough(
        MeasurementFunction.euclidean_norm(state_dim),
        ComparisonFunction.linear(config.decay_c),
        config.M
    )


def _state_labels(n: int) -> List[str]:
    return [f"x_{i + 1}" for i in range(n)]


@dataclass
class RunOutcome:
    """Ergebnis eines run/compare/verify-Aufrufs mit geschriebenen Dateien"""

    summary: Dict[str, Any]
    files: List[Path] = field(default_factory=list)
    results: List[Tuple[str, ClosedLoopResult]] = field(default_factory=list)


class ExperimentOrchestrator:
    """
    Zentrale Steuerungseinheit der Kommandozeile

    Stellt Methoden bereit:
    - load_scenario
    - run_scenario, compare_scenario, verify_scenario
    - bound_from_constants, bound_from_fit
    - plot_csv
    """

    def __init__(self):
        # Services initialisieren
        self.store = ScenarioStore()
        self.dynamics = DynamicsService()
        self.ocp = OcpService(self.dynamics, AugmentedLagrangianSolver())
        self.mpc = MpcService(self.ocp)
        self.analysis = AnalysisService(self.ocp)
        self.csv_exporter = TrajectoryCsvExporter()
        self.excel_exporter = ComparisonExcelExporter()
        self.plotter = TrajectoryPlotter()
        self.logger = logger

    def load_scenario(
        self,
        path: Path,
        out_dir: Optional[str] = None,
        seed: Optional[int] = None,
        tol: Optional[float] = None
    ) -> ScenarioConfig:
        return self.store.load(Path(path)).with_overrides(out_dir, seed, tol)

    @staticmethod
    def output_path(config: ScenarioConfig, suffix: str) -> Path:
        return Path(config.output.directory) / f"{config.output.prefix}_{suffix}"

    # ========================================================================
    # RUN
    # ========================================================================

    def simulate(self, config: ScenarioConfig, variant: Optional[VariantConfig] = None) -> ClosedLoopResult:
        """Einen Regelkreis des Szenarios ausführen"""
        true_system, nominal = build_systems(config.system)
        fsclf = build_fsclf(config.fsclf, nominal.state_dim)
        return self.mpc.run(
            config.closed_loop_config(variant), true_system, nominal, fsclf,
            np.array(config.initial_state)
        )

    def run_scenario(self, config: ScenarioConfig) -> RunOutcome:
        """
        Hauptvariante ausführen, Trajektorien-CSV und Zusammenfassung schreiben
        """
        self.logger.info("=" * 60)
        self.logger.info(f"Szenario '{config.name}': {config.algorithm} (Horizont {config.horizon})")
        result = self.simulate(config)

        summary = self.summarize(config, result)
        csv_path = self.output_path(config, 'trajectory.csv')
        json_path = self.output_path(config, 'summary.json')
        self.csv_exporter.export(csv_path, result)
        self.store.write_json(summary, json_path)
        self.logger.info(f"Ergebnisse geschrieben: {csv_path}, {json_path}")
        return RunOutcome(summary, [csv_path, json_path], [(result.config.label, result)])

    def summarize(self, config: ScenarioConfig, result: ClosedLoopResult) -> Dict[str, Any]:
        """Kennzahlen eines Laufs für die Zusammenfassung"""
        fsclf = build_fsclf(config.fsclf, result.trajectory.states.shape[1])
        wall_times = [d.wall_time for d in result.diagnostics]
        summary: Dict[str, Any] = {
            'scenario': config.name,
            'algorithm': result.config.algorithm.value,
            'horizon': result.config.horizon,
            'total_steps': result.total_steps,
            'final_V': float(result.v_values[-1]),
            'cycle_anchors': list(result.cycle_anchors),
            'solves': len(result.diagnostics),
            'retries': sum(1 for d in result.diagnostics if d.retried),
            'tail_fallbacks': sum(1 for d in result.diagnostics if d.fallback),
            'statuses': dict(Counter(d.status for d in result.diagnostics)),
            'max_constraint_residual': max((d.max_residual for d in result.diagnostics), default=0.0),
            'wall_time': {
                'total': float(sum(wall_times)),
                'mean': float(np.mean(wall_times)) if wall_times else 0.0,
                'max': float(max(wall_times, default=0.0))
            },
            'post_transient': self._deviations(config, result)
        }
        try:
            summary['converse_decay'] = self.analysis.converse_decay_check(
                result, fsclf.omega, fsclf.M
            ).to_dict()
        except TrajectoryError as e:
            self.logger.warning(f"Umkehrprüfung übersprungen: {e}")
            summary['converse_decay'] = None
        try:
            summary['envelope'] = self.analysis.fit_exponential_envelope(result, fsclf.omega).to_dict()
        except TrajectoryError as e:
            self.logger.warning(f"Hüllkurve übersprungen: {e}")
            summary['envelope'] = None
        return summary

    def _deviations(self, config: ScenarioConfig, result: ClosedLoopResult) -> Optional[Dict[str, Any]]:
        window = config.analysis.window_start
        if window > result.total_steps:
            self.logger.warning(f"Fensterbeginn {window} > T={result.total_steps}, keine Abweichungen")
            return None
        n = result.trajectory.states.shape[1]
        return {
            'window_start': window,
            'max_deviation': {
                label: self.analysis.max_deviation_post_transient(result, i, window)
                for i, label in enumerate(_state_labels(n))
            }
        }

    # ========================================================================
    # COMPARE
    # ========================================================================

    def compare_scenario(self, config: ScenarioConfig, jobs: int = 1) -> RunOutcome:
        """
        Alle Varianten ausführen (optional parallel) und in Konfigurationsreihenfolge vergleichen
        """
        variants = config.run_variants()
        if len(variants) < 2:
            raise ConfigValidationError('variants', "compare benötigt mindestens zwei Varianten")
        self.logger.info("=" * 60)
        self.logger.info(f"Vergleich '{config.name}': {len(variants)} Varianten, {jobs} Worker")

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as executor:
                runs = list(executor.map(lambda v: self.simulate(config, v), variants))
        else:
            runs = [self.simulate(config, v) for v in variants]
        results = [(r.config.label, r) for r in runs]

        summary = self.comparison_summary(config, results)
        csv_path = self.output_path(config, 'comparison.csv')
        json_path = self.output_path(config, 'comparison.json')
        xlsx_path = self.output_path(config, 'comparison.xlsx')
        self.csv_exporter.export_comparison(csv_path, results)
        self.store.write_json(summary, json_path)
        self.excel_exporter.export(xlsx_path, config.name, results, summary)
        return RunOutcome(summary, [csv_path, json_path, xlsx_path], results)

    def comparison_summary(
        self,
        config: ScenarioConfig,
        results: List[Tuple[str, ClosedLoopResult]]
    ) -> Dict[str, Any]:
        """Abweichungstabelle, prozentuale Reduktion gegenüber der ersten Variante, Abstände"""
        window = config.analysis.window_start
        deviations = {}
        for label, result in results:
            block = self._deviations(config, result)
            deviations[label] = block['max_deviation'] if block else {}

        base_label = results[0][0]
        base = deviations[base_label]
        reductions = {}
        for label, _ in results[1:]:
            reductions[label] = {
                comp: (100.0 * (base[comp] - value) / base[comp]) if base.get(comp) else None
                for comp, value in deviations[label].items()
            }

        distances = {}
        for i, (label_a, res_a) in enumerate(results):
            for label_b, res_b in results[i + 1:]:
                if res_a.trajectory.states.shape == res_b.trajectory.states.shape:
                    distances[f"{label_a}|{label_b}"] = res_a.trajectory.max_distance(res_b.trajectory)

        return {
            'scenario': config.name,
            'variants': [label for label, _ in results],
            'window_start': window,
            'deviations': deviations,
            'reduction_percent_vs': base_label,
            'reduction_percent': reductions,
            'pairwise_sup_distance': distances,
            'final_V': {label: float(r.v_values[-1]) for label, r in results},
            'solves': {label: len(r.diagnostics) for label, r in results},
            'wall_time': {label: r.wall_time_total for label, r in results}
        }

    # ========================================================================
    # VERIFY / BOUND
    # ========================================================================

    def verify_scenario(self, config: ScenarioConfig) -> RunOutcome:
        """
        fsCLF zertifizieren, Transientenkonstanten → Horizontschranke,
        Umkehrprüfung entlang eines Algorithmus-1-Laufs

        Raises:
            CertificationFailedError: nach dem Schreiben des Berichts, falls nicht zertifiziert
        """
        true_system, nominal = build_systems(config.system)
        fsclf = build_fsclf(config.fsclf, nominal.state_dim)
        solver_config = config.solver_config()
        samples = self.analysis.level_set_samples(
            fsclf, config.analysis.certification_samples, config.seed
        )
        report = self.analysis.certify_fsclf(nominal, fsclf, samples=samples, config=solver_config)
        data: Dict[str, Any] = {'scenario': config.name, 'certification': report.to_dict()}

        if report.certified:
            constants = self.analysis.fit_transient_constants(nominal, fsclf, report=report)
            data['transient_constants'] = constants.to_dict()
            data['N_min'] = self.analysis.horizon_bound(constants.gamma)
            loop_config = ClosedLoopConfig(
                Algorithm.MULTI_STEP, fsclf.M, config.total_steps, solver_config
            )
            closed = self.mpc.run(loop_config, nominal, nominal, fsclf, np.array(config.initial_state))
            data['converse_decay'] = self.analysis.converse_decay_check(
                closed, fsclf.omega, fsclf.M
            ).to_dict()

        json_path = self.output_path(config, 'certification.json')
        self.store.write_json(data, json_path)
        outcome = RunOutcome(data, [json_path])
        if not report.certified:
            raise CertificationFailedError(
                f"fsCLF nicht zertifiziert: {report.feasible_count}/{report.samples_tested} "
                f"Stichproben zulässig (Bericht: {json_path})"
            )
        return outcome

    def bound_from_constants(self, c: float, d: float, M: int) -> Dict[str, Any]:
        try:
            inputs = HorizonBoundInputs(c=c, d=d, M=M)
        except ValueError as e:
            raise ConfigValidationError('bound', str(e)) from e
        return {'c': c, 'd': d, 'M': M, 'gamma': inputs.gamma,
                'N_min': self.analysis.horizon_bound_from(inputs)}

    def bound_from_fit(self, config: ScenarioConfig) -> Dict[str, Any]:
        _, nominal = build_systems(config.system)
        fsclf = build_fsclf(config.fsclf, nominal.state_dim)
        samples = self.analysis.level_set_samples(
            fsclf, config.analysis.certification_samples, config.seed
        )
        constants: TransientConstants = self.analysis.fit_transient_constants(
            nominal, fsclf, samples=samples, config=config.solver_config()
        )
        return {**constants.to_dict(), 'N_min': self.analysis.horizon_bound(constants.gamma)}

    # ========================================================================
    # PLOT
    # ========================================================================

    def plot_csv(self, csv_path: Path, out_dir: Path) -> Path:
        """PNG der Zustandsverläufe einer Trajektorien-CSV"""
        csv_path = Path(csv_path)
        try:
            times, states, labels = read_trajectory_csv(csv_path)
        except (OSError, ValueError, StopIteration) as e:
            raise OutputError(f"CSV nicht lesbar: {csv_path} ({e})") from e
        png_path = Path(out_dir) / f"{csv_path.stem}.png"
        self.plotter.plot_states(times, states, labels, csv_path.stem, png_path)
        return png_path
