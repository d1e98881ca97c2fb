"""
CSV-Export von Regelkreis-Trajektorien

Spalten: t, x_1..x_n, u_1..u_m, V, solve_status, contraction_residual, solve_iterations
Zahlen in voller Double-Genauigkeit (repr), Punkt als Dezimaltrenner.
Die letzte Zeile (t = T) hat keinen Eingang und keine Solve-Daten.
"""

import csv
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.persistence import atomic_write
from models.closed_loop import ClosedLoopResult

logger = logging.getLogger(__name__)


def _num(value: Optional[float]) -> str:
    if value is None:
        return ''
    return repr(float(value))


class TrajectoryCsvExporter:
    """Schreibt Trajektorien-CSV-Dateien"""

    def __init__(self):
        self.logger = logger

    @staticmethod
    def header(state_dim: int, input_dim: int) -> List[str]:
        return (['t']
                + [f"x_{i + 1}" for i in range(state_dim)]
                + [f"u_{i + 1}" for i in range(input_dim)]
                + ['V', 'solve_status', 'contraction_residual', 'solve_iterations'])

    def rows(self, result: ClosedLoopResult) -> List[List[str]]:
        traj = result.trajectory
        m = traj.inputs.shape[1]
        rows = []
        for t in range(traj.length + 1):
            row = [str(t)] + [_num(v) for v in traj.states[t]]
            diag = result.diagnostic_for_step(t)
            if t < traj.length:
                row += [_num(v) for v in traj.inputs[t]]
            else:
                row += [''] * m
            row.append(_num(result.v_values[t]))
            if diag is not None:
                row += [diag.status, _num(diag.contraction_residual), str(diag.outer_iterations)]
            else:
                row += ['', '', '']
            rows.append(row)
        return rows

    def export(self, filepath: Path, result: ClosedLoopResult) -> None:
        """
        Raises:
            OutputError: Datei nicht schreibbar
        """
        traj = result.trajectory
        with atomic_write(Path(filepath)) as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(self.header(traj.states.shape[1], traj.inputs.shape[1]))
            writer.writerows(self.rows(result))
        self.logger.info(f"Trajektorie exportiert: {filepath}")

    def export_comparison(self, filepath: Path, results: Sequence[Tuple[str, ClosedLoopResult]]) -> None:
        """Zeitlich ausgerichtete Zustände, Eingänge und V aller Varianten"""
        if not results:
            return
        length = min(r.trajectory.length for _, r in results)
        header = ['t']
        for label, r in results:
            n = r.trajectory.states.shape[1]
            m = r.trajectory.inputs.shape[1]
            header += [f"{label}:x_{i + 1}" for i in range(n)]
            header += [f"{label}:u_{i + 1}" for i in range(m)]
            header.append(f"{label}:V")

        with atomic_write(Path(filepath)) as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(header)
            for t in range(length + 1):
                row = [str(t)]
                for _, r in results:
                    traj = r.trajectory
                    row += [_num(v) for v in traj.states[t]]
                    if t < traj.length:
                        row += [_num(v) for v in traj.inputs[t]]
                    else:
                        row += [''] * traj.inputs.shape[1]
                    row.append(_num(r.v_values[t]))
                writer.writerow(row)
        self.logger.info(f"Vergleich exportiert: {filepath}")


def read_trajectory_csv(filepath: Path) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """
    Liest die Zustandsspalten einer Trajektorien-CSV

    Returns:
        (Zeiten, Zustände (T+1, n), Zustandsspaltennamen)
    """
    with open(filepath, encoding='utf-8', newline='') as handle:
        reader = csv.reader(handle)
        header = next(reader)
        state_columns = [i for i, name in enumerate(header) if name.startswith('x_')]
        times, states = [], []
        for row in reader:
            times.append(int(row[0]))
            states.append([float(row[i]) for i in state_columns])
    return np.array(times), np.array(states), [header[i] for i in state_columns]
