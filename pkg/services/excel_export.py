"""
Excel-Export für MPC-Variantenvergleiche
"""

import logging
import os
import tempfile
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Sequence, Tuple

from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side

from core.exceptions import OutputError
from models.closed_loop import ClosedLoopResult

logger = logging.getLogger(__name__)


class ComparisonExcelExporter:
    """Arbeitsmappe mit Abweichungstabelle und einem Blatt pro Variante"""

    def export(
        self,
        filepath: Path,
        scenario_name: str,
        results: Sequence[Tuple[str, ClosedLoopResult]],
        summary: Dict[str, Any]
    ) -> None:
        """
        Raises:
            OutputError: Datei nicht schreibbar
        """
        logger.info(f"Starte Excel-Export: {filepath}")

        wb = Workbook()
        wb.remove(wb.active)

        # Styles
        header_font = Font(bold=True, color="FFFFFF", size=11)
        header_fill = PatternFill(start_color="1F6AA5", end_color="1F6AA5", fill_type="solid")
        thin_border = Border(
            left=Side(style='thin'),
            right=Side(style='thin'),
            top=Side(style='thin'),
            bottom=Side(style='thin')
        )

        # Übersicht
        ws_summary = wb.create_sheet("Vergleich")
        ws_summary.append(['Szenario:', scenario_name])
        ws_summary.append(['Fensterbeginn:', summary.get('window_start')])
        ws_summary.append(['Erstellt am:', datetime.now().strftime('%d.%m.%Y %H:%M')])
        ws_summary.append([])

        deviations = summary.get('deviations', {})
        labels = [label for label, _ in results]
        components = sorted({c for d in deviations.values() for c in d})
        ws_summary.append(['Variante', 'V(x(T))', 'Solves', 'Rechenzeit [s]']
                          + [f"max |{c}|" for c in components])
        header_row = ws_summary.max_row
        for label, result in results:
            ws_summary.append(
                [label, float(result.v_values[-1]), len(result.diagnostics), result.wall_time_total]
                + [deviations.get(label, {}).get(c) for c in components]
            )

        for cell in ws_summary[header_row]:
            cell.font = header_font
            cell.fill = header_fill
            cell.alignment = Alignment(horizontal='center')
            cell.border = thin_border
        for row in ws_summary.iter_rows(min_row=header_row + 1, max_row=header_row + len(labels)):
            for cell in row:
                cell.border = thin_border
                if cell.column >= 2:
                    cell.number_format = '0.000000'
                    cell.alignment = Alignment(horizontal='right')
        ws_summary.column_dimensions['A'].width = 25
        for letter in 'BCDEFGH':
            ws_summary.column_dimensions[letter].width = 16

        # Varianten-Sheets
        for label, result in results:
            ws = wb.create_sheet(label[:31])
            traj = result.trajectory
            n = traj.states.shape[1]
            m = traj.inputs.shape[1]
            ws.append(['t'] + [f"x_{i + 1}" for i in range(n)]
                      + [f"u_{i + 1}" for i in range(m)] + ['V'])
            for t in range(traj.length + 1):
                inputs = list(traj.inputs[t]) if t < traj.length else [None] * m
                ws.append([t] + [float(v) for v in traj.states[t]]
                          + [None if v is None else float(v) for v in inputs]
                          + [float(result.v_values[t])])

            for cell in ws[1]:
                cell.font = header_font
                cell.fill = header_fill
                cell.alignment = Alignment(horizontal='center')
                cell.border = thin_border
            ws.column_dimensions['A'].width = 6

        self._save(wb, Path(filepath))
        logger.info(f"Excel-Export erfolgreich: {filepath}")

    @staticmethod
    def _save(wb: Workbook, path: Path) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix='.tmp', dir=path.parent)
            os.close(fd)
            wb.save(tmp_name)
            os.replace(tmp_name, path)
        except OSError as e:
            logger.error(f"Fehler beim Excel-Export: {e}", exc_info=True)
            raise OutputError(f"Excel-Datei nicht schreibbar: {path} ({e})") from e
