"""
Diagramm-Rezept für Trajektorien

Zustände über der Zeit: x_1 schwarze Kreise, x_2 rote Kreuze, x_3 blaue Quadrate
(weitere Komponenten mit Standardfarben). Ausgabe als PNG.
"""

import logging
from pathlib import Path
from typing import Sequence

import matplotlib
matplotlib.use('Agg')  # Headless backend
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from core.exceptions import OutputError  # noqa: E402

logger = logging.getLogger(__name__)

MARKERS = (
    {'color': 'black', 'marker': 'o', 'markerfacecolor': 'none'},
    {'color': 'red', 'marker': 'x'},
    {'color': 'blue', 'marker': 's', 'markerfacecolor': 'none'},
)


class TrajectoryPlotter:
    """Erstellt Zustandsdiagramme"""

    def __init__(self, dpi: int = 150):
        self.dpi = dpi
        plt.rcParams['font.size'] = 11
        plt.rcParams['axes.labelsize'] = 12
        plt.rcParams['legend.fontsize'] = 9

    def plot_states(
        self,
        times: np.ndarray,
        states: np.ndarray,
        labels: Sequence[str],
        title: str,
        filepath: Path
    ) -> None:
        """
        Raises:
            OutputError: PNG nicht schreibbar
        """
        fig, ax = plt.subplots(figsize=(8, 4.5))
        try:
            for i, label in enumerate(labels):
                style = MARKERS[i] if i < len(MARKERS) else {'marker': '.'}
                ax.plot(times, states[:, i], linestyle='-', linewidth=0.8, markersize=4,
                        label=label, **style)
            ax.axhline(0.0, color='grey', linewidth=0.5)
            ax.set_xlabel('t')
            ax.set_ylabel('x(t)')
            ax.set_title(title)
            ax.legend(loc='upper right')
            ax.grid(True, alpha=0.3)
            fig.tight_layout()

            filepath = Path(filepath)
            filepath.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(filepath, dpi=self.dpi, facecolor='white')
            logger.info(f"Diagramm gespeichert: {filepath}")
        except OSError as e:
            raise OutputError(f"Diagramm nicht schreibbar: {filepath} ({e})") from e
        finally:
            plt.close(fig)
