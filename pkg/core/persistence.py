"""
Persistence-Service - lädt Szenarien, schreibt Ergebnisdateien atomar
"""

import json
import logging
import os
import re
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, TextIO

from core.exceptions import ConfigValidationError, OutputError
from models.scenario import ScenarioConfig

logger = logging.getLogger(__name__)


@contextmanager
def atomic_write(path: Path, mode: str = 'w') -> Iterator[TextIO]:
    """
    Schreibt in eine temporäre Datei im Zielverzeichnis und ersetzt das Ziel
    erst nach erfolgreichem Schließen (os.replace)

    Raises:
        OutputError: Verzeichnis nicht anlegbar oder Schreiben fehlgeschlagen
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix='.tmp', dir=path.parent)
    except OSError as e:
        raise OutputError(f"Ausgabeverzeichnis nicht beschreibbar: {path.parent} ({e})") from e

    try:
        if 'b' in mode:
            handle = os.fdopen(fd, mode)
        else:
            handle = os.fdopen(fd, mode, encoding='utf-8', newline='')
        with handle:
            yield handle
        os.replace(tmp_name, path)
    except OSError as e:
        _silent_remove(tmp_name)
        raise OutputError(f"Fehler beim Schreiben von {path}: {e}") from e
    except BaseException:
        _silent_remove(tmp_name)
        raise


def _silent_remove(name: str) -> None:
    try:
        os.remove(name)
    except OSError:
        pass


class ScenarioStore:
    """
    Laden und Speichern von Szenario-Konfigurationen und JSON-Ergebnissen
    """

    def __init__(self):
        self.logger = logger

    def load(self, path: Path) -> ScenarioConfig:
        """
        Lädt und prüft ein Szenario

        Raises:
            OutputError: Datei nicht lesbar
            ConfigValidationError: JSON fehlerhaft oder Feld ungültig (mit Zeilenangabe)
        """
        path = Path(path)
        try:
            text = path.read_text(encoding='utf-8')
        except OSError as e:
            raise OutputError(f"Konfiguration nicht lesbar: {path} ({e})") from e

        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigValidationError(
                '<json>', f"{e.msg} (Spalte {e.colno})", line=e.lineno
            ) from e

        try:
            config = ScenarioConfig.from_dict(data)
        except ConfigValidationError as e:
            raise e.with_line(self._locate_field(text, e.field)) from e

        self.logger.info(f"Szenario geladen: {config.name} ({path})")
        return config

    def save(self, config: ScenarioConfig, path: Path) -> None:
        """Speichert ein Szenario (eingerückt, UTF-8)"""
        self.write_json(config.to_dict(), path)
        self.logger.info(f"Szenario gespeichert: {path}")

    def write_json(self, data: Dict[str, Any], path: Path) -> None:
        with atomic_write(path) as handle:
            json.dump(data, handle, indent=2, ensure_ascii=False, allow_nan=True)
            handle.write('\n')

    @staticmethod
    def _locate_field(text: str, field: str) -> Optional[int]:
        """
        Zeile des letzten Schlüssels im Feldpfad (erstes Vorkommen), sonst None
        """
        keys = [k for k in re.split(r'[.\[\]]', field) if k and not k.isdigit()]
        if not keys:
            return None
        pattern = f'"{keys[-1]}"'
        for number, line in enumerate(text.splitlines(), start=1):
            if pattern in line:
                return number
        return None
