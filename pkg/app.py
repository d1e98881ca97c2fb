"""
fsCLF-MPC
Haupteinstiegspunkt der Kommandozeile

Modellprädiktive Regelung mit endlich-schrittigen Kontroll-Lyapunov-Funktionen:
- run      einen Regelkreis ausführen (Trajektorien-CSV + Zusammenfassung)
- compare  mehrere Algorithmen vergleichen (CSV, JSON, Excel)
- verify   fsCLF zertifizieren, Horizontschranke bestimmen
- bound    Horizontschranke aus (c, d, M) oder aus einem Fit
- plot     Zustandsdiagramm aus einer Trajektorien-CSV

Exit-Codes: 0 Erfolg, 2 Eingabe, 3 unzulässig, 4 Solver, 5 Datei-I/O
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from core.exceptions import FsclfMpcError, OutputError
from core.orchestrator import ExperimentOrchestrator
from utils.logging_config import setup_logging

VERSION = "1.0"

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='fsclf-mpc',
        description='MPC mit endlich-schrittigen Kontroll-Lyapunov-Funktionen'
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest='command', required=True)

    def scenario_arguments(p: argparse.ArgumentParser) -> None:
        p.add_argument('--config', required=True, type=Path, help='Szenario-Datei (JSON)')
        p.add_argument('--out', help='Ausgabeverzeichnis (überschreibt output.directory)')
        p.add_argument('--seed', type=int, help='Seed für Stichproben')
        p.add_argument('--tol', type=float, help='Zulässigkeitstoleranz des Solvers')

    scenario_arguments(sub.add_parser('run', help='Regelkreis ausführen'))
    compare = sub.add_parser('compare', help='Varianten vergleichen')
    scenario_arguments(compare)
    compare.add_argument('--jobs', type=int, default=1, help='parallele Varianten')
    scenario_arguments(sub.add_parser('verify', help='fsCLF zertifizieren'))

    bound = sub.add_parser('bound', help='Horizontschranke N_min')
    bound.add_argument('--M', type=int, help='Schrittzahl M')
    bound.add_argument('--c', type=float, help='Abklingkonstante c in [0, 1)')
    bound.add_argument('--d', type=float, help='Transientenkonstante d > 0')
    bound.add_argument('--from-fit', type=Path, dest='from_fit', help='Konstanten aus Szenario fitten')
    bound.add_argument('--seed', type=int)
    bound.add_argument('--tol', type=float)

    plot = sub.add_parser('plot', help='Zustandsdiagramm aus Trajektorien-CSV')
    plot.add_argument('--csv', required=True, type=Path)
    plot.add_argument('--out', default='.', help='Zielverzeichnis für das PNG')
    return parser


def _dispatch(args: argparse.Namespace, orchestrator: ExperimentOrchestrator) -> int:
    if args.command == 'bound':
        if args.from_fit is not None:
            config = orchestrator.load_scenario(args.from_fit, seed=args.seed, tol=args.tol)
            result = orchestrator.bound_from_fit(config)
        else:
            if args.M is None or args.c is None or args.d is None:
                logger.error("bound benötigt --M, --c und --d oder --from-fit")
                return 2
            result = orchestrator.bound_from_constants(args.c, args.d, args.M)
        print(json.dumps(result))
        return 0

    if args.command == 'plot':
        png = orchestrator.plot_csv(args.csv, Path(args.out))
        print(png)
        return 0

    config = orchestrator.load_scenario(args.config, args.out, args.seed, args.tol)
    try:
        setup_logging(Path(config.output.directory))
    except OSError as e:
        raise OutputError(f"Ausgabeverzeichnis nicht anlegbar: {config.output.directory} ({e})") from e

    if args.command == 'run':
        outcome = orchestrator.run_scenario(config)
    elif args.command == 'compare':
        if args.jobs < 1:
            logger.error("--jobs muss >= 1 sein")
            return 2
        outcome = orchestrator.compare_scenario(config, jobs=args.jobs)
    else:
        outcome = orchestrator.verify_scenario(config)

    for path in outcome.files:
        print(path)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """
    Einstiegspunkt

    Returns:
        Exit-Code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging()
    orchestrator = ExperimentOrchestrator()
    try:
        return _dispatch(args, orchestrator)
    except FsclfMpcError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"Unerwarteter Fehler: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
