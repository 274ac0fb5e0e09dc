#!/usr/bin/env python3
"""
🚀 Script de lancement des expériences ONEBIT LIMFB
Point d'entrée principal : charge la configuration, valide, lance le harness

Exemples:
    python run.py siso --bits 1 --bits 2 --trials 1000 --out results/siso.csv
    python run.py miso --nt 4 --bits 4 --sweep-splits
    python run.py loss --nt 4 --split 1,1 --split 3,1
    python run.py oracle-check
    python run.py budget --nt 4 --epsilon 0.1
    python run.py hbq-curve --snr 0:0.5:30

Codes de sortie: 0 succès, 1 échec de l'oracle ou erreur d'exécution,
2 configuration invalide, 130 interruption
"""

import argparse
import asyncio
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

# Ajout du répertoire racine au path
sys.path.append(str(Path(__file__).parent))

# Charger les variables d'environnement depuis .env
from dotenv import load_dotenv
load_dotenv()

from config import (
    ConfigError,
    ExperimentConfig,
    ExperimentMode,
    LoggingConfig,
    SimulationConfig,
    parse_snr_range,
    parse_split,
    print_config_summary,
    validate_config,
)
from harness import ExperimentRunner

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INTERRUPTED = 130

# Grille par défaut de hbq-curve (abscisse x linéaire)
HBQ_DEFAULT_GRID = (0.0, 0.5, 30.0)


def setup_logging(log_config: Optional[LoggingConfig] = None, level: Optional[str] = None):
    """Configuration du logging : console + fichier UTF-8 si le dossier est accessible"""
    cfg = log_config or LoggingConfig()
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    handlers[0].setLevel(getattr(logging, (level or cfg.CONSOLE_LEVEL).upper(), logging.INFO))

    try:
        os.makedirs(cfg.LOG_DIR, exist_ok=True)
        file_handler = logging.FileHandler(cfg.FILE_PATH, encoding="utf-8")
        file_handler.setLevel(getattr(logging, cfg.FILE_LEVEL.upper(), logging.DEBUG))
        handlers.append(file_handler)
    except (OSError, PermissionError):
        pass

    logging.basicConfig(level=logging.DEBUG, format=cfg.FORMAT, handlers=handlers, force=True)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--nt", type=int, help="Nombre d'antennes d'émission")
    common.add_argument("--bits", type=int, action="append",
                        help="siso: bits de phase (répétable) ; miso/loss: budget total B")
    common.add_argument("--split", type=parse_split, action="append", metavar="B1,B2",
                        help="Répartition (B1, B2), répétable")
    common.add_argument("--sweep-splits", action="store_true", help="Toutes les répartitions de B")
    common.add_argument("--snr", type=parse_snr_range, metavar="START:STEP:STOP", help="Grille SNR (dB)")
    common.add_argument("--trials", type=int, help="Nombre de réalisations de canal")
    common.add_argument("--seed", type=int, help="Graine maître")
    common.add_argument("--out", help="Fichier CSV de sortie")
    common.add_argument("--fixed-codebook", action="store_true",
                        help="Un codebook RVQ unique pour toutes les réalisations")
    common.add_argument("--workers", type=int, help="Processus de calcul")
    common.add_argument("--epsilon", type=float, help="Cible ε de la perte de capacité (<= 2ε)")
    common.add_argument("--max-bits", type=int, help="Budget maximal exploré par budget")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(description="📡 Retour limité pour canaux à ADC un bit")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in ExperimentMode:
        sub.add_parser(mode.value, parents=[common])
    return parser


def config_from_args(args: argparse.Namespace, defaults: Optional[SimulationConfig] = None) -> ExperimentConfig:
    """Traduit les arguments CLI en ExperimentConfig (non validée)"""
    d = defaults or SimulationConfig()
    mode = ExperimentMode(args.command)
    overrides = dict(
        NT=args.nt,
        TRIALS=args.trials,
        SEED=args.seed,
        WORKERS=args.workers,
        EPSILON=args.epsilon,
        BUDGET_MAX_BITS=args.max_bits,
        FIXED_CODEBOOK=args.fixed_codebook or None,
        SWEEP_SPLITS=args.sweep_splits or None,
        SPLITS=list(args.split) if args.split else None,
    )

    if mode == ExperimentMode.SISO:
        overrides["PHASE_BITS"] = list(args.bits) if args.bits else None
    elif args.bits:
        if len(args.bits) > 1:
            raise ConfigError(f"❌ --bits ne peut être donné qu'une fois en mode {mode.value}")
        overrides["TOTAL_BITS"] = args.bits[0]

    grid = args.snr or (HBQ_DEFAULT_GRID if mode == ExperimentMode.HBQ_CURVE else None)
    if grid:
        overrides.update(SNR_START_DB=grid[0], SNR_STEP_DB=grid[1], SNR_STOP_DB=grid[2])

    out = args.out
    if out is None and mode != ExperimentMode.ORACLE_CHECK:
        out = os.path.join(d.OUTPUT_DIR, f"{mode.value}.csv")
    overrides["OUTPUT_PATH"] = out

    return ExperimentConfig.from_defaults(mode, d, **overrides)


def main(argv: Optional[List[str]] = None) -> int:
    """Point d'entrée principal"""
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)
    logger = logging.getLogger("run")

    print("🔍 Vérification de la configuration...")
    try:
        config = config_from_args(args)
        errors = validate_config(config)
        if errors:
            print("❌ ERREURS DE CONFIGURATION:")
            for error in errors:
                print(f"  {error}")
            return EXIT_CONFIG
        print("✅ Configuration validée")
        print_config_summary(config)
    except (ConfigError, ValueError) as e:
        print(f"❌ Erreur de configuration: {e}")
        return EXIT_CONFIG

    runner = ExperimentRunner(config)
    try:
        outcome = asyncio.run(runner.run())
    except KeyboardInterrupt:
        print("\n🛑 Arrêt demandé par l'utilisateur")
        return EXIT_INTERRUPTED
    except Exception as e:
        logger.exception(f"❌ Erreur critique: {e}")
        return EXIT_FAILURE

    if not outcome.passed:
        print(f"❌ Vérification échouée: {len(outcome.report.failures)} écart(s)")
        return EXIT_FAILURE
    print("✅ Terminé")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
