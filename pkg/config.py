#!/usr/bin/env python3
"""
🔧 CONFIGURATION CENTRALISÉE - ONEBIT LIMFB
Paramètres des simulations de retour limité (ADC un bit), surchargeables par
variables d'environnement (préfixe LIMFB_, fichier .env chargé par run.py)
"""

import os
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np


class ConfigError(ValueError):
    """Configuration invalide (arguments CLI, variables d'environnement)"""


class ExperimentMode(Enum):
    """Sous-commandes disponibles"""
    SISO = "siso"
    MISO = "miso"
    LOSS = "loss"
    ORACLE_CHECK = "oracle-check"
    BUDGET = "budget"
    HBQ_CURVE = "hbq-curve"


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


@dataclass
class SimulationConfig:
    """⚙️ Valeurs par défaut des expériences Monte Carlo"""

    # 🎲 ALÉA
    SEED: int = field(default_factory=lambda: _env_int("LIMFB_SEED", 20160101))
    TRIALS: int = field(default_factory=lambda: _env_int("LIMFB_TRIALS", 1000))   # 1000 réalisations de canal
    WORKERS: int = field(default_factory=lambda: _env_int("LIMFB_WORKERS", 1))
    CHUNK_TRIALS: int = 500                     # Réalisations par bloc de calcul

    # 📶 GRILLE SNR (dB)
    SNR_START_DB: float = -10.0
    SNR_STEP_DB: float = 1.0
    SNR_STOP_DB: float = 30.0

    # 📡 RETOUR
    SISO_PHASE_BITS: List[int] = field(default_factory=lambda: [1, 2])
    MISO_NT: int = 4
    MISO_TOTAL_BITS: int = 4
    LOSS_SPLITS: List[Tuple[int, int]] = field(
        default_factory=lambda: [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (3, 2)]
    )

    # 🎯 BUDGET DE PERTE DE CAPACITÉ
    EPSILON: float = field(default_factory=lambda: _env_float("LIMFB_EPSILON", 0.1))
    BUDGET_MAX_BITS: int = 24

    # 💾 MÉMOIRE
    MAX_CODEBOOK_BYTES: int = field(
        default_factory=lambda: _env_int("LIMFB_MAX_CODEBOOK_BYTES", 1 << 30)
    )
    MAX_RVQ_BITS: int = 20
    MAX_PHASE_BITS: int = 30

    # 📁 SORTIES
    OUTPUT_DIR: str = field(default_factory=lambda: os.getenv("LIMFB_OUTPUT_DIR", "results"))


@dataclass
class OracleConfig:
    """🔍 Grille et tolérances de la vérification par DMC"""

    A_SQ_MAX: float = 50.0
    A_SQ_POINTS: int = 26
    THETA_POINTS: int = 17
    RANDOM_TUPLES: int = 1000
    MI_TOLERANCE: float = 1e-9                  # Forme close vs information mutuelle
    BA_TOLERANCE: float = 1e-6                  # Capacité Blahut-Arimoto vs forme close
    BA_GAP: float = 1e-12                       # Critère d'arrêt (écart bornes sup/inf)
    BA_MAX_ITER: int = 100_000


@dataclass
class LoggingConfig:
    """Configuration du logging"""

    # 📝 NIVEAUX
    CONSOLE_LEVEL: str = field(default_factory=lambda: os.getenv("LIMFB_LOG_LEVEL", "INFO"))
    FILE_LEVEL: str = "DEBUG"

    # 📄 FORMAT ET CHEMIN
    FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    LOG_DIR: str = field(default_factory=lambda: os.getenv("LIMFB_LOG_DIR", "logs"))
    LOG_FILE: str = "limfb.log"

    @property
    def FILE_PATH(self) -> str:
        return os.path.join(self.LOG_DIR, self.LOG_FILE)


@dataclass
class ExperimentConfig:
    """📋 Configuration d'une exécution (une sous-commande)"""

    MODE: ExperimentMode
    NT: int = 1
    PHASE_BITS: List[int] = field(default_factory=list)            # siso: B
    SPLITS: List[Tuple[int, int]] = field(default_factory=list)    # miso/loss: (B1, B2)
    TOTAL_BITS: Optional[int] = None
    SWEEP_SPLITS: bool = False
    SNR_START_DB: float = -10.0
    SNR_STEP_DB: float = 1.0
    SNR_STOP_DB: float = 30.0
    TRIALS: int = 1000
    SEED: int = 0
    OUTPUT_PATH: Optional[str] = None
    FIXED_CODEBOOK: bool = False
    WORKERS: int = 1
    CHUNK_TRIALS: int = 500
    EPSILON: float = 0.1
    BUDGET_MAX_BITS: int = 24

    @classmethod
    def from_defaults(cls, mode: ExperimentMode, defaults: Optional[SimulationConfig] = None, **overrides):
        """Construit une configuration à partir de SimulationConfig puis des surcharges"""
        d = defaults or SimulationConfig()
        base = dict(
            MODE=mode,
            NT=1 if mode == ExperimentMode.SISO else d.MISO_NT,
            SNR_START_DB=d.SNR_START_DB,
            SNR_STEP_DB=d.SNR_STEP_DB,
            SNR_STOP_DB=d.SNR_STOP_DB,
            TRIALS=d.TRIALS,
            SEED=d.SEED,
            WORKERS=d.WORKERS,
            CHUNK_TRIALS=d.CHUNK_TRIALS,
            EPSILON=d.EPSILON,
            BUDGET_MAX_BITS=d.BUDGET_MAX_BITS,
        )
        base.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**base)
        cfg.resolve_schemes(d)
        return cfg

    def resolve_schemes(self, defaults: Optional[SimulationConfig] = None):
        """Complète la liste des schémas de retour selon le mode"""
        d = defaults or SimulationConfig()
        if self.MODE == ExperimentMode.SISO and not self.PHASE_BITS:
            self.PHASE_BITS = list(d.SISO_PHASE_BITS)
        if self.MODE in (ExperimentMode.MISO, ExperimentMode.LOSS) and not self.SPLITS:
            if self.SWEEP_SPLITS or (self.MODE == ExperimentMode.MISO and self.TOTAL_BITS is None):
                total = self.TOTAL_BITS if self.TOTAL_BITS is not None else d.MISO_TOTAL_BITS
                self.TOTAL_BITS = total
                self.SPLITS = all_splits(total)
            elif self.TOTAL_BITS is not None:
                self.SPLITS = all_splits(self.TOTAL_BITS)
            else:
                self.SPLITS = list(d.LOSS_SPLITS)

    @property
    def snr_db(self) -> np.ndarray:
        return snr_grid(self.SNR_START_DB, self.SNR_STEP_DB, self.SNR_STOP_DB)

    def validate(self):
        errors = validate_config(self)
        if errors:
            raise ConfigError("; ".join(errors))
        return self


# 📋 PARSEURS CLI

def all_splits(total_bits: int) -> List[Tuple[int, int]]:
    """Toutes les répartitions (B1, B2) avec B1 + B2 = B, B1 et B2 >= 1, B1 décroissant"""
    return [(b1, total_bits - b1) for b1 in range(total_bits - 1, 0, -1)]


def parse_split(text: str) -> Tuple[int, int]:
    """'3,1' -> (3, 1)"""
    parts = text.replace(" ", "").split(",")
    if len(parts) != 2:
        raise ConfigError(f"❌ Répartition invalide '{text}' (attendu: b1,b2)")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as e:
        raise ConfigError(f"❌ Répartition invalide '{text}': {e}") from e


def parse_snr_range(text: str) -> Tuple[float, float, float]:
    """'start:step:stop' (dB) -> (start, step, stop)"""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"❌ Grille SNR invalide '{text}' (attendu: start:step:stop)")
    try:
        start, step, stop = (float(p) for p in parts)
    except ValueError as e:
        raise ConfigError(f"❌ Grille SNR invalide '{text}': {e}") from e
    return start, step, stop


def snr_grid(start: float, step: float, stop: float) -> np.ndarray:
    """Grille SNR inclusive (stop inclus à un demi-pas près)"""
    if not step > 0:
        raise ConfigError(f"❌ Pas SNR doit être > 0 (reçu {step})")
    count = int(np.floor((stop - start) / step + 0.5)) + 1
    if count < 1:
        raise ConfigError(f"❌ Grille SNR vide: {start}:{step}:{stop}")
    return start + step * np.arange(count, dtype=np.float64)


# 📋 VALIDATION CONFIG
def validate_config(cfg: ExperimentConfig) -> List[str]:
    """Valide la configuration d'une exécution"""
    errors = []

    if cfg.TRIALS < 1:
        errors.append(f"❌ TRIALS doit être >= 1 (reçu {cfg.TRIALS})")
    if not cfg.SNR_STEP_DB > 0:
        errors.append(f"❌ SNR_STEP_DB doit être > 0 (reçu {cfg.SNR_STEP_DB})")
    elif cfg.SNR_STOP_DB < cfg.SNR_START_DB:
        errors.append("❌ SNR_STOP_DB doit être >= SNR_START_DB")
    if not 0 <= cfg.SEED < 2 ** 64:
        errors.append(f"❌ SEED doit tenir sur 64 bits non signés (reçu {cfg.SEED})")
    if cfg.WORKERS < 1:
        errors.append(f"❌ WORKERS doit être >= 1 (reçu {cfg.WORKERS})")
    if cfg.CHUNK_TRIALS < 1:
        errors.append(f"❌ CHUNK_TRIALS doit être >= 1 (reçu {cfg.CHUNK_TRIALS})")

    if cfg.MODE == ExperimentMode.SISO:
        if cfg.NT != 1:
            errors.append(f"❌ Le mode siso exige NT = 1 (reçu {cfg.NT})")
        for b in cfg.PHASE_BITS:
            if b < 1:
                errors.append(f"❌ Bits de phase doivent être >= 1 (reçu {b})")

    if cfg.MODE in (ExperimentMode.MISO, ExperimentMode.LOSS, ExperimentMode.BUDGET):
        if cfg.NT < 2:
            errors.append(f"❌ Le mode {cfg.MODE.value} exige NT >= 2 (reçu {cfg.NT})")

    if cfg.MODE in (ExperimentMode.MISO, ExperimentMode.LOSS):
        if not cfg.SPLITS:
            errors.append("❌ Aucune répartition (B1, B2) demandée")
        for b1, b2 in cfg.SPLITS:
            if b1 < 1 or b2 < 1:
                errors.append(f"❌ Répartition ({b1},{b2}): B1 et B2 doivent être >= 1")
            if cfg.TOTAL_BITS is not None and b1 + b2 != cfg.TOTAL_BITS:
                errors.append(f"❌ Répartition ({b1},{b2}): B1 + B2 doit valoir B = {cfg.TOTAL_BITS}")

    if cfg.MODE == ExperimentMode.BUDGET:
        if not 0 < cfg.EPSILON < 1:
            errors.append(f"❌ EPSILON doit être dans ]0, 1[ (reçu {cfg.EPSILON})")
        if cfg.BUDGET_MAX_BITS < 2:
            errors.append(f"❌ BUDGET_MAX_BITS doit être >= 2 (reçu {cfg.BUDGET_MAX_BITS})")

    if cfg.MODE == ExperimentMode.HBQ_CURVE and cfg.SNR_START_DB < 0:
        errors.append("❌ hbq-curve: l'abscisse x doit être >= 0")

    return errors


def print_config_summary(cfg: ExperimentConfig):
    """Affiche un résumé de la configuration"""
    print("\n" + "=" * 60)
    print(f"🔧 ONEBIT LIMFB - {cfg.MODE.value}")
    print("=" * 60)
    print(f"📡 Antennes émission: {cfg.NT}")
    if cfg.PHASE_BITS:
        print(f"🎯 Bits de phase: {', '.join(str(b) for b in cfg.PHASE_BITS)}")
    if cfg.SPLITS:
        print(f"🎯 Répartitions (B1,B2): {' '.join(f'({b1},{b2})' for b1, b2 in cfg.SPLITS)}")
    print(f"📶 SNR: {cfg.SNR_START_DB:g} → {cfg.SNR_STOP_DB:g} dB (pas {cfg.SNR_STEP_DB:g})")
    print(f"🎲 Réalisations: {cfg.TRIALS} | Graine: {cfg.SEED} | Workers: {cfg.WORKERS}")
    print(f"📚 Codebook fixe: {'✅' if cfg.FIXED_CODEBOOK else '❌'}")
    print(f"💾 Sortie: {cfg.OUTPUT_PATH or '-'}")
    print("=" * 60)
