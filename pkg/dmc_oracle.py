#!/usr/bin/env python3
"""
🔍 DMC ORACLE - Vérification indépendante des capacités en forme close
Canal discret 4 entrées (QPSK tournée) / 4 sorties (signes réel et imaginaire),
information mutuelle et capacité par Blahut-Arimoto
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from config import OracleConfig
from siso_limfb import fb_capacity

logger = logging.getLogger(__name__)

# Colonnes : 1+j, 1-j, -1+j, -1-j
OUTPUT_LABELS = (1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j)
_OUTPUT_SIGNS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=np.float64)
_ROW_TOLERANCE = 1e-12


class ConvergenceError(RuntimeError):
    """Blahut-Arimoto n'a pas convergé dans la limite d'itérations"""


@dataclass(frozen=True)
class DmcModel:
    """Matrice de transition 4x4, lignes = symboles k, colonnes = sorties"""
    transition: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=np.float64)
        if t.shape != (4, 4):
            raise ValueError(f"❌ DmcModel: matrice 4x4 attendue (reçu {t.shape})")
        if np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1.0) > _ROW_TOLERANCE):
            raise ValueError("❌ DmcModel: lignes non stochastiques")
        object.__setattr__(self, "transition", t)


@dataclass(frozen=True)
class InputDistribution:
    """Loi d'entrée sur les 4 symboles QPSK"""
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.shape != (4,) or np.any(p < 0) or abs(p.sum() - 1.0) > _ROW_TOLERANCE:
            raise ValueError(f"❌ InputDistribution: 4 probabilités de somme 1 attendues ({p})")
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def uniform(cls) -> "InputDistribution":
        return cls(np.full(4, 0.25))

    def total_variation(self, other: "InputDistribution") -> float:
        return 0.5 * float(np.abs(self.probabilities - other.probabilities).sum())


@dataclass(frozen=True)
class BlahutArimotoResult:
    capacity: float
    optimum: InputDistribution
    iterations: int
    gap: float


def build_dmc(a_sq: float, theta: float) -> DmcModel:
    """Symbole k à l'angle kπ/2 + π/4 + θ, amplitude √a_sq, bruit N(0, ½) par dimension"""
    if not a_sq >= 0:
        raise ValueError(f"❌ build_dmc: a_sq doit être >= 0 (reçu {a_sq})")
    if abs(theta) > math.pi / 4 + 1e-12:
        raise ValueError(f"❌ build_dmc: |θ| > π/4 ({theta})")

    amplitude = math.sqrt(a_sq)
    angles = np.arange(4) * (math.pi / 2) + math.pi / 4 + theta
    # P(signe = +1) par dimension : Φ(√2·A·composante)
    margins = math.sqrt(2.0) * amplitude * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    p_plus = special.ndtr(margins)                          # (4, 2)
    p_minus = special.ndtr(-margins)

    transition = np.empty((4, 4))
    for col, (sr, si) in enumerate(_OUTPUT_SIGNS):
        p_re = p_plus[:, 0] if sr > 0 else p_minus[:, 0]
        p_im = p_plus[:, 1] if si > 0 else p_minus[:, 1]
        transition[:, col] = p_re * p_im
    return DmcModel(transition)


def _divergences(transition: np.ndarray, p: np.ndarray) -> np.ndarray:
    """D_k = Σ_r T_kr log2(T_kr / q_r), 0·log0 = 0"""
    q = p @ transition
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(transition > 0, transition / q, 1.0)
    return (special.xlogy(transition, ratio)).sum(axis=1) / math.log(2.0)


def mutual_information(dmc: DmcModel, input_dist: Optional[InputDistribution] = None) -> float:
    """I(X;R) en bits (loi uniforme par défaut)"""
    p = (input_dist or InputDistribution.uniform()).probabilities
    return float(p @ _divergences(dmc.transition, p))


def blahut_arimoto(dmc: DmcModel, tol: float = 1e-12, max_iter: Optional[int] = None) -> BlahutArimotoResult:
    """Capacité du DMC ; arrêt quand max_k D_k - Σ p_k D_k < tol"""
    if not tol > 0:
        raise ValueError(f"❌ blahut_arimoto: tol doit être > 0 (reçu {tol})")
    limit = OracleConfig().BA_MAX_ITER if max_iter is None else max_iter

    t = dmc.transition
    p = np.full(4, 0.25)
    for iteration in range(limit + 1):
        d = _divergences(t, p)
        lower = float(p @ d)
        upper = float(d.max())
        gap = upper - lower
        if gap < tol:
            logger.debug(f"🔍 Blahut-Arimoto: {iteration} itérations, C = {lower:.12f}")
            return BlahutArimotoResult(lower, InputDistribution(p / p.sum()), iteration, gap)
        # Mise à jour multiplicative p_k ∝ p_k·2^{D_k}
        w = p * np.exp2(d - upper)
        p = w / w.sum()

    raise ConvergenceError(f"❌ Blahut-Arimoto: pas de convergence en {limit} itérations (écart {gap:.3e})")


def closed_form_mi(a_sq: float, theta: float) -> float:
    """2 - hbq(a(1 - sin2θ)) - hbq(a(1 + sin2θ))"""
    return float(fb_capacity(np.float64(a_sq), np.float64(theta)))
