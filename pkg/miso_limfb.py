#!/usr/bin/env python3
"""
📡 MISO LIMFB - Retour limité direction + phase résiduelle (ADC un bit)

Conditions du schéma:
- B1 bits : direction du canal, codebook RVQ (vecteurs isotropes unitaires)
- B2 bits : phase résiduelle ∠(h*v), même codebook de phase que le SISO
- Émission : beamforming v et QPSK tournée de -φ̂

Analyse:
- Capacités exacte / borne inférieure / CSIT parfaite
- Perte de puissance moyenne (1 - 2^{-B1/(Nt-1)})(1 - 2^{-B2})
- Budget de bits garantissant une perte de capacité <= 2ε
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from channel import ChannelRealization, RngStream, TransmitPower, linear_power
from config import SimulationConfig
from numerics import hbq, solve_hbq_threshold
from siso_limfb import (
    PhaseFeedback,
    build_phase_codebook,
    fb_capacity,
    fb_capacity_lower,
    no_csit_theta,
    perfect_capacity,
    quantize_phase,
    validate_gain,
    validate_theta,
    to_output,
)

logger = logging.getLogger(__name__)

# Limites lues une fois au chargement du module
_LIMITS = SimulationConfig()
MAX_RVQ_BITS = _LIMITS.MAX_RVQ_BITS
MAX_CODEBOOK_BYTES = _LIMITS.MAX_CODEBOOK_BYTES

PowerLike = Union[TransmitPower, float, np.ndarray]


@dataclass(frozen=True)
class DirectionCodebook:
    """2^B1 vecteurs unitaires de C^Nt (lignes de `vectors`)"""
    bits: int
    vectors: np.ndarray

    @property
    def nt(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def size(self) -> int:
        return int(self.vectors.shape[0])


@dataclass(frozen=True)
class DirectionChoice:
    """Résultat de la sélection de direction"""
    index: int
    cos2_beta: float
    residual_phase: float


@dataclass(frozen=True)
class MisoFeedback:
    """Retour complet : index de direction, index de phase, cos²β et θ"""
    direction_index: int
    phase_index: int
    cos2_beta: float
    theta: float


@dataclass(frozen=True)
class BudgetCheck:
    """Condition (1 - 2^{-B1/(Nt-1)})(1 - 2^{-B2}) >= δ/(Pt·Nt)"""
    satisfied: bool
    lhs: float
    rhs: float
    delta: float
    b1: int
    b2: int

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


def build_rvq_codebook(rng: RngStream, nt: int, bits: int,
                       max_bytes: Optional[int] = None) -> DirectionCodebook:
    """Codebook RVQ : vecteurs CN(0, I) normalisés (isotropes sur la sphère)"""
    if nt < 2:
        raise ValueError(f"❌ build_rvq_codebook: nt doit être >= 2 (reçu {nt})")
    if not 1 <= bits <= MAX_RVQ_BITS:
        raise ValueError(f"❌ build_rvq_codebook: bits doit être dans [1, {MAX_RVQ_BITS}] (reçu {bits})")
    budget = MAX_CODEBOOK_BYTES if max_bytes is None else max_bytes
    # complex128 + tableaux intermédiaires réels
    needed = (1 << bits) * nt * 16 * 2
    if needed > budget:
        raise ValueError(f"❌ build_rvq_codebook: 2^{bits} x {nt} dépasse le budget mémoire ({needed} > {budget} octets)")

    gen = rng.generator()
    shape = (1 << bits, nt)
    vectors = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    return DirectionCodebook(int(bits), vectors)


def select_direction(h: ChannelRealization, cb: DirectionCodebook) -> DirectionChoice:
    """Index maximisant |h*v| (égalités : plus petit index)"""
    if h.nt != cb.nt:
        raise ValueError(f"❌ select_direction: Nt du canal ({h.nt}) != Nt du codebook ({cb.nt})")
    norm_sq = h.norm_sq
    if not norm_sq > 0:
        raise ValueError("❌ select_direction: canal nul")

    inner = cb.vectors @ np.conj(h.coefficients)        # h*v_m pour tout m
    gains = inner.real ** 2 + inner.imag ** 2
    index = int(np.argmax(gains))
    cos2_beta = min(float(gains[index]) / norm_sq, 1.0)
    return DirectionChoice(index, cos2_beta, float(np.angle(inner[index])))


def quantize_residual_phase(residual_phase: float, b2: int) -> PhaseFeedback:
    """Quantification de ∠(h*v) avec le codebook de phase à B2 bits"""
    if b2 < 1:
        raise ValueError(f"❌ quantize_residual_phase: b2 doit être >= 1 (reçu {b2})")
    return quantize_phase(residual_phase, build_phase_codebook(b2))


def miso_feedback(h: ChannelRealization, cb: DirectionCodebook, b2: int) -> MisoFeedback:
    """Chaîne complète côté récepteur"""
    choice = select_direction(h, cb)
    phase = quantize_residual_phase(choice.residual_phase, b2)
    return MisoFeedback(choice.index, phase.index, choice.cos2_beta, phase.theta)


def _check_cos2(cos2_beta) -> np.ndarray:
    c = np.asarray(cos2_beta, dtype=np.float64)
    if np.any(np.isnan(c)) or np.any(c < 0) or np.any(c > 1.0 + 1e-12):
        raise ValueError(f"❌ cos²β hors de [0, 1]: {cos2_beta}")
    return np.minimum(c, 1.0)


def _effective(pt: PowerLike, h_norm_sq, cos2_beta) -> np.ndarray:
    return linear_power(pt) * validate_gain(h_norm_sq) * _check_cos2(cos2_beta)


def capacity_miso_fb(pt: PowerLike, h_norm_sq, cos2_beta, theta) -> Union[float, np.ndarray]:
    """Capacité avec retour direction + phase résiduelle"""
    return to_output(fb_capacity(_effective(pt, h_norm_sq, cos2_beta), validate_theta(theta)))


def capacity_miso_fb_lower(pt: PowerLike, h_norm_sq, cos2_beta, theta) -> Union[float, np.ndarray]:
    """2(1 - hbq(Pt‖h‖²cos²β(1 - sin2|θ|)))"""
    return to_output(fb_capacity_lower(_effective(pt, h_norm_sq, cos2_beta), validate_theta(theta)))


def capacity_miso_perfect(pt: PowerLike, h_norm_sq) -> Union[float, np.ndarray]:
    """Capacité avec CSIT parfaite (beamforming adapté)"""
    return to_output(perfect_capacity(linear_power(pt) * validate_gain(h_norm_sq)))


def capacity_loss_upper_bound(pt: PowerLike, h_norm_sq, cos2_beta, theta) -> Union[float, np.ndarray]:
    """C_MISO - C_MISO^fb <= 2·hbq(Pt‖h‖²cos²β(1 - sin2|θ|))"""
    s = np.sin(2.0 * np.abs(validate_theta(theta)))
    x = _effective(pt, h_norm_sq, cos2_beta) * np.maximum(1.0 - s, 0.0)
    return to_output(2.0 * hbq(x))


def no_csit_beamformer(nt: int) -> np.ndarray:
    """Beamformer fixe à gain égal 1/√Nt·(1, …, 1)"""
    return np.full(nt, 1.0 / math.sqrt(nt), dtype=np.complex128)


def no_csit_features(h: ChannelRealization, beamformer: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """(cos²β, θ) du beamformer fixe avec QPSK non tournée (canal nul : cos²β = 0)"""
    v = no_csit_beamformer(h.nt) if beamformer is None else beamformer
    inner = complex(np.vdot(h.coefficients, v))
    norm_sq = h.norm_sq
    cos2_beta = min(abs(inner) ** 2 / norm_sq, 1.0) if norm_sq > 0 else 0.0
    return cos2_beta, no_csit_theta(math.atan2(inner.imag, inner.real))


def capacity_miso_no_csit(pt: PowerLike, h: ChannelRealization) -> Union[float, np.ndarray]:
    """QPSK non tournée sur le beamformer fixe"""
    cos2_beta, theta = no_csit_features(h)
    return capacity_miso_fb(pt, h.norm_sq, cos2_beta, theta)


def rvq_direction_bound(nt: int, b1: int) -> float:
    """E_W[cos²β] > 1 - 2^{-B1/(Nt-1)}"""
    return 1.0 - 2.0 ** (-b1 / (nt - 1))


def power_loss_bound(nt: int, b1: int, b2: int) -> float:
    """(1 - 2^{-B1/(Nt-1)})(1 - 2^{-B2})"""
    if nt < 2:
        raise ValueError(f"❌ power_loss_bound: nt doit être >= 2 (reçu {nt})")
    if b1 < 1 or b2 < 1:
        raise ValueError(f"❌ power_loss_bound: b1 et b2 doivent être >= 1 (reçu {b1}, {b2})")
    return rvq_direction_bound(nt, b1) * (1.0 - 2.0 ** (-b2))


def feedback_budget_satisfied(nt: int, b1: int, b2: int, pt: PowerLike, epsilon: float,
                              delta: Optional[float] = None) -> BudgetCheck:
    """Vérifie la condition garantissant C_loss <= 2ε, avec E[‖h‖²] = Nt"""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"❌ feedback_budget_satisfied: ε doit être dans ]0, 1[ (reçu {epsilon})")
    if delta is None:
        delta = solve_hbq_threshold(epsilon)
    lhs = power_loss_bound(nt, b1, b2)
    rhs = delta / (float(linear_power(pt)) * nt)
    return BudgetCheck(lhs >= rhs, lhs, rhs, delta, int(b1), int(b2))


def min_feedback_bits(nt: int, pt: PowerLike, epsilon: float, max_bits: int = 24) -> Optional[BudgetCheck]:
    """Plus petit B = B1 + B2 satisfaisant le budget (meilleure marge à B égal)"""
    delta = solve_hbq_threshold(epsilon)
    for total in range(2, max_bits + 1):
        checks = [feedback_budget_satisfied(nt, b1, total - b1, pt, epsilon, delta=delta)
                  for b1 in range(1, total)]
        passing = [c for c in checks if c.satisfied]
        if passing:
            return max(passing, key=lambda c: (c.margin, c.b1))
    return None

