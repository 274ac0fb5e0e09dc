#!/usr/bin/env python3
"""
📶 SISO LIMFB - Retour de phase limité pour le canal SISO à ADC un bit

Schéma:
- Le récepteur quantifie mod(∠h, π/2) sur 2^B centres uniformes
- L'émetteur envoie une QPSK tournée de -φ̂ (probabilités uniformes)
- Capacité exacte, borne inférieure, capacité avec CSIT parfaite
- Analyse de la perte de puissance moyenne due à la quantification
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from channel import ChannelRealization, TransmitPower, linear_power
from config import SimulationConfig
from numerics import hbq

logger = logging.getLogger(__name__)

MAX_PHASE_BITS = SimulationConfig().MAX_PHASE_BITS

HALF_PI = 0.5 * math.pi
QUARTER_PI = 0.25 * math.pi
# Marge d'arrondi sur |θ| <= π/4
_THETA_SLACK = 1e-12

PowerLike = Union[TransmitPower, float, np.ndarray]


@dataclass(frozen=True)
class PhaseCodebook:
    """Centres φ_i = iπ/2^{B+1} + π/2^{B+2}, i = 0 … 2^B - 1"""
    bits: int

    def __post_init__(self):
        if not 1 <= self.bits <= MAX_PHASE_BITS:
            raise ValueError(f"❌ PhaseCodebook: bits doit être dans [1, {MAX_PHASE_BITS}] (reçu {self.bits})")

    @property
    def size(self) -> int:
        return 1 << self.bits

    @property
    def spacing(self) -> float:
        """Largeur d'une cellule π/2^{B+1}"""
        return math.pi / (1 << (self.bits + 1))

    @property
    def half_width(self) -> float:
        """Erreur maximale π/2^{B+2}"""
        return 0.5 * self.spacing

    def center(self, index: int) -> float:
        if not 0 <= index < self.size:
            raise IndexError(f"❌ Index de phase hors codebook: {index}")
        return index * self.spacing + self.half_width

    @property
    def centers(self) -> np.ndarray:
        return np.arange(self.size, dtype=np.float64) * self.spacing + self.half_width


@dataclass(frozen=True)
class PhaseFeedback:
    """Index renvoyé et erreur θ = φ̂ - mod(∠h, π/2)"""
    index: int
    theta: float


@dataclass(frozen=True)
class PhaseLossBounds:
    """Facteurs de perte de puissance moyenne (linéaires, <= 1)"""
    bits: int
    exact: float            # 1 - sin²(π/2^{B+2}) / (π/2^{B+2})
    pi_bound: float         # 1 - π/2^{B+2}
    pow2_bound: float       # 1 - 2^{-B}
    worst_case: float       # 1 - sin(π/2^{B+1})

    @property
    def exact_db(self) -> float:
        return loss_factor_to_db(self.exact)

    @property
    def pi_bound_db(self) -> float:
        return loss_factor_to_db(self.pi_bound)

    @property
    def pow2_bound_db(self) -> float:
        return loss_factor_to_db(self.pow2_bound)

    @property
    def worst_case_db(self) -> float:
        return loss_factor_to_db(self.worst_case)


def build_phase_codebook(bits: int) -> PhaseCodebook:
    """Quantification uniforme de [0, π/2] sur B bits"""
    return PhaseCodebook(int(bits))


def phase_residue(angle: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """mod(angle, π/2) dans [0, π/2), convention x - m·floor(x/m)"""
    angle = np.asarray(angle, dtype=np.float64)
    rho = angle - HALF_PI * np.floor(angle / HALF_PI)
    # x - m·floor(x/m) peut arrondir à m pour x légèrement négatif
    rho = np.where(rho >= HALF_PI, 0.0, rho)
    return float(rho) if rho.ndim == 0 else rho


def quantize_phases(angles: np.ndarray, cb: PhaseCodebook) -> Tuple[np.ndarray, np.ndarray]:
    """Quantification vectorisée : (indices, θ)"""
    angles = np.asarray(angles, dtype=np.float64)
    if not np.all(np.isfinite(angles)):
        raise ValueError("❌ quantize_phases: angle non fini")

    rho = np.asarray(phase_residue(angles))
    w = cb.spacing
    idx = np.floor(rho / w).astype(np.int64)
    # Sur une frontière exacte, égalité de distance : index inférieur
    on_edge = (idx > 0) & (rho == idx * w)
    idx = np.where(on_edge, idx - 1, idx)
    idx = np.clip(idx, 0, cb.size - 1)
    theta = idx * w + cb.half_width - rho
    return idx, theta


def quantize_phase(angle: float, cb: PhaseCodebook) -> PhaseFeedback:
    """φ̂ = argmin |mod(∠h, π/2) - φ_m|"""
    if not math.isfinite(angle):
        raise ValueError(f"❌ quantize_phase: angle non fini ({angle})")
    idx, theta = quantize_phases(np.asarray([angle]), cb)
    return PhaseFeedback(int(idx[0]), float(theta[0]))


def no_csit_theta(angle: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Résidu d'une QPSK fixe (non tournée) : mod(angle, π/2) - π/4"""
    rho = np.asarray(phase_residue(angle)) - QUARTER_PI
    return float(rho) if rho.ndim == 0 else rho


def loss_factor_to_db(factor: float) -> float:
    """Facteur de perte linéaire -> perte en dB (positive)"""
    if not factor > 0:
        return math.inf
    return -10.0 * math.log10(factor)


def validate_gain(h_mag_sq) -> np.ndarray:
    g = np.asarray(h_mag_sq, dtype=np.float64)
    if np.any(np.isnan(g)) or np.any(g < 0):
        raise ValueError(f"❌ Gain de canal négatif ou NaN: {h_mag_sq}")
    return g


def validate_theta(theta) -> np.ndarray:
    t = np.asarray(theta, dtype=np.float64)
    if np.any(np.isnan(t)) or np.any(np.abs(t) > QUARTER_PI + _THETA_SLACK):
        raise ValueError(f"❌ Erreur de phase |θ| > π/4: {theta}")
    return t


def to_output(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


def fb_capacity(snr: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """2 - hbq(x(1 - sin2θ)) - hbq(x(1 + sin2θ)), x = puissance reçue effective"""
    s = np.sin(2.0 * theta)
    return 2.0 - hbq(snr * np.maximum(1.0 - s, 0.0)) - hbq(snr * (1.0 + s))


def fb_capacity_lower(snr: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """2(1 - hbq(x(1 - sin2|θ|)))"""
    s = np.sin(2.0 * np.abs(theta))
    return 2.0 * (1.0 - hbq(snr * np.maximum(1.0 - s, 0.0)))


def perfect_capacity(snr: np.ndarray) -> np.ndarray:
    """2(1 - hbq(x))"""
    return 2.0 * (1.0 - hbq(snr))


def capacity_siso_fb(pt: PowerLike, h_mag_sq, theta) -> Union[float, np.ndarray]:
    """Capacité avec retour de phase quantifié (QPSK uniforme)"""
    g = linear_power(pt) * validate_gain(h_mag_sq)
    return to_output(fb_capacity(g, validate_theta(theta)))


def capacity_siso_fb_lower(pt: PowerLike, h_mag_sq, theta) -> Union[float, np.ndarray]:
    """Borne inférieure par décroissance de hbq"""
    g = linear_power(pt) * validate_gain(h_mag_sq)
    return to_output(fb_capacity_lower(g, validate_theta(theta)))


def capacity_siso_perfect(pt: PowerLike, h_mag_sq) -> Union[float, np.ndarray]:
    """Capacité avec CSIT parfaite"""
    g = linear_power(pt) * validate_gain(h_mag_sq)
    return to_output(perfect_capacity(g))


def capacity_siso_no_csit(pt: PowerLike, h: ChannelRealization) -> Union[float, np.ndarray]:
    """QPSK uniforme non tournée à travers le canal réalisé"""
    if h.nt != 1:
        raise ValueError(f"❌ capacity_siso_no_csit: canal SISO attendu (Nt = {h.nt})")
    return capacity_siso_fb(pt, h.norm_sq, no_csit_theta(h.phase))


def avg_power_loss_phase(bits: int) -> PhaseLossBounds:
    """E_θ[1 - sin2|θ|] pour θ uniforme et ses bornes relâchées"""
    if bits < 1:
        raise ValueError(f"❌ avg_power_loss_phase: bits doit être >= 1 (reçu {bits})")
    a = math.pi / 2.0 ** (bits + 2)
    return PhaseLossBounds(
        bits=int(bits),
        exact=1.0 - math.sin(a) ** 2 / a,
        pi_bound=1.0 - a,
        pow2_bound=1.0 - 2.0 ** (-bits),
        worst_case=1.0 - math.sin(2.0 * a),
    )
