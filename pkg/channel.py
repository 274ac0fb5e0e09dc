#!/usr/bin/env python3
"""
📡 CHANNEL - Réalisations de canal de Rayleigh et conversion SNR
Flux aléatoires reproductibles : la réalisation t d'une expérience utilise le
flux (graine, t), indépendamment de l'ordre d'exécution ou du parallélisme
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

# Chaque partie réelle/imaginaire a une variance ½
_COMPONENT_STD = math.sqrt(0.5)
_U64 = 2 ** 64


@dataclass(frozen=True)
class RngStream:
    """Clé d'un sous-flux aléatoire : (graine, identifiant de flux, sous-clés)"""
    seed: int
    stream_id: int
    path: Tuple[int, ...] = ()

    def __post_init__(self):
        for value in (self.seed, self.stream_id, *self.path):
            if not 0 <= int(value) < _U64:
                raise ValueError(f"❌ RngStream: valeur hors de [0, 2^64): {value}")

    def child(self, *keys: int) -> "RngStream":
        """Sous-flux dérivé (ex. codebook de la réalisation t)"""
        return RngStream(self.seed, self.stream_id, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        """Nouveau générateur positionné au début du flux"""
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id), *self.path))
        return np.random.default_rng(seq)


@dataclass(frozen=True)
class ChannelRealization:
    """Vecteur de canal h (longueur Nt, Nt = 1 pour le SISO)"""
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.atleast_1d(np.asarray(self.coefficients, dtype=np.complex128))
        if coeffs.ndim != 1 or coeffs.size < 1:
            raise ValueError("❌ ChannelRealization: vecteur de longueur >= 1 attendu")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("❌ ChannelRealization: coefficients non finis")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def nt(self) -> int:
        return int(self.coefficients.size)

    @property
    def norm_sq(self) -> float:
        """‖h‖² (|h|² en SISO)"""
        return float(np.vdot(self.coefficients, self.coefficients).real)

    @property
    def phase(self) -> float:
        """∠h, défini en SISO uniquement"""
        if self.nt != 1:
            raise ValueError("❌ ChannelRealization.phase: réservé au cas SISO (Nt = 1)")
        return float(np.angle(self.coefficients[0]))

    def rotated(self, angle: float) -> "ChannelRealization":
        """h·e^{j·angle}"""
        return ChannelRealization(self.coefficients * np.exp(1j * angle))


@dataclass(frozen=True)
class TransmitPower:
    """Puissance d'émission Pt (bruit de variance 1, donc SNR = Pt)"""
    linear: float
    db: float

    def __post_init__(self):
        if not self.linear > 0:
            raise ValueError(f"❌ TransmitPower: Pt doit être > 0 (reçu {self.linear})")

    @classmethod
    def from_linear(cls, linear: float) -> "TransmitPower":
        return cls(float(linear), 10.0 * math.log10(linear))


def snr_db_to_power(db: float) -> TransmitPower:
    """SNR (dB) = 10·log10(Pt)"""
    if not math.isfinite(db):
        raise ValueError(f"❌ snr_db_to_power: SNR non fini ({db})")
    return TransmitPower(10.0 ** (db / 10.0), float(db))


def snr_grid_to_power(db: Union[np.ndarray, list]) -> np.ndarray:
    """Version vectorisée de snr_db_to_power (Pt linéaires)"""
    db = np.asarray(db, dtype=np.float64)
    if not np.all(np.isfinite(db)):
        raise ValueError("❌ snr_grid_to_power: grille SNR non finie")
    return np.power(10.0, db / 10.0)


def linear_power(pt: Union[TransmitPower, float, np.ndarray]) -> Union[float, np.ndarray]:
    """Pt linéaire depuis un TransmitPower ou une valeur brute"""
    if isinstance(pt, TransmitPower):
        return pt.linear
    value = np.asarray(pt, dtype=np.float64)
    if np.any(value < 0) or np.any(np.isnan(value)):
        raise ValueError(f"❌ Puissance d'émission négative ou NaN: {pt}")
    return float(value) if value.ndim == 0 else value


def _cn_draws(gen: np.random.Generator, shape) -> np.ndarray:
    return _COMPONENT_STD * (gen.standard_normal(shape) + 1j * gen.standard_normal(shape))


def sample_channel(rng: RngStream, nt: int) -> ChannelRealization:
    """h ~ CN(0, I_Nt), déterministe pour un flux donné"""
    if nt < 1:
        raise ValueError(f"❌ sample_channel: nt doit être >= 1 (reçu {nt})")
    return ChannelRealization(_cn_draws(rng.generator(), nt))


def sample_channel_block(rng: RngStream, nt: int, count: int) -> np.ndarray:
    """count réalisations CN(0, I_Nt) tirées d'un même flux, forme (count, nt)"""
    if nt < 1 or count < 1:
        raise ValueError(f"❌ sample_channel_block: nt et count doivent être >= 1 (reçu {nt}, {count})")
    return _cn_draws(rng.generator(), (count, nt))
