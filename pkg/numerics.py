#!/usr/bin/env python3
"""
📐 NUMERICS - Fonctions spéciales des formules de capacité
Q gaussienne, entropie binaire et leur composition Hb(Q(√x)), calculées de
façon stable (scipy.special), plus la résolution du seuil Hb(Q(√δ)) = ε
"""

import logging
import math
from typing import Union

import numpy as np
from scipy import optimize, special

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
Probability = float
EffectiveSnr = float

LN2 = math.log(2.0)
SQRT2 = math.sqrt(2.0)

# En dessous de ce seuil, Q(√x) passe par la branche asymptotique
HBQ_CROSSOVER = 1e-15
# Au-delà, erfc sous-déborde avant log_ndtr
_ERFC_SAFE_LIMIT = 30.0
# Tolérance d'arrondi admise autour de [0, 1]
_ONE_ULP = float(np.spacing(1.0))


def _as_output(values: np.ndarray) -> ArrayLike:
    """Scalaire Python si l'entrée était scalaire"""
    return float(values) if np.ndim(values) == 0 else values


def q_function(x: ArrayLike) -> ArrayLike:
    """Queue de la loi normale standard Q(x) = ½·erfc(x/√2)"""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("❌ q_function: argument non fini")

    q = 0.5 * special.erfc(x / SQRT2)
    far = x > _ERFC_SAFE_LIMIT
    if np.any(far):
        # erfc s'annule vers x ≈ 37.7 ; log_ndtr reste exact jusqu'au sous-normal
        q = np.where(far, np.exp(special.log_ndtr(-np.where(far, x, 0.0))), q)
    return _as_output(q)


def binary_entropy(p: ArrayLike) -> ArrayLike:
    """Entropie binaire Hb(p) en bits, Hb(0) = Hb(1) = 0"""
    p = np.asarray(p, dtype=np.float64)
    if np.any(np.isnan(p)) or np.any(p < -_ONE_ULP) or np.any(p > 1.0 + _ONE_ULP):
        raise ValueError(f"❌ binary_entropy: probabilité hors de [0, 1]: {p}")
    p = np.clip(p, 0.0, 1.0)
    h = -(special.xlogy(p, p) + special.xlog1py(1.0 - p, -p)) / LN2
    return _as_output(h)


def hbq(x: ArrayLike) -> ArrayLike:
    """Hb(Q(√x)), décroissante et convexe en x >= 0, hbq(0) = 1"""
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise ValueError(f"❌ hbq: x doit être >= 0 (reçu {x})")

    root = np.sqrt(x)
    finite_root = np.where(np.isfinite(root), root, 0.0)
    p = np.asarray(q_function(finite_root), dtype=np.float64)
    naive = np.asarray(binary_entropy(p), dtype=np.float64)

    # Branche petite probabilité : Hb(p) ≈ p·(log2(1/p) + 1/ln2), en log
    with np.errstate(invalid="ignore", over="ignore"):
        log_p = special.log_ndtr(-root)
        tail = np.exp(log_p) * (1.0 - log_p) / LN2

    out = np.where(p < HBQ_CROSSOVER, tail, naive)
    out = np.where(np.isinf(x), 0.0, out)
    return _as_output(out)


def solve_hbq_threshold(epsilon: float, tol: float = 1e-10) -> EffectiveSnr:
    """δ tel que hbq(δ) = ε, par dichotomie sur [0, X]"""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"❌ solve_hbq_threshold: ε doit être dans ]0, 1[ (reçu {epsilon})")

    upper = 1.0
    while hbq(upper) >= epsilon:
        upper *= 2.0
        if upper > 1e6:
            raise ValueError(f"❌ solve_hbq_threshold: ε = {epsilon} trop petit")

    delta = optimize.bisect(
        lambda x: hbq(x) - epsilon, 0.0, upper, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500
    )
    residual = abs(hbq(delta) - epsilon)
    if residual > tol:
        logger.warning(f"⚠️ Seuil hbq: résidu {residual:.2e} > {tol:.0e} pour ε = {epsilon}")
    logger.debug(f"🔍 hbq(δ) = {epsilon} → δ = {delta:.12g}")
    return float(delta)
