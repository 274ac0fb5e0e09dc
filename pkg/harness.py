#!/usr/bin/env python3
"""
🧪 HARNESS - Expériences Monte Carlo du retour limité à ADC un bit

Modes:
- siso : CSIT parfaite, retour de phase à B bits, QPSK fixe (sans CSIT)
- miso : CSIT parfaite, retour (B1, B2) pour chaque répartition, beamformer fixe
- loss : perte de capacité moyenne C_MISO - C_MISO^fb et sa borne supérieure
- oracle-check : formes closes contre DMC / Blahut-Arimoto
- budget : plus petit B = B1 + B2 garantissant une perte <= 2ε
- hbq-curve : tabulation de hbq(x)

Chaque réalisation t utilise le flux (graine, t) : les résultats ne dépendent
ni du découpage en blocs ni du nombre de workers.
"""

import asyncio
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from channel import RngStream, sample_channel, snr_grid_to_power
from config import ExperimentConfig, ExperimentMode, OracleConfig
from dmc_oracle import blahut_arimoto, build_dmc, closed_form_mi, mutual_information, InputDistribution
from miso_limfb import (
    build_rvq_codebook,
    capacity_loss_upper_bound,
    capacity_miso_fb,
    capacity_miso_perfect,
    feedback_budget_satisfied,
    min_feedback_bits,
    no_csit_beamformer,
    no_csit_features,
    quantize_residual_phase,
    select_direction,
)
from numerics import hbq, solve_hbq_threshold
from siso_limfb import (
    build_phase_codebook,
    capacity_siso_fb,
    capacity_siso_perfect,
    no_csit_theta,
    quantize_phases,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "snr_db", "scheme", "mean_capacity_bits", "std_err",
    "mean_cos2beta", "mean_abs_theta", "n_trials",
]
BUDGET_COLUMNS = ["snr_db", "min_total_bits", "b1", "b2", "lhs", "rhs", "delta"]
HBQ_COLUMNS = ["x", "hbq", "one_minus_hbq"]
ORACLE_COLUMNS = ["a_sq", "theta", "closed_form", "mutual_information", "ba_capacity",
                  "mi_deviation", "ba_excess"]

# Sous-clés des flux dérivés de RngStream(graine, t)
CODEBOOK_TAG = 1
FIXED_CODEBOOK_TAG = 2
ORACLE_TAG = 3

FLOAT_FORMAT = "%.10g"

PERFECT = "perfect_csit"
NO_CSIT = "no_csit"


def siso_label(bits: int) -> str:
    return f"fb_B={bits}"


def miso_label(b1: int, b2: int) -> str:
    return f"fb_B1={b1}_B2={b2}"


def loss_label(b1: int, b2: int) -> str:
    return f"loss_B1={b1}_B2={b2}"


def loss_bound_label(b1: int, b2: int) -> str:
    return f"loss_ub_B1={b1}_B2={b2}"


@dataclass
class ResultRow:
    """Une ligne du CSV : un schéma à un SNR"""
    snr_db: float
    scheme: str
    mean_capacity_bits: float
    std_err: float
    mean_cos2beta: float = math.nan
    mean_abs_theta: float = math.nan
    n_trials: int = 0


@dataclass
class OracleReport:
    """📊 Bilan de la vérification par DMC"""
    checked: int = 0
    max_mi_deviation: float = 0.0
    max_ba_excess: float = 0.0
    max_uniform_tv: float = 0.0
    failures: List[str] = field(default_factory=list)
    details: Optional[pd.DataFrame] = None

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass
class ExperimentOutcome:
    table: Optional[pd.DataFrame] = None
    report: Optional[OracleReport] = None

    @property
    def passed(self) -> bool:
        return self.report is None or self.report.passed


# 🧮 AGRÉGATION

def summarize(snr_db: np.ndarray, scheme: str, per_trial: np.ndarray,
              cos2_beta: Optional[np.ndarray] = None,
              theta: Optional[np.ndarray] = None) -> List[ResultRow]:
    """Moyenne et erreur standard sur les réalisations (axe 1) pour chaque SNR"""
    n = per_trial.shape[1]
    means = per_trial.mean(axis=1)
    if n > 1:
        errs = per_trial.std(axis=1, ddof=1) / math.sqrt(n)
    else:
        errs = np.zeros_like(means)
    cos2_mean = float(np.mean(cos2_beta)) if cos2_beta is not None else math.nan
    theta_mean = float(np.mean(np.abs(theta))) if theta is not None else math.nan
    return [
        ResultRow(float(s), scheme, float(m), float(e), cos2_mean, theta_mean, n)
        for s, m, e in zip(snr_db, means, errs)
    ]


def rows_to_frame(rows: Sequence[ResultRow]) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(r) for r in rows], columns=CSV_COLUMNS)
    return frame.astype({"n_trials": "int64"})


def write_table(frame: pd.DataFrame, path: str):
    """CSV UTF-8, séparateur virgule, cellules vides pour les valeurs manquantes"""
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="",
                 lineterminator="\n", encoding="utf-8")
    logger.info(f"💾 {len(frame)} lignes écrites dans {path}")


def horizontal_gap_db(snr_db: Sequence[float], reference: Sequence[float],
                      curve: Sequence[float], level: float) -> float:
    """Écart horizontal (dB) entre deux courbes croissantes au niveau `level`"""
    snr = np.asarray(snr_db, dtype=np.float64)

    def crossing(values) -> float:
        v = np.asarray(values, dtype=np.float64)
        above = np.nonzero(v >= level)[0]
        if above.size == 0:
            return math.nan
        i = int(above[0])
        if i == 0:
            return float(snr[0])
        # Interpolation linéaire entre les deux points qui encadrent le niveau
        return float(np.interp(level, v[i - 1:i + 1], snr[i - 1:i + 1]))

    return crossing(curve) - crossing(reference)


# 🎲 CALCULS PAR BLOC (fonctions de module : sérialisables pour le pool de processus)

def siso_chunk(seed: int, phase_bits: Sequence[int], start: int, stop: int) -> Dict[str, np.ndarray]:
    """|h|², θ par nombre de bits et θ sans CSIT pour les réalisations [start, stop)"""
    draws = np.array([sample_channel(RngStream(seed, t), 1).coefficients[0] for t in range(start, stop)])
    angles = np.angle(draws)
    thetas = np.stack([quantize_phases(angles, build_phase_codebook(b))[1] for b in phase_bits])
    return {
        "gain": np.abs(draws) ** 2,
        "theta": thetas,
        "plain_theta": np.asarray(no_csit_theta(angles)),
    }


def miso_chunk(seed: int, nt: int, splits: Sequence[Tuple[int, int]], fixed_codebook: bool,
               start: int, stop: int) -> Dict[str, np.ndarray]:
    """‖h‖², cos²β et θ par répartition, plus le beamformer fixe, pour [start, stop)"""
    n = stop - start
    directions = sorted({b1 for b1, _ in splits})
    fixed = {
        b1: build_rvq_codebook(RngStream(seed, 0).child(FIXED_CODEBOOK_TAG, b1), nt, b1)
        for b1 in directions
    } if fixed_codebook else {}
    beamformer = no_csit_beamformer(nt)

    gain = np.empty(n)
    cos2 = np.empty((len(splits), n))
    theta = np.empty((len(splits), n))
    plain_cos2 = np.empty(n)
    plain_theta = np.empty(n)

    for i, t in enumerate(range(start, stop)):
        stream = RngStream(seed, t)
        h = sample_channel(stream, nt)
        gain[i] = h.norm_sq
        choices = {
            b1: select_direction(h, fixed.get(b1) or build_rvq_codebook(stream.child(CODEBOOK_TAG, b1), nt, b1))
            for b1 in directions
        }
        for s, (b1, b2) in enumerate(splits):
            choice = choices[b1]
            cos2[s, i] = choice.cos2_beta
            theta[s, i] = quantize_residual_phase(choice.residual_phase, b2).theta
        plain_cos2[i], plain_theta[i] = no_csit_features(h, beamformer)

    return {"gain": gain, "cos2": cos2, "theta": theta,
            "plain_cos2": plain_cos2, "plain_theta": plain_theta}


def _merge(chunks: Sequence[Dict[str, np.ndarray]]) -> Dict[str, np.ndarray]:
    """Concatène les blocs dans l'ordre des réalisations (dernier axe)"""
    return {key: np.concatenate([c[key] for c in chunks], axis=-1) for key in chunks[0]}


class ExperimentRunner:
    """🧪 Exécute une sous-commande et produit sa table de résultats"""

    def __init__(self, config: ExperimentConfig, oracle: Optional[OracleConfig] = None):
        self.config = config
        self.oracle = oracle or OracleConfig()
        self.logger = logging.getLogger(__name__)

    def chunk_bounds(self) -> List[Tuple[int, int]]:
        size = self.config.CHUNK_TRIALS
        return [(s, min(s + size, self.config.TRIALS)) for s in range(0, self.config.TRIALS, size)]

    async def gather_chunks(self, worker: Callable, *args) -> Dict[str, np.ndarray]:
        """Répartit les réalisations en blocs, séquentiellement ou sur un pool de processus"""
        bounds = self.chunk_bounds()
        self.logger.debug(f"🔧 {len(bounds)} blocs, {self.config.WORKERS} worker(s)")

        if self.config.WORKERS == 1:
            results = []
            for start, stop in bounds:
                results.append(worker(*args, start, stop))
                self.logger.info(f"✅ Réalisations [{start}, {stop}) calculées")
                await asyncio.sleep(0)
            return _merge(results)

        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=self.config.WORKERS) as pool:
            futures = [loop.run_in_executor(pool, worker, *args, start, stop) for start, stop in bounds]
            results = await asyncio.gather(*futures)
        self.logger.info(f"✅ {len(bounds)} blocs calculés sur {self.config.WORKERS} processus")
        return _merge(results)

    def power_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        snr_db = self.config.snr_db
        return snr_db, snr_grid_to_power(snr_db)[:, None]

    # 📶 SISO

    async def run_siso(self) -> pd.DataFrame:
        cfg = self.config
        self.logger.info(f"📶 SISO: {cfg.TRIALS} réalisations, B = {cfg.PHASE_BITS}")
        f = await self.gather_chunks(siso_chunk, cfg.SEED, list(cfg.PHASE_BITS))
        snr_db, pts = self.power_grid()

        perfect = capacity_siso_perfect(pts, f["gain"])
        rows = summarize(snr_db, PERFECT, perfect)
        curves = {}
        for k, bits in enumerate(cfg.PHASE_BITS):
            cap = capacity_siso_fb(pts, f["gain"], f["theta"][k])
            curves[bits] = cap.mean(axis=1)
            rows += summarize(snr_db, siso_label(bits), cap, theta=f["theta"][k])
        plain = capacity_siso_fb(pts, f["gain"], f["plain_theta"])
        rows += summarize(snr_db, NO_CSIT, plain, theta=f["plain_theta"])

        reference = perfect.mean(axis=1)
        for bits, curve in curves.items():
            gap = horizontal_gap_db(snr_db, reference, curve, 1.0)
            self.logger.info(f"📊 B = {bits}: écart à 1 bit/utilisation vs CSIT parfaite = {gap:.2f} dB")
        return rows_to_frame(rows)

    # 📡 MISO

    async def _miso_features(self) -> Dict[str, np.ndarray]:
        cfg = self.config
        mode = "fixe" if cfg.FIXED_CODEBOOK else "tiré par réalisation"
        self.logger.info(f"📡 MISO Nt = {cfg.NT}: {cfg.TRIALS} réalisations, "
                         f"répartitions {cfg.SPLITS}, codebook {mode}")
        return await self.gather_chunks(miso_chunk, cfg.SEED, cfg.NT, list(cfg.SPLITS), cfg.FIXED_CODEBOOK)

    async def run_miso(self) -> pd.DataFrame:
        f = await self._miso_features()
        snr_db, pts = self.power_grid()

        rows = summarize(snr_db, PERFECT, capacity_miso_perfect(pts, f["gain"]))
        best = None
        for s, (b1, b2) in enumerate(self.config.SPLITS):
            cap = capacity_miso_fb(pts, f["gain"], f["cos2"][s], f["theta"][s])
            rows += summarize(snr_db, miso_label(b1, b2), cap, cos2_beta=f["cos2"][s], theta=f["theta"][s])
            top = float(cap[-1].mean())
            if best is None or top > best[0]:
                best = (top, b1, b2)
        plain = capacity_miso_fb(pts, f["gain"], f["plain_cos2"], f["plain_theta"])
        rows += summarize(snr_db, NO_CSIT, plain, cos2_beta=f["plain_cos2"], theta=f["plain_theta"])

        if best:
            self.logger.info(f"📊 Meilleure répartition à {snr_db[-1]:g} dB: "
                             f"(B1={best[1]}, B2={best[2]}) → {best[0]:.4f} bits")
        return rows_to_frame(rows)

    # 📉 PERTE DE CAPACITÉ

    async def run_loss(self) -> pd.DataFrame:
        cfg = self.config
        f = await self._miso_features()
        snr_db, pts = self.power_grid()

        perfect = capacity_miso_perfect(pts, f["gain"])
        rows = []
        for s, (b1, b2) in enumerate(cfg.SPLITS):
            cos2, theta = f["cos2"][s], f["theta"][s]
            loss = np.maximum(perfect - capacity_miso_fb(pts, f["gain"], cos2, theta), 0.0)
            bound = capacity_loss_upper_bound(pts, f["gain"], cos2, theta)
            rows += summarize(snr_db, loss_label(b1, b2), loss, cos2_beta=cos2, theta=theta)
            rows += summarize(snr_db, loss_bound_label(b1, b2), bound, cos2_beta=cos2, theta=theta)
            self._log_budget(snr_db, pts[:, 0], b1, b2)
        return rows_to_frame(rows)

    def _log_budget(self, snr_db: np.ndarray, pts: np.ndarray, b1: int, b2: int):
        cfg = self.config
        delta = solve_hbq_threshold(cfg.EPSILON)
        for db, pt in zip(snr_db, pts):
            if feedback_budget_satisfied(cfg.NT, b1, b2, float(pt), cfg.EPSILON, delta=delta).satisfied:
                self.logger.info(f"📊 (B1={b1}, B2={b2}): perte <= 2ε = {2 * cfg.EPSILON:g} garantie dès {db:g} dB")
                return
        self.logger.info(f"📊 (B1={b1}, B2={b2}): budget jamais satisfait sur la grille")

    # 🔍 ORACLE

    async def run_oracle_check(self) -> OracleReport:
        o = self.oracle
        grid = [(a, t) for a in np.linspace(0.0, o.A_SQ_MAX, o.A_SQ_POINTS)
                for t in np.linspace(-math.pi / 4, math.pi / 4, o.THETA_POINTS)]
        gen = RngStream(self.config.SEED, 0).child(ORACLE_TAG).generator()
        grid += list(zip(gen.uniform(0.0, o.A_SQ_MAX, o.RANDOM_TUPLES),
                         gen.uniform(-math.pi / 4, math.pi / 4, o.RANDOM_TUPLES)))
        self.logger.info(f"🔍 Vérification DMC sur {len(grid)} couples (a², θ)")

        report = OracleReport()
        uniform = InputDistribution.uniform()
        records = []
        for i, (a_sq, theta) in enumerate(grid):
            a_sq, theta = float(a_sq), float(theta)
            dmc = build_dmc(a_sq, theta)
            closed = closed_form_mi(a_sq, theta)
            mi = mutual_information(dmc)
            ba = blahut_arimoto(dmc, tol=o.BA_GAP, max_iter=o.BA_MAX_ITER)
            deviation = abs(closed - mi)
            excess = ba.capacity - closed
            records.append((a_sq, theta, closed, mi, ba.capacity, deviation, excess))

            report.max_mi_deviation = max(report.max_mi_deviation, deviation)
            report.max_ba_excess = max(report.max_ba_excess, excess)
            if deviation > o.MI_TOLERANCE:
                report.failures.append(f"❌ MI ≠ forme close: a²={a_sq:.6g}, θ={theta:.6g}, écart {deviation:.3e}")
            if excess > o.BA_TOLERANCE:
                report.failures.append(f"❌ Capacité BA > forme close: a²={a_sq:.6g}, θ={theta:.6g}, excès {excess:.3e}")
            if abs(theta) < 1e-15:
                tv = ba.optimum.total_variation(uniform)
                report.max_uniform_tv = max(report.max_uniform_tv, tv)
                if tv > o.BA_TOLERANCE:
                    report.failures.append(f"❌ Entrée optimale non uniforme à θ=0: a²={a_sq:.6g}, TV {tv:.3e}")
            if a_sq == 0.0 and (abs(mi) > o.MI_TOLERANCE or closed != 0.0):
                report.failures.append(f"❌ Capacité non nulle à a²=0 (θ={theta:.6g})")
            if i % 256 == 255:
                await asyncio.sleep(0)

        report.checked = len(grid)
        report.details = pd.DataFrame(records, columns=ORACLE_COLUMNS)
        if report.passed:
            self.logger.info(f"✅ Oracle: {report.checked} couples, écart MI max {report.max_mi_deviation:.2e}, "
                             f"excès BA max {report.max_ba_excess:.2e}")
        else:
            self.logger.error(f"❌ Oracle: {len(report.failures)} échec(s) sur {report.checked} couples")
            for message in report.failures[:20]:
                self.logger.error(message)
        return report

    # 🎯 BUDGET ET COURBE hbq

    async def run_budget(self) -> pd.DataFrame:
        cfg = self.config
        snr_db, pts = self.power_grid()
        delta = solve_hbq_threshold(cfg.EPSILON)
        self.logger.info(f"🎯 Budget: Nt = {cfg.NT}, ε = {cfg.EPSILON:g}, δ = {delta:.6g}")

        records = []
        for db, pt in zip(snr_db, pts[:, 0]):
            check = min_feedback_bits(cfg.NT, float(pt), cfg.EPSILON, max_bits=cfg.BUDGET_MAX_BITS)
            if check is None:
                records.append((db, None, None, None, math.nan, math.nan, delta))
            else:
                records.append((db, check.b1 + check.b2, check.b1, check.b2, check.lhs, check.rhs, check.delta))
        frame = pd.DataFrame(records, columns=BUDGET_COLUMNS)
        for column in ("min_total_bits", "b1", "b2"):
            frame[column] = pd.array(frame[column], dtype="Int64")
        return frame

    async def run_hbq_curve(self) -> pd.DataFrame:
        x = self.config.snr_db
        values = np.asarray(hbq(x), dtype=np.float64)
        return pd.DataFrame({"x": x, "hbq": values, "one_minus_hbq": 1.0 - values}, columns=HBQ_COLUMNS)

    # 🚀 POINT D'ENTRÉE

    async def run(self) -> ExperimentOutcome:
        mode = self.config.MODE
        handlers = {
            ExperimentMode.SISO: self.run_siso,
            ExperimentMode.MISO: self.run_miso,
            ExperimentMode.LOSS: self.run_loss,
            ExperimentMode.BUDGET: self.run_budget,
            ExperimentMode.HBQ_CURVE: self.run_hbq_curve,
        }
        if mode == ExperimentMode.ORACLE_CHECK:
            report = await self.run_oracle_check()
            outcome = ExperimentOutcome(table=report.details, report=report)
        else:
            outcome = ExperimentOutcome(table=await handlers[mode]())

        if self.config.OUTPUT_PATH and outcome.table is not None:
            write_table(outcome.table, self.config.OUTPUT_PATH)
        return outcome


# Raccourcis synchrones

def run_siso(config: ExperimentConfig) -> pd.DataFrame:
    return asyncio.run(ExperimentRunner(config).run_siso())


def run_miso(config: ExperimentConfig) -> pd.DataFrame:
    return asyncio.run(ExperimentRunner(config).run_miso())


def run_loss(config: ExperimentConfig) -> pd.DataFrame:
    return asyncio.run(ExperimentRunner(config).run_loss())


def run_oracle_check(config: ExperimentConfig, oracle: Optional[OracleConfig] = None) -> OracleReport:
    return asyncio.run(ExperimentRunner(config, oracle).run_oracle_check())


def run_budget(config: ExperimentConfig) -> pd.DataFrame:
    return asyncio.run(ExperimentRunner(config).run_budget())


def run_hbq_curve(config: ExperimentConfig) -> pd.DataFrame:
    return asyncio.run(ExperimentRunner(config).run_hbq_curve())
