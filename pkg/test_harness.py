"""Tests du harness : tables SISO/MISO/perte, oracle, budget, CSV et déterminisme."""

import asyncio
import math

import numpy as np
import pandas as pd
import pytest

from channel import RngStream, sample_channel
from config import ExperimentConfig, ExperimentMode, OracleConfig
from harness import (
    CSV_COLUMNS,
    ExperimentRunner,
    ResultRow,
    horizontal_gap_db,
    miso_chunk,
    run_budget,
    run_hbq_curve,
    run_loss,
    run_miso,
    run_oracle_check,
    run_siso,
    siso_chunk,
    summarize,
    write_table,
)
from miso_limfb import no_csit_features
from siso_limfb import capacity_siso_fb, capacity_siso_perfect

SEED = 2016
ACCEPTANCE_TRIALS = 10_000
# Toutes les courbes saturent à 2 bits à fort SNR
SATURATION_TOL = 1e-7
HEADER = "snr_db,scheme,mean_capacity_bits,std_err,mean_cos2beta,mean_abs_theta,n_trials"


def make_config(mode: ExperimentMode, **overrides) -> ExperimentConfig:
    base = dict(TRIALS=200, SEED=SEED, SNR_START_DB=-10.0, SNR_STEP_DB=2.0, SNR_STOP_DB=30.0,
                WORKERS=1, CHUNK_TRIALS=500)
    base.update(overrides)
    return ExperimentConfig.from_defaults(mode, **base).validate()


def curve(table: pd.DataFrame, scheme: str) -> pd.DataFrame:
    return table[table["scheme"] == scheme].sort_values("snr_db").reset_index(drop=True)


def combined_se(a: pd.DataFrame, b: pd.DataFrame) -> np.ndarray:
    return np.sqrt(a["std_err"].to_numpy() ** 2 + b["std_err"].to_numpy() ** 2)


class TestHorizontalGap:
    """Écart horizontal entre courbes."""

    def test_shifted_line(self) -> None:
        snr = np.arange(0.0, 11.0)
        assert horizontal_gap_db(snr, 0.1 * snr, 0.1 * (snr - 2), 0.5) == pytest.approx(2.0)

    def test_interpolates_between_points(self) -> None:
        snr = np.array([0.0, 10.0])
        assert horizontal_gap_db(snr, np.array([0.0, 1.0]), np.array([0.0, 0.5]), 0.25) == pytest.approx(2.5)

    def test_level_never_reached(self) -> None:
        snr = np.arange(5.0)
        assert math.isnan(horizontal_gap_db(snr, snr, np.zeros(5), 1.0))


class TestSummarize:
    """Moyenne et erreur standard."""

    def test_mean_and_standard_error(self) -> None:
        values = np.array([[0.0, 1.0, 2.0, 3.0]])
        row = summarize(np.array([5.0]), "x", values)[0]
        assert row.mean_capacity_bits == pytest.approx(1.5)
        assert row.std_err == pytest.approx(np.std([0, 1, 2, 3], ddof=1) / 2)
        assert row.n_trials == 4
        assert math.isnan(row.mean_cos2beta)

    def test_single_trial_has_zero_error(self) -> None:
        row = summarize(np.array([0.0]), "x", np.array([[1.2]]), theta=np.array([-0.1]))[0]
        assert row.std_err == 0.0
        assert row.mean_abs_theta == pytest.approx(0.1)


@pytest.mark.slow
class TestSisoExperiment:
    """Capacité SISO moyenne : CSIT parfaite, retour B = 1, 2, sans CSIT."""

    @pytest.fixture(scope="class")
    def table(self) -> pd.DataFrame:
        return run_siso(make_config(ExperimentMode.SISO, TRIALS=ACCEPTANCE_TRIALS, SNR_STEP_DB=0.5))

    def test_schemes_and_columns(self, table: pd.DataFrame) -> None:
        assert list(table.columns) == CSV_COLUMNS
        assert set(table["scheme"]) == {"perfect_csit", "fb_B=1", "fb_B=2", "no_csit"}
        assert (table["n_trials"] == ACCEPTANCE_TRIALS).all()
        assert len(table) == 4 * 81

    def test_capacities_in_range(self, table: pd.DataFrame) -> None:
        assert table["mean_capacity_bits"].between(0.0, 2.0).all()
        assert (table["std_err"] >= 0).all()

    def test_two_bits_close_to_perfect(self, table: pd.DataFrame) -> None:
        gap = curve(table, "perfect_csit")["mean_capacity_bits"] - curve(table, "fb_B=2")["mean_capacity_bits"]
        assert (gap >= -1e-12).all()
        assert gap.max() <= 0.05

    def test_one_bit_loses_less_than_one_db(self, table: pd.DataFrame) -> None:
        perfect, one_bit = curve(table, "perfect_csit"), curve(table, "fb_B=1")
        gap = horizontal_gap_db(perfect["snr_db"], perfect["mean_capacity_bits"], one_bit["mean_capacity_bits"], 1.0)
        assert 0.0 <= gap < 1.0

    def test_no_csit_below_one_bit(self, table: pd.DataFrame) -> None:
        one_bit, plain = curve(table, "fb_B=1"), curve(table, "no_csit")
        high = one_bit["snr_db"] >= 0
        assert (plain["mean_capacity_bits"][high] < one_bit["mean_capacity_bits"][high]).all()

    def test_theta_statistics(self, table: pd.DataFrame) -> None:
        # |θ| uniforme sur [0, π/2^{B+2}] : moyenne π/2^{B+3}
        for bits in (1, 2):
            mean_theta = curve(table, f"fb_B={bits}")["mean_abs_theta"].iloc[0]
            assert mean_theta == pytest.approx(math.pi / 2 ** (bits + 3), rel=0.02)
        assert curve(table, "perfect_csit")["mean_abs_theta"].isna().all()


@pytest.mark.slow
class TestMisoExperiment:
    """Nt = 4, B = 4 : répartitions (3,1), (2,2), (1,3)."""

    @pytest.fixture(scope="class")
    def table(self) -> pd.DataFrame:
        return run_miso(make_config(ExperimentMode.MISO, TRIALS=ACCEPTANCE_TRIALS, SNR_STEP_DB=1.0))

    def test_schemes(self, table: pd.DataFrame) -> None:
        assert set(table["scheme"]) == {
            "perfect_csit", "fb_B1=3_B2=1", "fb_B1=2_B2=2", "fb_B1=1_B2=3", "no_csit",
        }

    def test_direction_heavy_split_is_best(self, table: pd.DataFrame) -> None:
        best = curve(table, "fb_B1=3_B2=1")
        high = best["snr_db"] >= 0
        for other in ("fb_B1=2_B2=2", "fb_B1=1_B2=3"):
            lead = best["mean_capacity_bits"] - curve(table, other)["mean_capacity_bits"]
            assert (lead[high] > -SATURATION_TOL).all()

    def test_power_loss_around_three_db(self, table: pd.DataFrame) -> None:
        perfect, best = curve(table, "perfect_csit"), curve(table, "fb_B1=3_B2=1")
        gap = horizontal_gap_db(perfect["snr_db"], perfect["mean_capacity_bits"], best["mean_capacity_bits"], 1.0)
        assert 2.5 <= gap <= 3.5
        assert gap <= 6.02

    def test_alignment_statistics(self, table: pd.DataFrame) -> None:
        assert curve(table, "fb_B1=3_B2=1")["mean_cos2beta"].iloc[0] == pytest.approx(0.565, abs=0.01)
        assert curve(table, "fb_B1=1_B2=3")["mean_cos2beta"].iloc[0] == pytest.approx(0.357, abs=0.01)
        assert curve(table, "no_csit")["mean_cos2beta"].iloc[0] == pytest.approx(0.25, abs=0.01)

    def test_no_csit_lowest(self, table: pd.DataFrame) -> None:
        plain, fb = curve(table, "no_csit"), curve(table, "fb_B1=1_B2=3")
        high = plain["snr_db"] >= 0
        assert (plain["mean_capacity_bits"][high] < fb["mean_capacity_bits"][high]).all()


@pytest.mark.slow
class TestSixteenAntennas:
    """Nt = 16, B = 16 : (15,1) mène à bas SNR, (12,4) le dépasse dès -2 dB."""

    @pytest.fixture(scope="class")
    def table(self) -> pd.DataFrame:
        cfg = make_config(ExperimentMode.MISO, NT=16, TRIALS=1000, SNR_START_DB=-10.0, SNR_STEP_DB=2.0,
                          SNR_STOP_DB=30.0, SPLITS=[(15, 1), (12, 4), (8, 8)])
        return run_miso(cfg)

    def test_alignment_statistics(self, table: pd.DataFrame) -> None:
        assert curve(table, "fb_B1=15_B2=1")["mean_cos2beta"].iloc[0] == pytest.approx(0.518, abs=0.015)
        assert curve(table, "fb_B1=12_B2=4")["mean_cos2beta"].iloc[0] == pytest.approx(0.446, abs=0.015)

    def test_direction_bits_win_at_low_snr(self, table: pd.DataFrame) -> None:
        best = curve(table, "fb_B1=15_B2=1")
        low = best["snr_db"] <= -4
        for other in ("fb_B1=12_B2=4", "fb_B1=8_B2=8"):
            lead = best["mean_capacity_bits"] - curve(table, other)["mean_capacity_bits"]
            assert (lead[low] > 0).all()

    def test_phase_bits_take_over_from_minus_two_db(self, table: pd.DataFrame) -> None:
        heavy, balanced = curve(table, "fb_B1=15_B2=1"), curve(table, "fb_B1=12_B2=4")
        mid = heavy["snr_db"].between(-2, 2)
        assert mid.sum() == 3
        lead = balanced["mean_capacity_bits"] - heavy["mean_capacity_bits"]
        assert (lead[mid] > 0).all()


class TestChunkWorkers:
    """Fonctions de bloc appelées par le pool de processus."""

    def test_perfect_dominates_each_realization(self) -> None:
        features = siso_chunk(SEED, [1, 2], 0, 300)
        pts = np.array([[0.1], [3.0], [100.0]])
        perfect = capacity_siso_perfect(pts, features["gain"])
        for k in range(2):
            assert np.all(capacity_siso_fb(pts, features["gain"], features["theta"][k]) <= perfect + 1e-12)

    def test_no_csit_features_match_library(self) -> None:
        features = miso_chunk(SEED, 4, [(3, 1)], False, 10, 40)
        for i, t in enumerate(range(10, 40)):
            cos2, theta = no_csit_features(sample_channel(RngStream(SEED, t), 4))
            assert features["plain_cos2"][i] == cos2
            assert features["plain_theta"][i] == theta

    def test_fixed_codebook_mode(self) -> None:
        features = miso_chunk(SEED, 4, [(3, 1)], True, 0, 50)
        again = miso_chunk(SEED, 4, [(3, 1)], True, 25, 50)
        np.testing.assert_array_equal(features["cos2"][:, 25:], again["cos2"])
        table = run_miso(make_config(ExperimentMode.MISO, TRIALS=100, FIXED_CODEBOOK=True, SPLITS=[(3, 1)]))
        assert table["mean_capacity_bits"].between(0.0, 2.0).all()


@pytest.mark.slow
class TestLossExperiment:
    """Perte de capacité C_MISO - C_MISO^fb, Nt = 4."""

    @pytest.fixture(scope="class")
    def table(self) -> pd.DataFrame:
        cfg = make_config(ExperimentMode.LOSS, TRIALS=ACCEPTANCE_TRIALS, SNR_START_DB=-20.0, SNR_STEP_DB=1.0,
                          SPLITS=[(1, 1), (2, 1), (1, 2), (3, 1)])
        return run_loss(cfg)

    def test_schemes(self, table: pd.DataFrame) -> None:
        schemes = set(table["scheme"])
        assert "loss_B1=1_B2=1" in schemes and "loss_ub_B1=1_B2=1" in schemes
        assert len(schemes) == 8

    def test_small_loss_above_eleven_db(self, table: pd.DataFrame) -> None:
        loss = curve(table, "loss_B1=1_B2=1")
        assert (loss["mean_capacity_bits"][loss["snr_db"] >= 11] < 0.2).all()

    def test_small_loss_at_low_snr(self, table: pd.DataFrame) -> None:
        loss = curve(table, "loss_B1=1_B2=1")
        assert loss["mean_capacity_bits"].iloc[0] < 0.1

    def test_upper_bound_dominates(self, table: pd.DataFrame) -> None:
        for b1, b2 in [(1, 1), (2, 1), (1, 2), (3, 1)]:
            loss = curve(table, f"loss_B1={b1}_B2={b2}")["mean_capacity_bits"]
            bound = curve(table, f"loss_ub_B1={b1}_B2={b2}")["mean_capacity_bits"]
            assert (loss <= bound + 1e-12).all()

    def test_loss_decreases_with_bits(self, table: pd.DataFrame) -> None:
        base = curve(table, "loss_B1=1_B2=1")
        for better in ("loss_B1=2_B2=1", "loss_B1=1_B2=2"):
            rival = curve(table, better)
            slack = 3 * combined_se(base, rival)
            assert (rival["mean_capacity_bits"] <= base["mean_capacity_bits"] + slack).all()


class TestOracleCheck:
    """Formes closes contre DMC et Blahut-Arimoto."""

    def test_small_grid_passes(self) -> None:
        oracle = OracleConfig(A_SQ_POINTS=6, THETA_POINTS=5, RANDOM_TUPLES=50)
        report = run_oracle_check(make_config(ExperimentMode.ORACLE_CHECK), oracle)
        assert report.passed, report.failures
        assert report.checked == 6 * 5 + 50
        assert len(report.details) == report.checked

    def test_default_grid_passes(self) -> None:
        report = run_oracle_check(make_config(ExperimentMode.ORACLE_CHECK))
        assert report.passed, report.failures[:5]
        assert report.max_mi_deviation < 1e-9
        assert report.max_ba_excess < 1e-6
        assert report.max_uniform_tv < 1e-6

    def test_zero_power_row(self) -> None:
        oracle = OracleConfig(A_SQ_POINTS=2, THETA_POINTS=3, RANDOM_TUPLES=0)
        details = run_oracle_check(make_config(ExperimentMode.ORACLE_CHECK), oracle).details
        zero = details[details["a_sq"] == 0.0]
        assert len(zero) == 3
        assert (zero[["closed_form", "mutual_information", "ba_capacity"]].abs() < 1e-15).all().all()

    def test_tolerance_violation_reported(self) -> None:
        oracle = OracleConfig(A_SQ_POINTS=3, THETA_POINTS=3, RANDOM_TUPLES=0, MI_TOLERANCE=-1.0)
        report = run_oracle_check(make_config(ExperimentMode.ORACLE_CHECK), oracle)
        assert not report.passed
        assert len(report.failures) >= 9


class TestBudgetAndHbqCurve:
    """Budget minimal de bits et tabulation de hbq."""

    @pytest.fixture(scope="class")
    def budget(self) -> pd.DataFrame:
        return run_budget(make_config(ExperimentMode.BUDGET, SNR_START_DB=0.0, SNR_STEP_DB=1.0))

    def test_unreachable_at_zero_db(self, budget: pd.DataFrame) -> None:
        first = budget.iloc[0]
        assert first["snr_db"] == 0.0
        assert pd.isna(first["min_total_bits"])

    def test_two_bits_from_eleven_db(self, budget: pd.DataFrame) -> None:
        assert (budget.loc[budget["snr_db"] >= 11, "min_total_bits"] == 2).all()
        assert budget.loc[budget["snr_db"] == 10, "min_total_bits"].iloc[0] > 2

    def test_bits_non_increasing(self, budget: pd.DataFrame) -> None:
        totals = budget["min_total_bits"].dropna().to_numpy(dtype=int)
        assert np.all(np.diff(totals) <= 0)

    def test_budget_csv_leaves_missing_cells_empty(self, budget: pd.DataFrame, tmp_path) -> None:
        path = tmp_path / "budget.csv"
        write_table(budget, str(path))
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "snr_db,min_total_bits,b1,b2,lhs,rhs,delta"
        assert lines[1].startswith("0,,,,,,")

    def test_hbq_curve(self) -> None:
        table = run_hbq_curve(make_config(ExperimentMode.HBQ_CURVE, SNR_START_DB=0.0, SNR_STEP_DB=0.5))
        assert list(table.columns) == ["x", "hbq", "one_minus_hbq"]
        assert table["hbq"].iloc[0] == pytest.approx(1.0)
        assert np.all(np.diff(table["hbq"]) <= 0)
        np.testing.assert_allclose(table["hbq"] + table["one_minus_hbq"], 1.0)


class TestCsvAndDeterminism:
    """Format CSV et reproductibilité octet pour octet."""

    def test_header_and_format(self, tmp_path) -> None:
        cfg = make_config(ExperimentMode.SISO, TRIALS=50, SNR_STEP_DB=10.0, OUTPUT_PATH=str(tmp_path / "out" / "s.csv"))
        asyncio.run(ExperimentRunner(cfg).run())
        raw = (tmp_path / "out" / "s.csv").read_bytes()
        assert b"\r" not in raw
        lines = raw.decode("utf-8").splitlines()
        assert lines[0] == HEADER
        perfect = [line for line in lines if ",perfect_csit," in line]
        assert perfect[0].startswith("-10,perfect_csit,")
        assert perfect[0].endswith(",,,50")

    def test_same_seed_same_bytes(self, tmp_path) -> None:
        paths = []
        for name in ("a.csv", "b.csv"):
            cfg = make_config(ExperimentMode.SISO, TRIALS=100)
            path = tmp_path / name
            write_table(run_siso(cfg), str(path))
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_chunking_does_not_change_results(self) -> None:
        one = run_miso(make_config(ExperimentMode.MISO, TRIALS=120, CHUNK_TRIALS=500))
        many = run_miso(make_config(ExperimentMode.MISO, TRIALS=120, CHUNK_TRIALS=7))
        pd.testing.assert_frame_equal(one, many)

    def test_workers_do_not_change_bytes(self, tmp_path) -> None:
        serial, parallel = tmp_path / "serial.csv", tmp_path / "parallel.csv"
        write_table(run_miso(make_config(ExperimentMode.MISO, TRIALS=120, CHUNK_TRIALS=40)), str(serial))
        write_table(run_miso(make_config(ExperimentMode.MISO, TRIALS=120, CHUNK_TRIALS=40, WORKERS=2)), str(parallel))
        assert serial.read_bytes() == parallel.read_bytes()

    def test_different_seed_changes_results(self) -> None:
        a = run_siso(make_config(ExperimentMode.SISO, TRIALS=50))
        b = run_siso(make_config(ExperimentMode.SISO, TRIALS=50, SEED=SEED + 1))
        assert not a["mean_capacity_bits"].equals(b["mean_capacity_bits"])

    def test_result_row_defaults(self) -> None:
        row = ResultRow(0.0, "perfect_csit", 1.0, 0.0)
        assert math.isnan(row.mean_cos2beta) and math.isnan(row.mean_abs_theta)
