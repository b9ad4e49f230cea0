import json
import math

import numpy as np
import pytest

from remest.analytics import cost_closed_form, optimal_threshold
from remest.distributions import RngHandle
from remest.simulator import (
    MonteCarloEstimate,
    estimate_conditional_stats,
    estimate_cost,
    run_episode,
    stationarity_check,
)
from remest.strategies import (
    EPSILON,
    SwitchedThresholdStrategy,
    SystemParams,
    ThresholdAffineStrategy,
    always_transmit,
    never_transmit,
    noise_blind_decoder,
)

REF = SystemParams(lam=1.0, k=2.0, p_t=1.0, c=1.0)
BETA_STAR = optimal_threshold(REF)
OPTIMAL = ThresholdAffineStrategy(REF, BETA_STAR)


class TestMonteCarloEstimate:
    def test_from_samples(self):
        est = MonteCarloEstimate.from_samples([1.0, 2.0, 3.0, 4.0])
        assert est.mean == 2.5
        assert est.n == 4
        assert est.std_error == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)

    def test_requires_two_samples(self):
        with pytest.raises(ValueError):
            MonteCarloEstimate.from_samples([1.0])

    def test_z_and_coverage(self):
        est = MonteCarloEstimate(mean=1.0, std_error=0.1, n=100)
        assert est.z_score(0.8) == pytest.approx(2.0)
        assert est.covers(0.8, sigmas=4.0)
        assert not est.covers(0.5, sigmas=4.0)

    def test_degenerate_std_error(self):
        est = MonteCarloEstimate(mean=1.0, std_error=0.0, n=10)
        assert est.z_score(1.0) == 0.0
        assert est.z_score(0.9) == float("inf")
        assert est.covers(1.0)
        assert not est.covers(0.9)


class TestRunEpisode:
    def test_bitwise_reproducibility(self):
        a = run_episode(REF, OPTIMAL, 5_000, RngHandle(42, 7))
        b = run_episode(REF, OPTIMAL, 5_000, RngHandle(42, 7))
        for field in ("x", "u", "y", "v", "y_tilde", "s", "x_hat", "stage_cost"):
            assert np.array_equal(getattr(a, field), getattr(b, field), equal_nan=True), field
        assert a.total_cost == b.total_cost

    def test_protocol_invariant(self):
        tr = run_episode(REF, OPTIMAL, 10_000, RngHandle(1))
        silent = ~tr.u
        assert np.isnan(tr.y[silent]).all()
        assert np.isnan(tr.y_tilde[silent]).all()
        assert (tr.s[silent] == 0).all()
        assert np.isfinite(tr.y[tr.u]).all()
        assert np.isfinite(tr.y_tilde[tr.u]).all()
        assert np.isin(tr.s[tr.u], (-1, 1)).all()
        # channel additivity where transmitting
        np.testing.assert_allclose(tr.y_tilde[tr.u], tr.y[tr.u] + tr.v[tr.u], rtol=1e-15)

    def test_stage_view_maps_epsilon(self):
        tr = run_episode(REF, OPTIMAL, 200, RngHandle(2))
        saw_silent = saw_tx = False
        for stage in tr.stages:
            if stage.u == 0:
                saw_silent = True
                assert stage.y is EPSILON
                assert stage.y_tilde is EPSILON
                assert stage.s is EPSILON
                assert stage.x_hat == 0.0
            else:
                saw_tx = True
                assert stage.s in (1, -1)
                assert stage.y_tilde == pytest.approx(stage.y + stage.v)
            assert stage.stage_cost == pytest.approx(
                REF.c * stage.u + (stage.x - stage.x_hat) ** 2
            )
        assert saw_silent and saw_tx
        assert len(tr.stages) == 200
        assert tr.stages[-1] == tr.stage(199)
        with pytest.raises(IndexError):
            tr.stage(200)

    def test_cost_decomposition(self):
        tr = run_episode(REF, OPTIMAL, 50_000, RngHandle(3))
        err_sq = (tr.x - tr.x_hat) ** 2
        expected = REF.c * tr.n_transmissions + err_sq.sum()
        assert tr.total_cost == pytest.approx(expected, rel=1e-12)
        assert tr.total_cost == pytest.approx(tr.stage_cost.sum(), rel=0.0)

    def test_never_transmit_episode(self):
        tr = run_episode(REF, never_transmit(REF), 5, RngHandle(4))
        assert not tr.u.any()
        assert (tr.x_hat == 0.0).all()
        assert tr.total_cost == pytest.approx((tr.x**2).sum(), rel=1e-15)
        assert np.isfinite(tr.v).all()  # noise still drawn and recorded

    def test_always_transmit_fraction_is_one(self):
        tr = run_episode(REF, always_transmit(REF), 1_000, RngHandle(5))
        assert tr.n_transmissions == 1_000

    def test_common_random_numbers_across_policies(self):
        a = run_episode(REF, OPTIMAL, 1_000, RngHandle(6, 3))
        b = run_episode(REF, ThresholdAffineStrategy(REF, 2.0), 1_000, RngHandle(6, 3))
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.v, b.v)

    def test_rejects_bad_horizon(self):
        with pytest.raises(ValueError):
            run_episode(REF, OPTIMAL, 0, RngHandle(0))


class TestEstimateCost:
    def test_matches_closed_form_at_optimum(self):
        est = estimate_cost(REF, OPTIMAL, 10_000, 100, RngHandle(2025, 0))
        assert est.n == 100
        assert est.covers(cost_closed_form(REF, BETA_STAR).total, sigmas=4.0)

    def test_never_transmit_matches_second_moment(self):
        est = estimate_cost(REF, never_transmit(REF), 10_000, 100, RngHandle(2025, 1))
        assert est.covers(2.0 / REF.lam**2, sigmas=4.0)

    def test_optimum_beats_neighbors_under_crn(self):
        handle = lambda: RngHandle(2025, 2)
        at_star = estimate_cost(REF, OPTIMAL, 2_000, 50, handle())
        below = estimate_cost(REF, ThresholdAffineStrategy(REF, BETA_STAR - 0.3), 2_000, 50, handle())
        above = estimate_cost(REF, ThresholdAffineStrategy(REF, BETA_STAR + 0.3), 2_000, 50, handle())
        assert at_star.mean < below.mean
        assert at_star.mean < above.mean

    def test_parallel_equals_serial(self):
        serial = estimate_cost(REF, OPTIMAL, 1_000, 40, RngHandle(2025, 3), jobs=1)
        threaded = estimate_cost(REF, OPTIMAL, 1_000, 40, RngHandle(2025, 3), jobs=4)
        assert serial == threaded

    def test_requires_two_episodes(self):
        with pytest.raises(ValueError):
            estimate_cost(REF, OPTIMAL, 100, 1, RngHandle(0))

    def test_sweep_of_betas_against_closed_form(self):
        for i, beta in enumerate((0.2, 0.8, 1.5, 2.5)):
            strat = ThresholdAffineStrategy(REF, beta)
            est = estimate_cost(REF, strat, 5_000, 60, RngHandle(2025, 10 + i))
            assert est.covers(cost_closed_form(REF, beta).total, sigmas=4.0), beta


class TestConditionalStats:
    def test_reference_targets(self):
        stats = estimate_conditional_stats(REF, OPTIMAL, 200_000, RngHandle(2025, 4))
        assert stats.mse_tx.covers(REF.m, sigmas=4.0)
        assert stats.mse_tx_pos.covers(REF.m, sigmas=4.0)
        assert stats.mse_tx_neg.covers(REF.m, sigmas=4.0)
        assert stats.power.covers(REF.p_t, sigmas=4.0)
        assert stats.tx_frequency.covers(math.exp(-REF.lam * BETA_STAR), sigmas=4.0)
        assert stats.bias_tx.covers(0.0, sigmas=4.0)
        assert stats.n_transmissions >= 100

    def test_noise_blind_does_worse(self):
        blind = noise_blind_decoder(REF, BETA_STAR)
        stats = estimate_conditional_stats(REF, blind, 200_000, RngHandle(2025, 5))
        gap = stats.mse_tx.mean - REF.m
        assert gap > 4.0 * stats.mse_tx.std_error

    def test_insufficient_transmissions(self):
        sparse = ThresholdAffineStrategy(REF, 25.0)
        with pytest.raises(ValueError, match="transmissions"):
            estimate_conditional_stats(REF, sparse, 1_000, RngHandle(2025, 6))

    def test_json_payload(self):
        stats = estimate_conditional_stats(REF, OPTIMAL, 20_000, RngHandle(2025, 7))
        payload = stats.to_json_dict()
        assert set(payload) == {
            "mse_tx", "mse_tx_pos", "mse_tx_neg", "power",
            "tx_frequency", "bias_tx", "n_transmissions",
        }
        assert payload["power"]["n"] == stats.n_transmissions


class TestStationarity:
    def test_stationary_strategy_passes(self):
        report = stationarity_check(REF, OPTIMAL, 10, 20_000, RngHandle(2025, 8))
        assert report.passed
        assert report.max_pairwise_z < 4.0
        assert len(report.stage_means) == 10

    def test_single_stage_trivially_passes(self):
        report = stationarity_check(REF, OPTIMAL, 1, 1_000, RngHandle(2025, 9))
        assert report.passed
        assert report.max_pairwise_z == 0.0

    def test_nonstationary_counterexample_fails(self):
        switched = SwitchedThresholdStrategy(REF, BETA_STAR, switch_stage=5)
        report = stationarity_check(REF, switched, 10, 20_000, RngHandle(2025, 8))
        assert not report.passed
        assert report.max_pairwise_z > 4.0

    def test_json_payload(self):
        report = stationarity_check(REF, OPTIMAL, 3, 500, RngHandle(2025, 11))
        payload = report.to_json_dict()
        assert payload["passed"] == report.passed
        assert len(payload["stage_means"]) == 3


class TestTraceExport:
    def test_jsonl_roundtrip(self, tmp_path):
        tr = run_episode(REF, OPTIMAL, 50, RngHandle(2025, 12))
        path = tmp_path / "trace.jsonl"
        tr.write_jsonl(path)
        lines = path.read_text().splitlines()
        assert len(lines) == 50
        for i, line in enumerate(lines):
            record = json.loads(line)
            assert record["t"] == i + 1
            stage = tr.stage(i)
            assert record["x"] == stage.x
            if stage.u == 0:
                assert record["y"] is None
                assert record["s"] is None
            else:
                assert record["y"] == stage.y
                assert record["s"] == stage.s

    def test_jsonl_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run_episode(REF, OPTIMAL, 100, RngHandle(7, 7)).write_jsonl(a)
        run_episode(REF, OPTIMAL, 100, RngHandle(7, 7)).write_jsonl(b)
        assert a.read_bytes() == b.read_bytes()
