import math

import numpy as np
import pytest

from isingfiber.grid import BinaryTable, SuffStats
from isingfiber.inference import (
    EmptyFiberSampleError,
    TestReport,
    collect_trials,
    cv2,
    ess,
    estimate_fiber_size,
    estimate_pvalues,
    report_from_batch,
    run_exact_test,
    standardized_weights,
)
from isingfiber.sampler import Draw, SamplerConfig

TABLE = BinaryTable(1, 1, (1,))


def accept(log_q):
    return Draw.accept(TABLE, log_q)


def reject(stage=0):
    return Draw.reject(stage)


class TestStandardizedWeights:
    def test_equal_weights(self):
        w = standardized_weights([accept(0.0), accept(0.0)])
        assert np.array_equal(w, [0.5, 0.5])

    def test_rejection_gets_zero(self):
        w = standardized_weights([accept(0.0), reject(), accept(0.0)])
        assert np.array_equal(w, [0.5, 0.0, 0.5])

    def test_unequal_weights(self):
        w = standardized_weights([accept(math.log(0.25)), accept(math.log(0.5))])
        assert w[0] == pytest.approx(2 / 3)
        assert w[1] == pytest.approx(1 / 3)

    def test_empty_sample(self):
        with pytest.raises(EmptyFiberSampleError, match="empty fiber sample"):
            standardized_weights([reject(), reject()])

    def test_sum_to_one(self):
        rng = np.random.default_rng(0)
        draws = [accept(float(-rng.exponential(5))) if rng.random() < 0.7 else reject() for _ in range(500)]
        if not any(d.accepted for d in draws):
            draws.append(accept(-1.0))
        assert standardized_weights(draws).sum() == pytest.approx(1.0)


class TestPvalues:
    def test_three_equal_draws(self):
        draws = [accept(0.0)] * 3
        p1, p2 = estimate_pvalues(draws, [0, 1, 2], 1)
        assert p1 == pytest.approx(1 / 3)
        assert p2 == pytest.approx(2 / 3)

    def test_all_ties(self):
        draws = [accept(0.0)] * 4
        p1, p2 = estimate_pvalues(draws, [3, 3, 3, 3], 3)
        assert p1 == 0.0
        assert p2 == pytest.approx(1.0)

    def test_p2_minus_p1_is_tie_mass(self):
        rng = np.random.default_rng(1)
        draws = [accept(float(-rng.exponential())) for _ in range(200)]
        stats = rng.integers(0, 4, 200)
        w = standardized_weights(draws)
        p1, p2 = estimate_pvalues(draws, stats, 2)
        assert p1 <= p2
        assert p2 - p1 == pytest.approx(float(w[stats == 2].sum()), abs=1e-12)

    def test_stat_count_mismatch(self):
        with pytest.raises(ValueError):
            estimate_pvalues([accept(0.0), reject()], [1, 2], 1)


class TestCv2AndEss:
    def test_constant_weights(self):
        assert cv2([accept(math.log(0.5))] * 4) == pytest.approx(0.0)

    def test_one_three_example(self):
        # raw weights (1, 3): mean 2, sample variance 2, cv2 = 0.5
        draws = [accept(0.0), accept(math.log(1 / 3))]
        assert cv2(draws) == pytest.approx(0.5)

    def test_all_zero_error(self):
        with pytest.raises(EmptyFiberSampleError):
            cv2([reject(), reject()])

    def test_ess_examples(self):
        assert ess(5000, 0.0) == 5000.0
        assert ess(1, 3.0) == 0.25
        # published diagnostic row: ESS 235.6 at 5000 trials implies cv2 about 20.22
        implied_cv2 = 5000 / 235.6 - 1
        assert ess(5000, implied_cv2) == pytest.approx(235.6)
        assert implied_cv2 == pytest.approx(20.22, abs=0.01)

    def test_ess_validation(self):
        with pytest.raises(ValueError):
            ess(0, 1.0)
        with pytest.raises(ValueError):
            ess(10, -0.5)


class TestFiberSize:
    def test_constant_quarter_proposal(self):
        draws = [accept(math.log(0.25))] * 8
        est, se = estimate_fiber_size(draws)
        assert est == pytest.approx(4.0)
        assert se == pytest.approx(0.0, abs=1e-12)

    def test_all_rejected(self):
        assert estimate_fiber_size([reject(), reject()]) == (0.0, 0.0)

    def test_mix(self):
        draws = [accept(math.log(0.5)), reject()]
        est, se = estimate_fiber_size(draws)
        assert est == pytest.approx(1.0)  # mean of (2, 0)
        assert se == pytest.approx(np.std([2.0, 0.0], ddof=1) / math.sqrt(2))

    def test_huge_logq_does_not_overflow(self):
        draws = [accept(-800.0), accept(-800.0)]
        est, se = estimate_fiber_size(draws)
        assert est == math.inf
        assert se == 0.0


class TestLogSpaceSafety:
    def test_invariance_to_common_scaling(self):
        # scaling every raw weight by exp(250) leaves the normalized quantities
        # unchanged up to floating rounding of the shifted inputs
        rng = np.random.default_rng(2)
        logqs = [float(-rng.exponential(3)) for _ in range(100)]
        draws = [accept(lq) for lq in logqs]
        shifted = [accept(lq - 250.0) for lq in logqs]
        assert np.allclose(
            standardized_weights(draws), standardized_weights(shifted), rtol=1e-12, atol=0
        )
        assert cv2(draws) == pytest.approx(cv2(shifted), rel=1e-10)
        p = estimate_pvalues(draws, list(range(100)), 50)
        ps = estimate_pvalues(shifted, list(range(100)), 50)
        assert p[0] == pytest.approx(ps[0], rel=1e-10)
        assert p[1] == pytest.approx(ps[1], rel=1e-10)


class TestBatchDriver:
    def test_collect_matches_fiber(self):
        stats = SuffStats(3, 8)
        batch = collect_trials(3, 3, stats, SamplerConfig(), seed=3, n_trials=500)
        assert batch.n_trials == 500
        assert 0 < batch.n_accepted <= 500
        acc = batch.accepted
        assert (batch.stat_u[acc] >= 0).all()
        assert (batch.stage[~acc] >= 0).all()
        assert np.isfinite(batch.log_q[acc]).all()

    def test_worker_count_does_not_change_results(self):
        stats = SuffStats(3, 8)
        one = collect_trials(3, 3, stats, SamplerConfig(), seed=5, n_trials=300, workers=1)
        three = collect_trials(3, 3, stats, SamplerConfig(), seed=5, n_trials=300, workers=3)
        assert np.array_equal(one.accepted, three.accepted)
        assert np.array_equal(one.log_q[one.accepted], three.log_q[three.accepted])
        assert np.array_equal(one.stat_u, three.stat_u)
        assert np.array_equal(one.stat_uprime, three.stat_uprime)
        assert np.array_equal(one.stage, three.stage)

    def test_report_invariants(self):
        stats = SuffStats(3, 8)
        batch = collect_trials(3, 3, stats, SamplerConfig(), seed=7, n_trials=800)
        report = report_from_batch(batch, "u", 1)
        assert report.n_trials == 800
        assert report.delta == report.n_accepted / 800
        assert report.ess == pytest.approx(800 / (1 + report.cv2))
        assert 0.0 <= report.p1 <= report.p2 <= 1.0

    def test_empty_fiber_raises(self):
        batch = collect_trials(2, 2, SuffStats(1, 3), SamplerConfig(), seed=1, n_trials=50)
        assert batch.n_accepted == 0
        with pytest.raises(EmptyFiberSampleError):
            report_from_batch(batch, "u", 0)

    def test_fiber_size_within_three_se(self):
        # oracle count of the 3x3 single-corner fiber is 4
        stats = SuffStats(1, 2)
        batch = collect_trials(3, 3, stats, SamplerConfig(), seed=11, n_trials=5000)
        est, se = (
            report_from_batch(batch, "u", 0).fiber_size_estimate,
            report_from_batch(batch, "u", 0).fiber_size_se,
        )
        assert abs(est - 4.0) <= 3 * max(se, 1e-12)

    def test_run_exact_test_overrides(self):
        table = BinaryTable(2, 2, (1, 0, 0, 0))
        with pytest.raises(EmptyFiberSampleError):
            run_exact_test(table, n_samples=50, seed=0, t1_override=1, t2_override=3)

    def test_run_exact_test_report(self):
        table = BinaryTable(2, 2, (1, 0, 0, 0))
        report = run_exact_test(table, stat_name="u", n_samples=400, seed=2)
        assert report.delta == 1.0  # every path through this fiber is completable
        assert report.p1 == 0.0
        assert report.p2 == pytest.approx(1.0)
        assert report.observed_stat == 0

    def test_json_payload_fields(self):
        report = TestReport(10, 8, 0.8, 0.1, 0.2, 0.5, 10 / 1.5, 4.0, 0.3, 1, "u")
        payload = report.json_payload(seed=9, config={"rows": 2})
        assert payload["schema"] == 1
        assert payload["seed"] == 9
        assert set(payload) == {
            "schema",
            "n_trials",
            "n_accepted",
            "delta",
            "p1",
            "p2",
            "cv2",
            "ess",
            "fiber_size_estimate",
            "fiber_size_se",
            "observed_stat",
            "stat_name",
            "seed",
            "config",
        }
