from dataclasses import replace

import numpy as np
import pytest

from mmrelay import dense
from mmrelay.analytics import lemma1_se, lemma1_terms
from mmrelay.model import LargeScaleFading, SystemConfig, draw_channels, draw_distortions, validate_config
from mmrelay.montecarlo import (
    IDENTITIES,
    EXPECTATIONS,
    estimate_jensen_bound,
    estimate_se,
    identity_residuals,
    jensen_bound_from_sinr,
    lln_convergence_suite,
    loglog_slope,
    run_trial,
    simulate,
    spectral_efficiency,
    trial_rng,
)
from mmrelay.mr import build_gram_cache


def cfg(n, kappa=0.0, k=10, **kw):
    return validate_config(SystemConfig(n, k, **kw)).with_kappa(kappa)


def test_run_trial_is_deterministic(unit_fading):
    a = run_trial(cfg(64, 0.1), unit_fading, 17)
    b = run_trial(cfg(64, 0.1), unit_fading, 17)
    for name in ("signal", "interference", "relay_noise", "rx_distortion", "tx_distortion"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.rho2 == b.rho2


@pytest.mark.parametrize("seed", range(5))
def test_run_trial_matches_dense_oracle(seed):
    fading = LargeScaleFading([0.7, 1.4], [1.1, 0.9])
    c = cfg(8, 0.15, k=2)
    got = run_trial(c, fading, np.random.default_rng(seed))
    rng = np.random.default_rng(seed)
    channel = draw_channels(c, fading, rng)
    distortion = draw_distortions(channel, c, rng)
    want = dense.trial_terms(channel, distortion, c)
    np.testing.assert_allclose(got.sinr, want["sinr"], rtol=1e-10)
    np.testing.assert_allclose(got.rho2, want["rho2"], rtol=1e-10)


def test_trial_streams_are_distinct():
    a = trial_rng(5, 0).standard_normal(4)
    b = trial_rng(5, 1).standard_normal(4)
    c = trial_rng(6, 0).standard_normal(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(a, trial_rng(5, 0).standard_normal(4))


def test_high_power_sinr_is_interference_limited(unit_fading):
    c = cfg(1024, 0.0, p_user=1e6, p_relay=1e6)
    batch = simulate(c, unit_fading, 200, master_seed=3)
    c_i = lemma1_terms(unit_fading, c, 0).c_i
    harmonic = 1.0 / np.mean(1.0 / batch.sinr, axis=0)
    np.testing.assert_allclose(harmonic, 1024 / c_i, rtol=0.10)


class TestEstimateSE:
    def test_thread_count_does_not_change_result(self, unit_fading):
        c = cfg(64, 0.1)
        one = estimate_se(c, unit_fading, 300, master_seed=9, threads=1)
        eight = estimate_se(c, unit_fading, 300, master_seed=9, threads=8)
        for name in ("se_A", "se_B", "stderr_A", "stderr_B", "jensen_A", "jensen_B"):
            assert np.array_equal(getattr(one, name), getattr(eight, name))
        assert one.sum_se == eight.sum_se and one.sum_se_stderr == eight.sum_se_stderr

    def test_fields_are_consistent(self, unit_fading):
        est = estimate_se(cfg(32, 0.05), unit_fading, 100, master_seed=1)
        assert est.se_A.shape == est.se_B.shape == (10,)
        assert np.all(est.stderr_A >= 0) and np.all(est.stderr_B >= 0)
        assert est.sum_se == pytest.approx(est.se_A.sum() + est.se_B.sum(), rel=1e-12)
        assert est.n_trials == 100 and est.master_seed == 1

    def test_requires_two_trials(self, unit_fading):
        with pytest.raises(ValueError):
            estimate_se(cfg(32), unit_fading, 1, master_seed=0)
        with pytest.raises(ValueError):
            estimate_jensen_bound(cfg(32), unit_fading, 1, master_seed=0)

    def test_stderr_shrinks_like_root_n(self, unit_fading):
        c = cfg(64, 0.1)
        small = estimate_se(c, unit_fading, 1000, master_seed=21)
        large = estimate_se(c, unit_fading, 2000, master_seed=22)
        ratio = large.mean_se_stderr / small.mean_se_stderr
        assert 0.6 <= ratio <= 0.82

    def test_ab_symmetry_under_swap(self):
        rng = np.random.default_rng(4)
        fading = LargeScaleFading(rng.uniform(0.6, 1.6, 4), rng.uniform(0.6, 1.6, 4))
        c = cfg(64, 0.1, k=4, noise_a=[1.0, 2.0, 0.5, 1.0], noise_b=[1.5, 1.0, 1.0, 0.7])
        swapped = replace(c, noise_a=c.noise_b, noise_b=c.noise_a)
        a = estimate_se(c, fading, 1500, master_seed=30)
        b = estimate_se(swapped, fading.swapped(), 1500, master_seed=31)
        tol = 4 * np.hypot(a.stderr_A, b.stderr_B)
        assert np.all(np.abs(a.se_A - b.se_B) < tol)
        tol = 4 * np.hypot(a.stderr_B, b.stderr_A)
        assert np.all(np.abs(a.se_B - b.se_A) < tol)

    @pytest.mark.slow
    def test_gap_to_closed_form_decays(self, unit_fading):
        gaps = {}
        for n in (64, 1024):
            c = cfg(n, 0.1)
            est = estimate_se(c, unit_fading, 1500, master_seed=n)
            lem = lemma1_se(unit_fading, c)[0]
            gaps[n] = (abs(est.mean_se - lem) / lem, est.mean_se_stderr / lem)
        assert gaps[1024][0] + 3 * gaps[1024][1] < gaps[64][0] - 3 * gaps[64][1]


class TestJensen:
    def test_constant_sinr_is_equality_case(self):
        # a power of two keeps 1/mean(1/x) free of rounding
        sinr = np.full((50, 6), 4.0)
        np.testing.assert_array_equal(jensen_bound_from_sinr(sinr), spectral_efficiency(sinr[0]))

    def test_never_exceeds_direct_estimate(self, unit_fading):
        for n, kappa in [(32, 0.0), (64, 0.2)]:
            c = cfg(n, kappa)
            est = estimate_se(c, unit_fading, 400, master_seed=n)
            assert np.all(est.jensen_A <= est.se_A + 3 * est.stderr_A)
            assert np.all(est.jensen_B <= est.se_B + 3 * est.stderr_B)

    def test_shares_trial_stream_with_estimate(self, unit_fading):
        c = cfg(32, 0.1)
        est = estimate_se(c, unit_fading, 100, master_seed=8)
        np.testing.assert_array_equal(estimate_jensen_bound(c, unit_fading, 100, 8), est.jensen_A)
        np.testing.assert_array_equal(estimate_jensen_bound(c, unit_fading, 100, 8, side="B"), est.jensen_B)

    @pytest.mark.slow
    def test_close_to_closed_form(self, unit_fading):
        c = cfg(512, 0.05)
        jb = estimate_jensen_bound(c, unit_fading, 5000, master_seed=77)
        np.testing.assert_allclose(jb, lemma1_se(unit_fading, c), rtol=0.05)


class TestConvergence:
    def test_residuals_are_nonnegative(self, unit_fading):
        rng = np.random.default_rng(0)
        ch = draw_channels(cfg(128, k=10), unit_fading, rng)
        res = identity_residuals(build_gram_cache(ch))
        assert set(res) == set(IDENTITIES)
        for v in res.values():
            assert v.shape == (10,) and np.all(v >= 0)

    def test_loglog_slope_recovers_power(self):
        n = np.array([100, 1000, 10000])
        assert loglog_slope(n, 3.0 * n**-0.5) == pytest.approx(-0.5)

    def test_rejects_bad_grid(self, unit_fading):
        with pytest.raises(ValueError):
            lln_convergence_suite(cfg(64, 0.05), unit_fading, [256, 128, 512], 2, 0)
        with pytest.raises(ValueError):
            lln_convergence_suite(cfg(64, 0.05), unit_fading, [256, 512], 2, 0)

    @pytest.mark.slow
    def test_residuals_decay(self, unit_fading):
        report = lln_convergence_suite(cfg(64, 0.05), unit_fading, [256, 1024, 4096], 20, master_seed=2)
        assert set(report.slopes) == set(IDENTITIES)
        assert set(report.expectation_errors) == set(EXPECTATIONS)
        for name in IDENTITIES:
            med = report.residual_medians[name]
            assert med[-1] < med[0], name
            assert all(m >= 0 for m in med)
        # cross-pair expansions are fluctuation dominated: N^(-1/2)
        assert report.slope_pass["gFh_cross_pair"] and report.slope_pass["gFg_cross_pair"]
