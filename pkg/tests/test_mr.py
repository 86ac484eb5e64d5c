import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmrelay import dense
from mmrelay.model import (
    ChannelRealization,
    DistortionMode,
    DistortionRealization,
    LargeScaleFading,
    SystemConfig,
    draw_channels,
    draw_distortions,
    validate_config,
)
from mmrelay.mr import (
    DegenerateChannelError,
    apply_precoder,
    bilinear_form,
    build_gram_cache,
    compute_trial_sinr,
    frobenius_norms,
    power_control_rho,
    precoder_row_norm,
)


def random_instance(seed, n, k, kappa=0.1, mode=DistortionMode.REALIZATION):
    rng = np.random.default_rng(seed)
    cfg = validate_config(SystemConfig(
        n, k, p_user=10, p_relay=40, noise_a=rng.uniform(0.5, 2, k), noise_b=rng.uniform(0.5, 2, k),
        kappa_r=kappa, kappa_t=kappa, distortion_mode=mode))
    fading = LargeScaleFading(rng.uniform(0.5, 2, k), rng.uniform(0.5, 2, k))
    ch = draw_channels(cfg, fading, rng)
    dist = draw_distortions(ch, cfg, rng)
    return cfg, fading, ch, dist


def orthonormal_channel(k):
    """N = 2K channel whose 2K columns are the standard basis."""
    eye = np.eye(2 * k, dtype=complex)
    return ChannelRealization(eye[:, :k], eye[:, k:])


class TestGramCache:
    def test_scalar_hand_values(self):
        ch = ChannelRealization(np.array([[2.0 + 0j]]), np.array([[1j]]))
        cache = build_gram_cache(ch)
        assert cache.P[0, 0] == 4
        assert cache.Q[0, 0] == 1
        assert cache.R[0, 0] == -2j

    def test_orthonormal_columns(self):
        cache = build_gram_cache(orthonormal_channel(3))
        np.testing.assert_array_equal(cache.P, np.eye(3))
        np.testing.assert_array_equal(cache.Q, np.eye(3))
        np.testing.assert_array_equal(cache.R, np.zeros((3, 3)))

    def test_hermitian_and_psd(self):
        _, _, ch, _ = random_instance(0, 200, 8)
        cache = build_gram_cache(ch)
        for M in (cache.P, cache.Q, cache.gamma):
            assert np.max(np.abs(M - M.conj().T)) <= 1e-12 * np.max(np.abs(M))
            assert np.linalg.eigvalsh(M).min() > -1e-9 * np.max(np.abs(M))
        assert np.all(cache.g_norms2 > 0) and np.all(cache.h_norms2 > 0)
        np.testing.assert_allclose(cache.R, ch.H.conj().T @ ch.G)


class TestPrecoder:
    def test_zero_vector(self):
        _, _, ch, _ = random_instance(1, 8, 2)
        assert np.all(apply_precoder(ch, np.zeros(8)) == 0)

    def test_matches_dense(self):
        _, _, ch, _ = random_instance(2, 4, 2)
        x = np.random.default_rng(3).standard_normal(4) + 1j
        F = dense.precoder(ch)
        np.testing.assert_allclose(apply_precoder(ch, x), F @ x, rtol=1e-10, atol=0)

    def test_linearity(self):
        _, _, ch, _ = random_instance(4, 12, 3)
        rng = np.random.default_rng(5)
        x, y = rng.standard_normal((2, 12)) + 1j * rng.standard_normal((2, 12))
        a, b = 0.3 - 2j, 1.7 + 0.1j
        lhs = apply_precoder(ch, a * x + b * y)
        rhs = a * apply_precoder(ch, x) + b * apply_precoder(ch, y)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-13, atol=1e-12)

    def test_dimension_mismatch(self):
        _, _, ch, _ = random_instance(4, 12, 3)
        with pytest.raises(ValueError):
            apply_precoder(ch, np.ones(11))

    def test_precoder_is_complex_symmetric(self):
        _, _, ch, _ = random_instance(6, 10, 3)
        F = dense.precoder(ch)
        np.testing.assert_allclose(F, F.T, atol=1e-12)


class TestBilinear:
    @pytest.mark.parametrize("left", ["g", "h"])
    @pytest.mark.parametrize("right", ["g", "h"])
    def test_matches_dense(self, left, right):
        _, _, ch, _ = random_instance(7, 6, 3)
        F = dense.precoder(ch)
        cache = build_gram_cache(ch)
        cols = {"g": ch.G, "h": ch.H}
        for i in range(3):
            for j in range(3):
                want = cols[left][:, i] @ F @ cols[right][:, j]
                got = bilinear_form(cache, i, j, left, right)
                assert abs(got - want) <= 1e-10 * abs(want)

    def test_scalar_channels(self):
        one = np.array([[1.0 + 0j]])
        cache = build_gram_cache(ChannelRealization(one, one))
        assert bilinear_form(cache, 0, 0, "g", "h") == pytest.approx(2.0)

    def test_orthogonal_cross_terms_vanish(self):
        cache = build_gram_cache(orthonormal_channel(3))
        assert bilinear_form(cache, 0, 1, "g", "g") == 0
        assert bilinear_form(cache, 2, 0, "g", "h") == 0

    def test_index_errors(self):
        cache = build_gram_cache(orthonormal_channel(2))
        with pytest.raises(IndexError):
            bilinear_form(cache, 2, 0)
        with pytest.raises(ValueError):
            bilinear_form(cache, 0, 0, "x", "h")


class TestNorms:
    def test_row_norm_matches_dense(self):
        _, _, ch, _ = random_instance(8, 6, 3)
        F = dense.precoder(ch)
        cache = build_gram_cache(ch)
        for i in range(3):
            for leg, M in (("g", ch.G), ("h", ch.H)):
                want = np.linalg.norm(M[:, i] @ F) ** 2
                assert precoder_row_norm(cache, i, leg) == pytest.approx(want, rel=1e-10)

    def test_row_norm_zero_column(self):
        G = np.zeros((4, 1), dtype=complex)
        H = np.ones((4, 1), dtype=complex)
        assert precoder_row_norm(build_gram_cache(ChannelRealization(G, H)), 0) == 0

    def test_row_norm_quartic_scaling(self):
        # single pair, g orthogonal to h: ||g^T F||^2 = ||g||^4 ||h||^2
        g = np.array([[1.0], [0], [0]], dtype=complex)
        h = np.array([[0], [2.0], [0]], dtype=complex)
        base = precoder_row_norm(build_gram_cache(ChannelRealization(g, h)), 0)
        alpha = 1.5 - 0.5j
        scaled = precoder_row_norm(build_gram_cache(ChannelRealization(alpha * g, h)), 0)
        assert base == pytest.approx(4.0)
        assert scaled == pytest.approx(abs(alpha) ** 4 * base, rel=1e-12)

    def test_frobenius_matches_dense(self):
        _, _, ch, _ = random_instance(9, 6, 3)
        F = dense.precoder(ch)
        fro_f, fro_fa = frobenius_norms(build_gram_cache(ch))
        assert fro_f == pytest.approx(np.linalg.norm(F) ** 2, rel=1e-10)
        assert fro_fa == pytest.approx(np.linalg.norm(F @ ch.A) ** 2, rel=1e-10)

    def test_frobenius_orthonormal(self):
        for k in (1, 2, 5):
            fro_f, fro_fa = frobenius_norms(build_gram_cache(orthonormal_channel(k)))
            assert fro_f == pytest.approx(2 * k)
            assert fro_fa == pytest.approx(2 * k)

    def test_frobenius_mean_near_large_n_value(self):
        cfg = validate_config(SystemConfig(256, 10))
        fading = LargeScaleFading.symmetric(10)
        rng = np.random.default_rng(10)
        vals = [frobenius_norms(build_gram_cache(draw_channels(cfg, fading, rng)))[0] for _ in range(300)]
        assert abs(np.mean(vals) / 1_310_720 - 1) < 0.05


class TestRho:
    def test_noise_free_limit(self):
        cfg, _, ch, dist = random_instance(11, 32, 4, kappa=0.0)
        from dataclasses import replace

        quiet = replace(cfg, noise_relay=1e-12)
        cache = build_gram_cache(ch)
        _, fro_fa = frobenius_norms(cache)
        rho = power_control_rho(cache, ch, dist, quiet)
        assert rho**2 == pytest.approx(quiet.p_relay / (quiet.p_user * fro_fa), rel=1e-9)

    def test_sqrt_scaling_in_relay_power(self):
        from dataclasses import replace

        cfg, _, ch, dist = random_instance(12, 32, 4)
        cache = build_gram_cache(ch)
        r1 = power_control_rho(cache, ch, dist, cfg)
        r2 = power_control_rho(cache, ch, dist, replace(cfg, p_relay=cfg.p_relay * 9))
        assert r2 == pytest.approx(3 * r1, rel=1e-12)

    def test_zero_channel_rejected(self):
        cfg = validate_config(SystemConfig(4, 1))
        z = np.zeros((4, 1), dtype=complex)
        ch = ChannelRealization(z, z)
        dist = DistortionRealization(np.zeros(4, complex), np.zeros(4, complex))
        with pytest.raises(DegenerateChannelError):
            power_control_rho(build_gram_cache(ch), ch, dist, cfg)

    @pytest.mark.parametrize("mode", list(DistortionMode))
    def test_matches_dense(self, mode):
        cfg, _, ch, dist = random_instance(13, 9, 3, kappa=0.2, mode=mode)
        ref = dense.trial_terms(ch, dist, cfg)
        rho = power_control_rho(build_gram_cache(ch), ch, dist, cfg)
        assert rho**2 == pytest.approx(ref["rho2"], rel=1e-10)


TERMS = ("signal", "interference", "relay_noise", "device_noise", "rx_distortion", "tx_distortion")


class TestTrialSinr:
    def test_single_pair_ideal_hardware(self):
        cfg, _, ch, dist = random_instance(14, 16, 1, kappa=0.0)
        res = compute_trial_sinr(build_gram_cache(ch), ch, dist, cfg)
        assert np.all(res.interference == 0)
        assert np.all(res.rx_distortion == 0) and np.all(res.tx_distortion == 0)
        np.testing.assert_allclose(res.denominator, res.relay_noise + res.device_noise)

    @pytest.mark.parametrize("mode", list(DistortionMode))
    def test_terms_match_dense(self, mode):
        cfg, _, ch, dist = random_instance(15, 8, 2, kappa=0.15, mode=mode)
        res = compute_trial_sinr(build_gram_cache(ch), ch, dist, cfg)
        ref = dense.trial_terms(ch, dist, cfg)
        for name in TERMS:
            np.testing.assert_allclose(getattr(res, name), ref[name], rtol=1e-9, err_msg=name)
        np.testing.assert_allclose(res.sinr, ref["sinr"], rtol=1e-9)

    def test_sinr_is_ratio_of_stored_terms(self):
        cfg, _, ch, dist = random_instance(16, 40, 5, kappa=0.1)
        res = compute_trial_sinr(build_gram_cache(ch), ch, dist, cfg)
        for name in TERMS:
            assert np.all(getattr(res, name) >= 0)
        np.testing.assert_array_equal(res.sinr, res.signal / res.denominator)
        np.testing.assert_array_equal(res.sinr_A, res.sinr[:5])
        np.testing.assert_array_equal(res.sinr_B, res.sinr[5:])

    def test_permutation_invariance(self):
        cfg, fading, ch, dist = random_instance(17, 20, 4, kappa=0.1)
        perm = np.array([2, 0, 3, 1])
        from dataclasses import replace

        cfg_p = replace(cfg, noise_a=cfg.noise_a[perm], noise_b=cfg.noise_b[perm])
        ch_p = ChannelRealization(ch.G[:, perm], ch.H[:, perm])
        res = compute_trial_sinr(build_gram_cache(ch), ch, dist, cfg)
        res_p = compute_trial_sinr(build_gram_cache(ch_p), ch_p, dist, cfg_p)
        np.testing.assert_allclose(res_p.sinr_A, res.sinr_A[perm], rtol=1e-10)
        np.testing.assert_allclose(res_p.sinr_B, res.sinr_B[perm], rtol=1e-10)

    def test_expectation_mode_averages_realizations(self):
        # conditional-expectation terms equal the mean of realization terms
        cfg, _, ch, _ = random_instance(18, 12, 2, kappa=0.3)
        from dataclasses import replace

        cache = build_gram_cache(ch)
        exp_cfg = replace(cfg, distortion_mode=DistortionMode.EXPECTATION)
        exp = compute_trial_sinr(cache, ch, draw_distortions(ch, exp_cfg, None), exp_cfg)
        rng = np.random.default_rng(19)
        rx = np.mean([compute_trial_sinr(cache, ch, draw_distortions(ch, cfg, rng), cfg).rx_distortion
                      for _ in range(4000)], axis=0)
        np.testing.assert_allclose(rx, exp.rx_distortion, rtol=0.08)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    k=st.integers(1, 4),
    extra=st.integers(0, 12),
    kappa=st.floats(0.0, 0.5),
    expectation=st.booleans(),
)
def test_gram_route_equals_dense_route(seed, k, extra, kappa, expectation):
    mode = DistortionMode.EXPECTATION if expectation else DistortionMode.REALIZATION
    cfg, _, ch, dist = random_instance(seed, k + extra, k, kappa=kappa, mode=mode)
    cache = build_gram_cache(ch)
    res = compute_trial_sinr(cache, ch, dist, cfg)
    ref = dense.trial_terms(ch, dist, cfg)
    scale = np.max(np.abs(ref["bilinear"]))
    assert np.max(np.abs(cache.bilinear - ref["bilinear"])) <= 1e-9 * scale
    np.testing.assert_allclose(cache.row_norms2, ref["row_norm"], rtol=1e-9)
    for name in TERMS:
        got, want = getattr(res, name), ref[name]
        assert np.max(np.abs(got - want)) <= 1e-9 * max(np.max(np.abs(want)), 1e-300), name
