"""
Reproducible Monte Carlo estimation of the per-device spectral efficiency.

Trial ``t`` of a run with master seed ``s`` draws from
``SeedSequence(s, spawn_key=(t,))``, so its random stream depends only on
``(s, t)``. Trials are evaluated in chunks on a thread pool and written back
by index; every reduction runs over the index-ordered arrays, which makes the
aggregates bit-identical for any number of workers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytics
from .model import (
    DistortionMode,
    LargeScaleFading,
    SystemConfig,
    draw_channels,
    draw_distortions,
    validate_config,
)
from .mr import TrialResult, build_gram_cache, compute_trial_sinr, frobenius_norms

logger = logging.getLogger(__name__)

CHUNK_SIZE = 64


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(index),)))


def run_trial(config: SystemConfig, fading: LargeScaleFading, trial_seed) -> TrialResult:
    """One channel/distortion draw and the resulting SINRs of all 2K devices.

    ``trial_seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if isinstance(trial_seed, np.random.Generator):
        rng = trial_seed
    else:
        rng = np.random.default_rng(trial_seed)
    channel = draw_channels(config, fading, rng)
    distortion = draw_distortions(channel, config, rng)
    cache = build_gram_cache(channel)
    return compute_trial_sinr(cache, channel, distortion, config)


@dataclass
class TrialBatch:
    """Per-trial outputs of a run, indexed by trial number."""

    sinr: np.ndarray  # (n_trials, 2K), A-side devices first
    rho2: np.ndarray
    fro_f: np.ndarray
    fro_fa: np.ndarray

    @property
    def n_trials(self) -> int:
        return self.sinr.shape[0]


def _run_chunk(config, fading, master_seed, start, stop):
    k2 = 2 * config.n_pairs
    n = stop - start
    sinr = np.empty((n, k2))
    rho2 = np.empty(n)
    fro_f = np.empty(n)
    fro_fa = np.empty(n)
    for row, t in enumerate(range(start, stop)):
        rng = trial_rng(master_seed, t)
        channel = draw_channels(config, fading, rng)
        distortion = draw_distortions(channel, config, rng)
        cache = build_gram_cache(channel)
        result = compute_trial_sinr(cache, channel, distortion, config)
        sinr[row] = result.sinr
        rho2[row] = result.rho2
        fro_f[row], fro_fa[row] = frobenius_norms(cache)
    return sinr, rho2, fro_f, fro_fa


def simulate(
    config: SystemConfig,
    fading: LargeScaleFading,
    n_trials: int,
    master_seed: int,
    threads: int = 1,
) -> TrialBatch:
    config = validate_config(config)
    bounds = [(s, min(s + CHUNK_SIZE, n_trials)) for s in range(0, n_trials, CHUNK_SIZE)]
    if threads <= 1:
        parts = [_run_chunk(config, fading, master_seed, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: _run_chunk(config, fading, master_seed, *ab), bounds))
    return TrialBatch(*(np.concatenate(arrs) for arrs in zip(*parts)))


def spectral_efficiency(sinr: np.ndarray) -> np.ndarray:
    """Per-channel-use SE with the two-phase 1/2 pre-log."""
    return 0.5 * np.log2(1.0 + sinr)


def jensen_bound_from_sinr(sinr: np.ndarray) -> np.ndarray:
    """``1/2 log2(1 + 1/E[1/SINR])`` along the trial axis."""
    sinr = np.asarray(sinr, dtype=float)
    return 0.5 * np.log2(1.0 + 1.0 / np.mean(1.0 / sinr, axis=0))


def standard_error(x: np.ndarray) -> np.ndarray:
    return np.std(x, axis=0, ddof=1) / np.sqrt(x.shape[0])


@dataclass(frozen=True)
class SEEstimate:
    se_A: np.ndarray
    se_B: np.ndarray
    stderr_A: np.ndarray
    stderr_B: np.ndarray
    sum_se: float
    sum_se_stderr: float
    mean_se: float
    mean_se_stderr: float
    n_trials: int
    master_seed: int
    distortion_mode: DistortionMode = DistortionMode.REALIZATION
    fading_source: str = "fixed"
    jensen_A: np.ndarray = field(default=None, repr=False)
    jensen_B: np.ndarray = field(default=None, repr=False)


def summarize(batch: TrialBatch, master_seed: int, distortion_mode=DistortionMode.REALIZATION,
              fading_source: str = "fixed") -> SEEstimate:
    k = batch.sinr.shape[1] // 2
    se = spectral_efficiency(batch.sinr)
    err = standard_error(se)
    per_trial_sum = se.sum(axis=1)
    per_trial_mean = se.mean(axis=1)
    jb = jensen_bound_from_sinr(batch.sinr)
    return SEEstimate(
        se_A=se[:, :k].mean(axis=0),
        se_B=se[:, k:].mean(axis=0),
        stderr_A=err[:k],
        stderr_B=err[k:],
        sum_se=float(per_trial_sum.mean()),
        sum_se_stderr=float(standard_error(per_trial_sum)),
        mean_se=float(per_trial_mean.mean()),
        mean_se_stderr=float(standard_error(per_trial_mean)),
        n_trials=batch.n_trials,
        master_seed=int(master_seed),
        distortion_mode=distortion_mode,
        fading_source=fading_source,
        jensen_A=jb[:k],
        jensen_B=jb[k:],
    )


def estimate_se(
    config: SystemConfig,
    fading: LargeScaleFading,
    n_trials: int,
    master_seed: int,
    threads: int = 1,
    fading_source: str = "fixed",
) -> SEEstimate:
    """Monte Carlo SE of every device, with standard errors.

    The returned estimate also carries the Jensen bound evaluated on the
    same trials (``jensen_A``, ``jensen_B``).
    """
    if n_trials < 2:
        raise ValueError(f"n_trials must be >= 2, got {n_trials}")
    config = validate_config(config)
    batch = simulate(config, fading, n_trials, master_seed, threads)
    return summarize(batch, master_seed, config.distortion_mode, fading_source)


def estimate_jensen_bound(
    config: SystemConfig,
    fading: LargeScaleFading,
    n_trials: int,
    master_seed: int,
    threads: int = 1,
    side: str = "A",
) -> np.ndarray:
    """Jensen lower bound per device, from the same trials as :func:`estimate_se`."""
    if n_trials < 2:
        raise ValueError(f"n_trials must be >= 2, got {n_trials}")
    batch = simulate(config, fading, n_trials, master_seed, threads)
    jb = jensen_bound_from_sinr(batch.sinr)
    k = config.n_pairs
    return jb[:k] if side == "A" else jb[k:]


# -- law-of-large-numbers checks ------------------------------------------------

IDENTITIES = (
    "gFh_same_pair",
    "gFh_cross_pair",
    "gFg_cross_pair",
    "row_norm",
)
EXPECTATIONS = ("frobenius_F", "frobenius_FA", "rho2")
EXPECTED_SLOPE = -0.5
SLOPE_WINDOW = (-0.7, -0.3)


def identity_residuals(cache) -> dict[str, np.ndarray]:
    """Relative residuals of the large-N approximations for every pair i.

    Cross-pair identities use j = i + 1 (mod K) and need K >= 2.
    """
    k = cache.n_pairs
    P, Q, R = cache.P, cache.Q, cache.R
    M = cache.bilinear
    i = np.arange(k)
    j = (i + 1) % k
    gi2 = P[i, i].real
    hi2 = Q[i, i].real

    def rel(lhs, rhs):
        return np.abs(lhs - rhs) / np.abs(rhs)

    out = {
        "gFh_same_pair": rel(M[i, k + i], gi2 * hi2),
        "row_norm": rel(cache.row_norms2[i], gi2**2 * hi2),
    }
    if k >= 2:
        # h_i^H h_j = Q[i, j], g_i^T conj(g_j) = P[j, i],
        # h_i^H g_j = R[i, j], g_i^T conj(h_j) = R[j, i]
        hj2 = Q[j, j].real
        gj2 = P[j, j].real
        out["gFh_cross_pair"] = rel(M[i, k + j], gi2 * Q[i, j] + hj2 * P[j, i])
        out["gFg_cross_pair"] = rel(M[i, j], gi2 * R[i, j] + gj2 * R[j, i])
    return out


@dataclass
class ConvergenceReport:
    n_grid: list[int]
    residual_medians: dict[str, list[float]]
    slopes: dict[str, float]
    expectation_errors: dict[str, list[float]]
    expectation_tolerance: float = 0.05
    slope_window: tuple[float, float] = SLOPE_WINDOW

    @property
    def slope_pass(self) -> dict[str, bool]:
        lo, hi = self.slope_window
        return {name: bool(lo <= s <= hi) for name, s in self.slopes.items()}

    @property
    def expectation_pass(self) -> dict[str, bool]:
        return {
            name: bool(max(errs) <= self.expectation_tolerance)
            for name, errs in self.expectation_errors.items()
        }

    @property
    def passed(self) -> bool:
        return all(self.slope_pass.values()) and all(self.expectation_pass.values())


def loglog_slope(n_grid, values) -> float:
    x = np.log(np.asarray(n_grid, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def lln_convergence_suite(
    config: SystemConfig,
    fading: LargeScaleFading,
    n_grid,
    trials_per_n: int,
    master_seed: int,
) -> ConvergenceReport:
    """Residual decay of the large-N identities and the norm/rho^2 means.

    ``config`` is a template; its antenna count is replaced by each grid
    value. Each grid point uses its own seed stream derived from
    ``master_seed``.
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 3 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing with at least 3 points")
    medians: dict[str, list[float]] = {}
    exp_err: dict[str, list[float]] = {name: [] for name in EXPECTATIONS}
    for point, n in enumerate(n_grid):
        cfg = validate_config(config.with_antennas(n))
        collected: dict[str, list[np.ndarray]] = {}
        norms = np.empty((trials_per_n, 3))
        seed = int(np.random.SeedSequence([int(master_seed), point]).generate_state(1)[0])
        for t in range(trials_per_n):
            rng = trial_rng(seed, t)
            channel = draw_channels(cfg, fading, rng)
            distortion = draw_distortions(channel, cfg, rng)
            cache = build_gram_cache(channel)
            for name, res in identity_residuals(cache).items():
                collected.setdefault(name, []).append(res)
            result = compute_trial_sinr(cache, channel, distortion, cfg)
            norms[t] = (*frobenius_norms(cache), result.rho2)
        for name, res in collected.items():
            medians.setdefault(name, []).append(float(np.median(np.concatenate(res))))
        expected = analytics.appendix_expectations(fading, cfg)
        for name, mean, ref in zip(EXPECTATIONS, norms.mean(axis=0), expected):
            exp_err[name].append(float(abs(mean - ref) / ref))
        logger.info("N=%d: %s", n, {k: v[-1] for k, v in medians.items()})
    slopes = {name: loglog_slope(n_grid, vals) for name, vals in medians.items()}
    return ConvergenceReport(n_grid, medians, slopes, exp_err)
