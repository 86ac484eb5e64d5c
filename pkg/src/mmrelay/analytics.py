"""
Closed-form large-system results for MR two-way relaying with impairments.

All functions take the A-side view by default; ``side="B"`` applies the
A <-> B, g <-> h exchange. Spectral efficiencies carry the 1/2 pre-log of
two-phase relaying.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConfigError, LargeScaleFading, SystemConfig


@dataclass(frozen=True)
class ClosedFormTerms:
    """Denominator terms of the large-scale SE approximation for one device."""

    c_i: float
    d_i: float
    e_i: float
    f_i: float
    g_i: float
    j_value: float

    @property
    def total(self) -> float:
        return self.c_i + self.d_i + self.e_i + self.f_i + self.g_i


@dataclass(frozen=True)
class ScalingLaw:
    """Impairment growth ``kappa^2 = kappa0^2 * N^z``."""

    kappa0: float
    z: float

    def __post_init__(self):
        if not self.kappa0 > 0:
            raise ConfigError(f"kappa0 must be > 0, got {self.kappa0}")
        if not self.z > 0:
            raise ConfigError(f"z must be > 0, got {self.z}")


def _oriented(fading: LargeScaleFading, config: SystemConfig, side: str):
    """(own-link, partner-link, device noise) variances for one side."""
    if side == "A":
        return fading.sigma2_g, fading.sigma2_h, np.asarray(config.noise_a, dtype=float)
    if side == "B":
        return fading.sigma2_h, fading.sigma2_g, np.asarray(config.noise_b, dtype=float)
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


def j_value(fading: LargeScaleFading, kappa: float, n_antennas: int) -> float:
    sg, sh = fading.sigma2_g, fading.sigma2_h
    base = np.sum(sg * sh * (sg + sh))
    return float(base + 2.0 * kappa**2 / n_antennas * np.sum(sg * sh) * np.sum(sg + sh))


def _terms_arrays(fading: LargeScaleFading, config: SystemConfig, side: str):
    kappa = config.kappa
    n = config.n_antennas
    own, other, noise = _oriented(fading, config, side)
    noise = noise * np.ones(own.size)
    jv = j_value(fading, kappa, n)

    # per-j summand of C_i without the j = i exclusion
    def c_sum(i):
        mask = np.arange(own.size) != i
        o, p = own[mask], other[mask]
        return np.sum(
            p / other[i]
            + p**2 * o / (other[i] ** 2 * own[i])
            + o / other[i]
            + o**2 * p / (other[i] ** 2 * own[i])
        )

    c = np.array([c_sum(i) for i in range(own.size)])
    d = config.noise_relay / (config.p_user * other)
    e = noise * jv / (config.p_relay * own**2 * other**2)
    f = kappa**2 * jv / (own * other**2)
    g = kappa**2 / other * np.sum(own + other)
    return c, d, e, f, g, jv


def lemma1_terms(fading: LargeScaleFading, config: SystemConfig, i: int, side: str = "A") -> ClosedFormTerms:
    """C_i, D_i, E_i, F_i, G_i and J for device i (zero-based)."""
    if not 0 <= i < fading.n_pairs:
        raise IndexError(f"pair index {i} out of range for K={fading.n_pairs}")
    c, d, e, f, g, jv = _terms_arrays(fading, config, side)
    return ClosedFormTerms(float(c[i]), float(d[i]), float(e[i]), float(f[i]), float(g[i]), jv)


def lemma1_se(fading: LargeScaleFading, config: SystemConfig, side: str = "A") -> np.ndarray:
    """Large-scale SE approximation per device, bit/s/Hz."""
    c, d, e, f, g, _ = _terms_arrays(fading, config, side)
    return 0.5 * np.log2(1.0 + config.n_antennas / (c + d + e + f + g))


def scaling_moments(fading: LargeScaleFading) -> tuple[float, float, float]:
    """(mu0, mu1, mu2) of the hardware scaling law."""
    sg, sh = fading.sigma2_g, fading.sigma2_h
    mu0 = float(np.sum(sg + sh))
    mu1 = float(np.sum(sg * sh * (sg + sh)))
    mu2 = float(np.sum(sg * sh) * mu0)
    return mu0, mu1, mu2


def corollary1_limit(
    fading: LargeScaleFading, config: SystemConfig, law: ScalingLaw, side: str = "A"
) -> np.ndarray:
    """Asymptotic SE per device when ``kappa^2 = kappa0^2 N^z``, 0 < z <= 1.

    For z > 1 there is no finite limit; evaluate :func:`lemma1_se` with
    :func:`substituted_kappa` instead.
    """
    if not 0 < law.z <= 1:
        raise ConfigError(f"z={law.z} is outside the scaling-law regime (0, 1]")
    own, other, _ = _oriented(fading, config, side)
    mu0, mu1, mu2 = scaling_moments(fading)
    k02 = law.kappa0**2
    if law.z < 1:
        ratio = own * other**2 * config.n_antennas ** (1.0 - law.z) / (k02 * (mu0 * own * other + mu1))
    else:
        ratio = own * other**2 / (k02 * (mu0 * own * other + mu1 + 2.0 * k02 * mu2))
    return 0.5 * np.log2(1.0 + ratio)


def substituted_kappa(law: ScalingLaw, n_antennas: int) -> float:
    if n_antennas < 1:
        raise ConfigError(f"n_antennas must be >= 1, got {n_antennas}")
    return float(law.kappa0 * n_antennas ** (law.z / 2.0))


def appendix_expectations(fading: LargeScaleFading, config: SystemConfig) -> tuple[float, float, float]:
    """Large-N values of E||F||^2, E||FA||^2 and E rho^2."""
    n = config.n_antennas
    sg, sh = fading.sigma2_g, fading.sigma2_h
    e_f = 2.0 * n**2 * float(np.sum(sg * sh))
    e_fa = n**3 * float(np.sum(sg * sh * (sg + sh)))
    e_rho2 = config.p_relay / (config.p_user * n**3 * j_value(fading, config.kappa, n))
    return e_f, e_fa, e_rho2


def evm_tradeoff(reference_evm: float, replacement_evm: float, reference_n: float = 1) -> float:
    """Number of antennas with ``replacement_evm`` that match ``reference_n``
    antennas of ``reference_evm`` under the linear (z = 1) scaling law."""
    if reference_evm <= 0 or replacement_evm <= 0:
        raise ValueError("EVM values must be positive")
    return reference_n * (replacement_evm / reference_evm) ** 2
