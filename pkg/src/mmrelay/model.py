"""
System parameters and random generation for the multipair two-way relay.

Channels are stored column-wise: ``G[:, i]`` is the channel between device
A_i and the relay, ``H[:, i]`` the channel between device B_i and the relay.
Data symbols are never drawn; everything downstream depends only on the
channels, the distortion terms and the power-control coefficient.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

# Large-scale fading N(1, 0.2); 0.2 is read as a variance.
FADING_MEAN = 1.0
FADING_VARIANCE = 0.2


class ConfigError(ValueError):
    """Raised when a parameter set violates the model constraints."""


class DistortionMode(str, enum.Enum):
    REALIZATION = "realization"
    EXPECTATION = "expectation"

    @classmethod
    def parse(cls, value: "str | DistortionMode") -> "DistortionMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "realization": cls.REALIZATION,
            "expectation": cls.EXPECTATION,
            "conditional_expectation": cls.EXPECTATION,
            "conditionalexpectation": cls.EXPECTATION,
        }
        if key not in aliases:
            raise ConfigError(f"distortion_mode: unknown value {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class SystemConfig:
    """Scalar model parameters.

    ``noise_a`` and ``noise_b`` may be given as scalars; they are broadcast
    to per-device arrays of length ``n_pairs`` by :func:`validate_config`.
    """

    n_antennas: int
    n_pairs: int
    p_user: float = 10.0
    p_relay: float = 40.0
    noise_relay: float = 1.0
    noise_a: np.ndarray | float = 1.0
    noise_b: np.ndarray | float = 1.0
    kappa_r: float = 0.0
    kappa_t: float = 0.0
    distortion_mode: DistortionMode = DistortionMode.REALIZATION

    @property
    def kappa(self) -> float:
        """Common impairment level; only meaningful when kappa_r == kappa_t."""
        if not np.isclose(self.kappa_r, self.kappa_t, rtol=0.0, atol=1e-15):
            raise ConfigError(
                f"kappa_r={self.kappa_r} and kappa_t={self.kappa_t} differ; "
                "the closed-form analysis needs a single impairment level"
            )
        return float(self.kappa_r)

    def with_kappa(self, kappa: float) -> "SystemConfig":
        return replace(self, kappa_r=float(kappa), kappa_t=float(kappa))

    def with_antennas(self, n_antennas: int) -> "SystemConfig":
        return replace(self, n_antennas=int(n_antennas))


@dataclass(frozen=True)
class LargeScaleFading:
    sigma2_g: np.ndarray
    sigma2_h: np.ndarray
    # strict=False admits zero entries (test hook for degenerate channels)
    strict: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.sigma2_g, dtype=float).reshape(-1)
        h = np.asarray(self.sigma2_h, dtype=float).reshape(-1)
        if g.shape != h.shape:
            raise ConfigError("sigma2_g and sigma2_h must have the same length")
        if g.size == 0:
            raise ConfigError("fading vectors are empty")
        lower_ok = (g > 0) & (h > 0) if self.strict else (g >= 0) & (h >= 0)
        if not np.all(lower_ok):
            raise ConfigError("large-scale fading coefficients must be > 0")
        object.__setattr__(self, "sigma2_g", g)
        object.__setattr__(self, "sigma2_h", h)

    @property
    def n_pairs(self) -> int:
        return self.sigma2_g.size

    @classmethod
    def symmetric(cls, n_pairs: int, value: float = 1.0) -> "LargeScaleFading":
        return cls(np.full(n_pairs, value), np.full(n_pairs, value))

    def swapped(self) -> "LargeScaleFading":
        """A and B sides exchanged."""
        return LargeScaleFading(self.sigma2_h.copy(), self.sigma2_g.copy())


@dataclass(frozen=True)
class ChannelRealization:
    G: np.ndarray
    H: np.ndarray

    @property
    def n_antennas(self) -> int:
        return self.G.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.G.shape[1]

    @property
    def A(self) -> np.ndarray:
        """Stacked uplink matrix [G, H]."""
        return np.concatenate([self.G, self.H], axis=1)

    @property
    def B(self) -> np.ndarray:
        """Partner-ordered matrix [H, G]."""
        return np.concatenate([self.H, self.G], axis=1)


@dataclass(frozen=True)
class DistortionRealization:
    """Relay distortion for one channel use.

    In realization mode ``eta_r`` and ``eta_t`` are complex N-vectors. In
    expectation mode ``eta_r`` holds the per-antenna conditional variances
    and ``eta_t`` the scalar per-antenna variance.
    """

    eta_r: np.ndarray
    eta_t: np.ndarray | float
    mode: DistortionMode = DistortionMode.REALIZATION
    eta_r_variance: np.ndarray = field(default=None, repr=False)
    eta_t_variance: float = 0.0


def validate_config(config: SystemConfig) -> SystemConfig:
    """Check every model constraint and return a normalized config.

    Scalar device noise levels are expanded to length-K arrays; everything
    else is returned as given.

    Raises
    ------
    ConfigError
        With the name of the offending field.
    """
    n, k = config.n_antennas, config.n_pairs
    if int(k) != k or k < 1:
        raise ConfigError(f"n_pairs: need at least one device pair, got {k}")
    if int(n) != n or n < 1:
        raise ConfigError(f"n_antennas: must be a positive integer, got {n}")
    if k > n:
        raise ConfigError(f"n_pairs: K={k} exceeds n_antennas N={n}")
    for name in ("p_user", "p_relay", "noise_relay"):
        value = getattr(config, name)
        if not np.isfinite(value) or value <= 0:
            raise ConfigError(f"{name}: must be > 0, got {value}")
    noise = {}
    for name in ("noise_a", "noise_b"):
        arr = np.asarray(getattr(config, name), dtype=float)
        if arr.ndim == 0:
            arr = np.full(k, float(arr))
        if arr.shape != (k,):
            raise ConfigError(f"{name}: expected {k} entries, got {arr.size}")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ConfigError(f"{name}: all entries must be > 0")
        noise[name] = arr
    for name in ("kappa_r", "kappa_t"):
        value = getattr(config, name)
        if not np.isfinite(value) or value < 0:
            raise ConfigError(f"{name}: must be >= 0, got {value}")
    mode = DistortionMode.parse(config.distortion_mode)
    return replace(config, n_antennas=int(n), n_pairs=int(k), distortion_mode=mode, **noise)


def draw_large_scale_fading(
    n_pairs: int,
    rng: np.random.Generator,
    mean: float = FADING_MEAN,
    variance: float = FADING_VARIANCE,
) -> LargeScaleFading:
    """Draw i.i.d. Gaussian fading coefficients, redrawing non-positive ones."""
    if n_pairs < 1:
        raise ConfigError(f"n_pairs: need at least one device pair, got {n_pairs}")
    std = np.sqrt(variance)

    def draw():
        out = mean + std * rng.standard_normal(n_pairs)
        bad = out <= 0
        while np.any(bad):
            out[bad] = mean + std * rng.standard_normal(int(bad.sum()))
            bad = out <= 0
        return out

    g = draw()
    h = draw()
    return LargeScaleFading(g, h)


def complex_normal(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * scale


def draw_channels(
    config: SystemConfig, fading: LargeScaleFading, rng: np.random.Generator
) -> ChannelRealization:
    n, k = config.n_antennas, config.n_pairs
    if fading.n_pairs != k:
        raise ConfigError(f"fading has {fading.n_pairs} pairs, config has {k}")
    G = complex_normal(rng, (n, k)) * np.sqrt(fading.sigma2_g)
    H = complex_normal(rng, (n, k)) * np.sqrt(fading.sigma2_h)
    return ChannelRealization(G, H)


def receiver_distortion_variances(
    channel: ChannelRealization, config: SystemConfig
) -> np.ndarray:
    """Per-antenna variance kappa_r^2 * P_U * W_nn of the receive distortion.

    ``W_nn`` is the instantaneous received power at antenna n, i.e. the
    squared norm of row n of [G, H].
    """
    w_diag = np.sum(np.abs(channel.G) ** 2, axis=1) + np.sum(np.abs(channel.H) ** 2, axis=1)
    return config.kappa_r**2 * config.p_user * w_diag


def transmit_distortion_variance(config: SystemConfig) -> float:
    return config.kappa_t**2 * config.p_relay / config.n_antennas


def draw_distortions(
    channel: ChannelRealization, config: SystemConfig, rng: np.random.Generator
) -> DistortionRealization:
    """Draw (or, in expectation mode, summarize) the relay distortions."""
    var_r = receiver_distortion_variances(channel, config)
    var_t = transmit_distortion_variance(config)
    mode = DistortionMode.parse(config.distortion_mode)
    if mode is DistortionMode.EXPECTATION:
        return DistortionRealization(var_r, var_t, mode, var_r, var_t)
    n = channel.n_antennas
    eta_r = complex_normal(rng, n, var_r)
    eta_t = complex_normal(rng, n, var_t)
    return DistortionRealization(eta_r, eta_t, mode, var_r, var_t)
