"""
Maximum-ratio relay processing without forming the N x N precoder.

The relay precoder is ``F = conj(B) A^H`` with ``A = [G, H]`` and
``B = [H, G]``, i.e. ``F = conj(H) G^H + conj(G) H^H``. Every quantity the
SINR needs is a function of the 2K x 2K Gram matrix ``Gamma = A^H A`` and
a few skinny products, so the cost per trial is O(N K^2).

Device indexing: the 2K devices are ordered A_1..A_K, B_1..B_K. Device p
receives through column p of A, and its partner (whose symbol it wants) is
``(p + K) mod 2K``.

With ``Pi`` the block swap [[0, I], [I, 0]] (so that ``B = A Pi``)::

    a_p^T F a_q        = (Gamma^T Pi Gamma)[p, q]
    ||a_p^T F||^2      = v_p^T Gamma conj(v_p),  v_p = (Pi Gamma)[:, p]
    ||F||_F^2          = tr(Gamma X),            X = conj(Pi Gamma Pi)
    ||F A||_F^2        = tr(Gamma X Gamma)
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import (
    ChannelRealization,
    DistortionMode,
    DistortionRealization,
    SystemConfig,
)

LEGS = ("g", "h")


class DegenerateChannelError(ArithmeticError):
    """Raised when the relay receives no signal power at all."""


def _swap_halves(x: np.ndarray, axis: int) -> np.ndarray:
    k = x.shape[axis] // 2
    return np.roll(x, k, axis=axis)


@dataclass(frozen=True)
class GramCache:
    """Inner products of the channel columns.

    ``P = G^H G``, ``Q = H^H H`` and ``R = H^H G``; ``gamma`` is the full
    Gram matrix of ``A = [G, H]`` with blocks [[P, R^H], [R, Q]].
    """

    gamma: np.ndarray

    @property
    def n_pairs(self) -> int:
        return self.gamma.shape[0] // 2

    @property
    def P(self) -> np.ndarray:
        k = self.n_pairs
        return self.gamma[:k, :k]

    @property
    def Q(self) -> np.ndarray:
        k = self.n_pairs
        return self.gamma[k:, k:]

    @property
    def R(self) -> np.ndarray:
        k = self.n_pairs
        return self.gamma[k:, :k]

    @property
    def g_norms2(self) -> np.ndarray:
        return self.P.diagonal().real.copy()

    @property
    def h_norms2(self) -> np.ndarray:
        return self.Q.diagonal().real.copy()

    @cached_property
    def swapped(self) -> np.ndarray:
        """``Pi Gamma``: column p is the coefficient vector of ``a_p^T F``."""
        return _swap_halves(self.gamma, axis=0)

    @cached_property
    def bilinear(self) -> np.ndarray:
        """Matrix of ``a_p^T F a_q`` over all 2K x 2K device pairs."""
        return self.gamma.T @ self.swapped

    @cached_property
    def swap_conj(self) -> np.ndarray:
        """``conj(Pi Gamma Pi)``, the Gram matrix of ``conj(B)``."""
        return _swap_halves(self.swapped, axis=1).conj()

    @cached_property
    def row_norms2(self) -> np.ndarray:
        """``||a_p^T F||^2`` for every device p."""
        v = self.swapped
        return np.einsum("ip,ij,jp->p", v, self.gamma, v.conj()).real


def build_gram_cache(channel: ChannelRealization) -> GramCache:
    A = channel.A
    gamma = A.conj().T @ A
    gamma = 0.5 * (gamma + gamma.conj().T)
    return GramCache(gamma)


def _device(i: int, leg: str, n_pairs: int) -> int:
    if leg not in LEGS:
        raise ValueError(f"leg must be 'g' or 'h', got {leg!r}")
    if not 0 <= i < n_pairs:
        raise IndexError(f"pair index {i} out of range for K={n_pairs}")
    return i if leg == "g" else n_pairs + i


def apply_precoder(channel: ChannelRealization, x: np.ndarray) -> np.ndarray:
    """Return ``F x`` in O(NK)."""
    x = np.asarray(x)
    if x.shape[0] != channel.n_antennas:
        raise ValueError(f"vector has length {x.shape[0]}, relay has {channel.n_antennas} antennas")
    G, H = channel.G, channel.H
    return H.conj() @ (G.conj().T @ x) + G.conj() @ (H.conj().T @ x)


def bilinear_form(cache: GramCache, i: int, j: int, left_leg: str = "g", right_leg: str = "h") -> complex:
    """``x_i^T F y_j`` where x, y select the g or h channel of a pair.

    Pair indices are zero-based.
    """
    k = cache.n_pairs
    p = _device(i, left_leg, k)
    q = _device(j, right_leg, k)
    # O(K) evaluation from one row and one column of the Gram matrix
    return complex(cache.gamma[:, p] @ _swap_halves(cache.gamma[:, q], axis=0))


def precoder_row_norm(cache: GramCache, i: int, leg: str = "g") -> float:
    """``||x_i^T F||^2`` for the g (default) or h channel of pair i."""
    p = _device(i, leg, cache.n_pairs)
    v = cache.swapped[:, p]
    return float(np.real(v @ cache.gamma @ v.conj()))


def frobenius_norms(cache: GramCache) -> tuple[float, float]:
    """``(||F||_F^2, ||F A||_F^2)``."""
    gx = cache.gamma @ cache.swap_conj
    fro_f = float(np.trace(gx).real)
    fro_fa = float(np.einsum("ij,ji->", gx, cache.gamma).real)
    return fro_f, fro_fa


def precoded_distortion_power(
    cache: GramCache, channel: ChannelRealization, distortion: DistortionRealization
) -> float:
    """``||F eta_r||^2``, or its expectation given the channel."""
    if distortion.mode is DistortionMode.EXPECTATION:
        A = channel.A
        col_norms2 = np.einsum("nq,qr,nr->n", A, cache.swap_conj, A.conj()).real
        return float(distortion.eta_r @ col_norms2)
    y = apply_precoder(channel, distortion.eta_r)
    return float(np.vdot(y, y).real)


def power_control_rho(
    cache: GramCache,
    channel: ChannelRealization,
    distortion: DistortionRealization,
    config: SystemConfig,
) -> float:
    """Amplification factor normalizing the relay output power to P_R."""
    fro_f, fro_fa = frobenius_norms(cache)
    denom = (
        config.p_user * fro_fa
        + precoded_distortion_power(cache, channel, distortion)
        + config.noise_relay * fro_f
    )
    if not denom > 0:
        raise DegenerateChannelError("relay input power is zero; rho is undefined")
    return float(np.sqrt(config.p_relay / denom))


@dataclass(frozen=True)
class TrialResult:
    """SINR of all 2K devices for one channel realization.

    The term arrays have length 2K (A-side devices first). ``interference``
    is C', ``relay_noise`` D' and ``device_noise`` E'.
    """

    rho2: float
    signal: np.ndarray
    interference: np.ndarray
    relay_noise: np.ndarray
    device_noise: np.ndarray
    rx_distortion: np.ndarray
    tx_distortion: np.ndarray

    @property
    def denominator(self) -> np.ndarray:
        return (
            self.interference
            + self.relay_noise
            + self.device_noise
            + self.rx_distortion
            + self.tx_distortion
        )

    @property
    def sinr(self) -> np.ndarray:
        return self.signal / self.denominator

    @property
    def n_pairs(self) -> int:
        return self.signal.size // 2

    @property
    def sinr_A(self) -> np.ndarray:
        return self.sinr[: self.n_pairs]

    @property
    def sinr_B(self) -> np.ndarray:
        return self.sinr[self.n_pairs :]


def compute_trial_sinr(
    cache: GramCache,
    channel: ChannelRealization,
    distortion: DistortionRealization,
    config: SystemConfig,
) -> TrialResult:
    k = cache.n_pairs
    rho = power_control_rho(cache, channel, distortion, config)
    rho2 = rho * rho

    m2 = np.abs(cache.bilinear) ** 2
    partner = _swap_halves(np.arange(2 * k), axis=0)
    idx = np.arange(2 * k)
    signal = config.p_user * m2[idx, partner]
    # self-interference (diagonal) is cancelled at the device
    others = np.ones_like(m2, dtype=bool)
    others[idx, idx] = False
    others[idx, partner] = False
    interference = config.p_user * np.where(others, m2, 0.0).sum(axis=1)

    relay_noise = config.noise_relay * cache.row_norms2
    device_noise_var = np.concatenate([config.noise_a, config.noise_b]) * np.ones(2 * k)
    device_noise = device_noise_var / rho2

    A = channel.A
    if distortion.mode is DistortionMode.EXPECTATION:
        rows = A.conj() @ cache.swapped
        rx_distortion = distortion.eta_r @ (np.abs(rows) ** 2)
        tx_distortion = distortion.eta_t * cache.gamma.diagonal().real / rho2
    else:
        rx_distortion = np.abs(A.T @ apply_precoder(channel, distortion.eta_r)) ** 2
        tx_distortion = np.abs(A.T @ distortion.eta_t) ** 2 / rho2

    return TrialResult(
        rho2=rho2,
        signal=signal,
        interference=interference,
        relay_noise=relay_noise,
        device_noise=device_noise,
        rx_distortion=rx_distortion,
        tx_distortion=tx_distortion,
    )
