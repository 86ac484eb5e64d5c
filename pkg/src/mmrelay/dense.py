"""
Reference computations that form the N x N precoder explicitly.

Slow (O(N^2 K)) and only meant for small instances; used to cross-check the
Gram-matrix route in :mod:`mmrelay.mr`.
"""

from __future__ import annotations

import numpy as np

from .model import ChannelRealization, DistortionMode, DistortionRealization, SystemConfig


def precoder(channel: ChannelRealization) -> np.ndarray:
    return channel.B.conj() @ channel.A.conj().T


def trial_terms(
    channel: ChannelRealization, distortion: DistortionRealization, config: SystemConfig
) -> dict[str, np.ndarray | float]:
    """All SINR ingredients for the 2K devices, computed term by term."""
    F = precoder(channel)
    A = channel.A
    k = channel.n_pairs
    fro_f = np.linalg.norm(F, "fro") ** 2
    fro_fa = np.linalg.norm(F @ A, "fro") ** 2
    if distortion.mode is DistortionMode.EXPECTATION:
        f_eta = np.real(np.trace(F @ np.diag(distortion.eta_r) @ F.conj().T))
    else:
        f_eta = np.linalg.norm(F @ distortion.eta_r) ** 2
    rho2 = config.p_relay / (config.p_user * fro_fa + f_eta + config.noise_relay * fro_f)

    noise = np.concatenate([config.noise_a, config.noise_b]) * np.ones(2 * k)
    out = {name: np.zeros(2 * k) for name in (
        "signal", "interference", "relay_noise", "device_noise", "rx_distortion", "tx_distortion", "row_norm")}
    bil = np.zeros((2 * k, 2 * k), dtype=complex)
    for p in range(2 * k):
        partner = (p + k) % (2 * k)
        row = A[:, p] @ F
        for q in range(2 * k):
            bil[p, q] = row @ A[:, q]
        out["signal"][p] = config.p_user * abs(bil[p, partner]) ** 2
        out["interference"][p] = config.p_user * sum(
            abs(bil[p, q]) ** 2 for q in range(2 * k) if q not in (p, partner))
        out["row_norm"][p] = np.linalg.norm(row) ** 2
        out["relay_noise"][p] = config.noise_relay * out["row_norm"][p]
        out["device_noise"][p] = noise[p] / rho2
        if distortion.mode is DistortionMode.EXPECTATION:
            out["rx_distortion"][p] = np.sum(distortion.eta_r * np.abs(row) ** 2)
            out["tx_distortion"][p] = distortion.eta_t * np.linalg.norm(A[:, p]) ** 2 / rho2
        else:
            out["rx_distortion"][p] = abs(row @ distortion.eta_r) ** 2
            out["tx_distortion"][p] = abs(A[:, p] @ distortion.eta_t) ** 2 / rho2
    denom = sum(out[name] for name in (
        "interference", "relay_noise", "device_noise", "rx_distortion", "tx_distortion"))
    out.update(
        bilinear=bil,
        fro_f=fro_f,
        fro_fa=fro_fa,
        rho2=rho2,
        sinr=out["signal"] / denom,
    )
    return out
