"""Air-to-ground channel math: gains, SNRs, rates and secrecy rates.

Free-space path loss at fixed altitude: the power gain from a UAV at
horizontal position q to a ground node at w is beta0 / (|q - w|^2 + H^2).
Rates are spectral efficiencies in bits/s/Hz (log base 2, unit bandwidth).
All functions broadcast over leading axes of the position arguments.
"""

from __future__ import annotations

import numpy as np

from .scenario import Scenario

__all__ = ["gain", "dist2", "snr", "snr_hover", "rate", "rate_pair",
           "secrecy_rate"]


def dist2(q, w, scenario: Scenario):
    """Squared UAV-to-node distance |q - w|^2 + H^2 in m^2."""
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    diff = q - w
    return np.sum(diff * diff, axis=-1) + scenario.alt2


def gain(q, w, scenario: Scenario):
    """Linear channel power gain beta0 / d^2. Strictly positive, <= beta0/H^2."""
    return scenario.beta0 / dist2(q, w, scenario)


def snr(q_S, q_J, w, sigma2, scenario: Scenario):
    """Received SNR at a node: P_S g_S / (P_J g_J + sigma2)."""
    g_s = gain(q_S, w, scenario)
    g_j = gain(q_J, w, scenario)
    return scenario.P_S * g_s / (scenario.P_J * g_j + sigma2)


def snr_hover(q_S, q_J, m, scenario: Scenario):
    """SNR in distance form, as used by the surrogate constants.

    Equals beta0 P_S d_J^2 / (beta0 P_J d_S^2 + sigma2 d_S^2 d_J^2), which is
    algebraically identical to :func:`snr`. ``m`` is a user index or ``'e'``.
    """
    w = scenario.node_pos(m)
    sigma2 = scenario.node_sigma2(m)
    d2_s = dist2(q_S, w, scenario)
    d2_j = dist2(q_J, w, scenario)
    num = scenario.beta0 * scenario.P_S * d2_j
    den = scenario.beta0 * scenario.P_J * d2_s + sigma2 * d2_s * d2_j
    return num / den


def rate(q_S, q_J, w, sigma2, scenario: Scenario):
    """Transmission rate log2(1 + SNR) toward the node at ``w``."""
    return np.log2(1.0 + snr(q_S, q_J, w, sigma2, scenario))


def rate_pair(q_S, q_J, k: int, scenario: Scenario):
    """(rate to user k, rate to Eve) at the given UAV positions."""
    r_user = rate(q_S, q_J, scenario.gu_pos[k], scenario.sigma2_gu, scenario)
    r_eve = rate(q_S, q_J, scenario.eve_pos, scenario.sigma2_eve, scenario)
    return r_user, r_eve


def secrecy_rate(q_S, q_J, k: int, scenario: Scenario):
    """Clamped secrecy rate [R_user - R_eve]^+ for user k, bits/s/Hz."""
    r_user, r_eve = rate_pair(q_S, q_J, k, scenario)
    return np.maximum(r_user - r_eve, 0.0)
