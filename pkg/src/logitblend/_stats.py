"""Small numerical helpers shared by the modelling modules."""

from __future__ import annotations

import math

import numpy as np

# Probabilities are kept strictly inside (0, 1) so that log-odds, score
# convexity bounds and downstream least-squares stay finite.
PROB_EPS = 1e-15


def stable_sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    """Overflow-safe logistic function 1 / (1 + e^-z)."""
    arr = np.asarray(z, dtype=float)
    scalar = arr.ndim == 0
    if scalar:
        arr = arr.reshape(1)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ez = np.exp(arr[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out[0]) if scalar else out


def clip_probability(p: np.ndarray | float) -> np.ndarray | float:
    """Clamp probabilities into the open interval (0, 1)."""
    clipped = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    if np.ndim(clipped) == 0:
        return float(clipped)
    return clipped


def log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    """Bernoulli log-likelihood sum(y*eta - log(1 + e^eta)), overflow-safe."""
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def normal_sf(z: float) -> float:
    """Standard normal survival function P(Z > z)."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wald_p_value(z: float) -> float:
    """Two-sided p-value for a standard normal Wald statistic."""
    if not math.isfinite(z):
        return 0.0 if z != 0 else 1.0
    return math.erfc(abs(z) / math.sqrt(2.0))


def two_proportion_p_value(e1: int, n1: int, e2: int, n2: int) -> float:
    """Two-sided pooled z-test for equality of two event proportions.

    Degenerate pools (all events or none, or an empty side) carry no
    evidence of a difference and return p = 1.
    """
    if n1 == 0 or n2 == 0:
        return 1.0
    pooled = (e1 + e2) / (n1 + n2)
    if pooled <= 0.0 or pooled >= 1.0:
        return 1.0
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    z = (e1 / n1 - e2 / n2) / se
    return math.erfc(abs(z) / math.sqrt(2.0))
