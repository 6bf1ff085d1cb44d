"""Independent ground-truth generators for tests and acceptance checks.

These deliberately avoid the production code paths: brute-force
self-normalized importance sampling under the target, complete-the-square
closed forms for linear and quadratic tilts of a Gaussian, and plain central
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mixtures import GaussianMixture
from .rewards import Reward


@dataclass(frozen=True)
class SnisEstimate:
    estimate: float
    stderr: float


def snis_tilted_expectation(target: GaussianMixture, reward: Reward, h,
                            m_samples: int, rng: np.random.Generator) -> SnisEstimate:
    """Self-normalized importance estimate of E[h] under the exp(reward) tilt
    of the target, with a delta-method standard error."""
    if m_samples < 100:
        raise ValueError("m_samples must be >= 100")
    x = target.sample(m_samples, rng)
    r = np.asarray(reward.value(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite reward values")
    w = np.exp(r - np.max(r))
    vals = np.asarray(h(x), dtype=float)
    wsum = w.sum()
    est = float(np.sum(w * vals) / wsum)
    # Delta-method variance of a ratio estimator with normalized weights.
    wn = w / wsum
    var = float(np.sum(wn**2 * (vals - est) ** 2))
    return SnisEstimate(est, np.sqrt(var))


@dataclass(frozen=True)
class GaussianTilt:
    mean: float
    variance: float
    log_normalizer: float


def gaussian_tilt_closed_form(mean: float, variance: float, *,
                              linear: float | None = None,
                              quadratic: float | None = None) -> GaussianTilt:
    """Exact tilted moments of N(mean, variance) under a linear reward
    lam*x or a quadratic reward -gam*x^2/2, by completing the square.

    Returns the tilted mean and variance plus the log-normalizer F with
    exp(F) * E[exp(r)] = 1.
    """
    if variance <= 0:
        raise ValueError("variance must be > 0")
    if (linear is None) == (quadratic is None):
        raise ValueError("specify exactly one of linear or quadratic")
    if linear is not None:
        lam = float(linear)
        return GaussianTilt(mean + lam * variance, variance,
                            -lam * mean - 0.5 * lam**2 * variance)
    gam = float(quadratic)
    denom = 1.0 + gam * variance
    if denom <= 0:
        raise ValueError("quadratic tilt is not normalizable")
    new_var = variance / denom
    new_mean = mean / denom
    log_norm = 0.5 * np.log(denom) + 0.5 * gam * mean**2 / denom
    return GaussianTilt(new_mean, new_var, log_norm)


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar field, one coordinate at a time."""
    if h <= 0:
        raise ValueError("h must be > 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (float(f(x + e)) - float(f(x - e))) / (2.0 * h)
    return g
