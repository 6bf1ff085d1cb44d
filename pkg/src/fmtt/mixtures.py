"""Gaussian mixtures and the closed-form dynamics of their interpolant path.

With independent coupling of a base mixture (components m_i, C_i, weights
w_i) and a target mixture (n_j, S_j, u_j), the interpolated density at time
t is itself a mixture over all pairs (i,j), with weight w_i*u_j, mean
alpha*m_i + beta*n_j and covariance alpha^2*C_i + beta^2*S_j.  Velocity,
score, denoiser and log-density all follow from per-pair Gaussian
conditioning, weighted by posterior responsibilities computed in log-space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import yaml
from scipy.linalg import cholesky, solve_triangular
from scipy.special import logsumexp

from .schedule import InterpolantSchedule

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GaussianMixture:
    """Weighted Gaussian components with full covariances."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        m = np.atleast_2d(np.asarray(self.means, dtype=float))
        c = np.asarray(self.covariances, dtype=float)
        if c.ndim == 2:
            c = c[None]
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covariances", c)
        k, d = m.shape
        if w.shape != (k,) or c.shape != (k, d, d):
            raise ValueError("inconsistent mixture shapes")
        if np.any(w <= 0):
            raise ValueError("mixture weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {w.sum()}, not 1")
        if not np.allclose(c, np.swapaxes(c, -1, -2)):
            raise ValueError("covariances must be symmetric")
        # Cholesky both validates positive definiteness and feeds the cache.
        object.__setattr__(self, "_chols", np.array([cholesky(ci, lower=True) for ci in c]))

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def cholesky_factors(self) -> np.ndarray:
        """Lower-triangular Cholesky factors, one per component."""
        return self._chols

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n i.i.d. samples; deterministic for a fixed generator state."""
        if n < 1:
            raise ValueError("n must be >= 1")
        idx = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        out = self.means[idx] + np.einsum("nij,nj->ni", self._chols[idx], z)
        return out

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lp = _component_logpdfs(x, self.means, self._chols)
        return logsumexp(np.log(self.weights)[None, :] + lp, axis=1)

    def log_responsibilities(self, x: np.ndarray) -> np.ndarray:
        """log p(component | x), shape (n, k)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lp = np.log(self.weights)[None, :] + _component_logpdfs(x, self.means, self._chols)
        return lp - logsumexp(lp, axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixture":
        unknown = set(d) - {"weights", "means", "covariances"}
        if unknown:
            raise ValueError(f"unknown mixture keys: {sorted(unknown)}")
        return cls(np.asarray(d["weights"]), np.asarray(d["means"]),
                   np.asarray(d["covariances"]))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "GaussianMixture":
        return cls.from_dict(yaml.safe_load(text))

    @classmethod
    def isotropic(cls, weights, means, variance: float) -> "GaussianMixture":
        means = np.atleast_2d(np.asarray(means, dtype=float))
        k, d = means.shape
        covs = np.broadcast_to(variance * np.eye(d), (k, d, d)).copy()
        return cls(np.asarray(weights, dtype=float), means, covs)


def standard_normal(dim: int = 1) -> GaussianMixture:
    return GaussianMixture(np.ones(1), np.zeros((1, dim)), np.eye(dim)[None])


def _component_logpdfs(x: np.ndarray, means: np.ndarray, chols: np.ndarray) -> np.ndarray:
    """Per-component Gaussian log-densities, shape (n, k)."""
    n, d = x.shape
    k = means.shape[0]
    out = np.empty((n, k))
    for p in range(k):
        L = chols[p]
        diff = x - means[p]
        sol = solve_triangular(L, diff.T, lower=True)
        quad = np.sum(sol**2, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        out[:, p] = -0.5 * (d * _LOG_2PI + logdet + quad)
    return out


@dataclass(frozen=True)
class DynamicsAt:
    """Velocity, score, denoiser and log-density at one (t, x) batch."""

    velocity: np.ndarray
    score: np.ndarray
    denoiser: np.ndarray
    log_density: np.ndarray


@dataclass(frozen=True)
class MixturePath:
    """Interpolant path between two Gaussian mixtures under a schedule."""

    base: GaussianMixture
    target: GaussianMixture
    schedule: InterpolantSchedule = field(default_factory=InterpolantSchedule)

    def __post_init__(self):
        if self.base.dim != self.target.dim:
            raise ValueError("base and target dimensions differ")

    @property
    def dim(self) -> int:
        return self.base.dim

    @cached_property
    def _pairs(self):
        """Static per-pair data: weights, base/target means and covariances."""
        kb, kt = self.base.n_components, self.target.n_components
        i_idx = np.repeat(np.arange(kb), kt)
        j_idx = np.tile(np.arange(kt), kb)
        return {
            "log_w": (np.log(self.base.weights)[i_idx] + np.log(self.target.weights)[j_idx]),
            "m": self.base.means[i_idx],
            "n": self.target.means[j_idx],
            "C": self.base.covariances[i_idx],
            "S": self.target.covariances[j_idx],
        }

    def components(self, t: float):
        """Pairwise mixture components at time t: (weights, means, covariances)."""
        a, b = self.schedule.alpha(t), self.schedule.beta(t)
        p = self._pairs
        means = a * p["m"] + b * p["n"]
        covs = a * a * p["C"] + b * b * p["S"]
        return np.exp(p["log_w"]), means, covs

    def _component_state(self, t: float, x: np.ndarray):
        """Responsibilities and per-pair conditioning terms at (t, x).

        Returns a dict with responsibilities r (n,P), solves u = Sigma^{-1}(x-mu)
        (n,P,d), log-density (n,), and the schedule scalars used.
        """
        a, b = self.schedule.alpha(t), self.schedule.beta(t)
        p = self._pairs
        means = a * p["m"] + b * p["n"]
        covs = a * a * p["C"] + b * b * p["S"]
        n_pts, d = x.shape
        P = means.shape[0]
        u = np.empty((n_pts, P, d))
        logpdf = np.empty((n_pts, P))
        for q in range(P):
            L = cholesky(covs[q], lower=True)
            diff = x - means[q]
            half = solve_triangular(L, diff.T, lower=True)
            u[:, q, :] = solve_triangular(L.T, half, lower=False).T
            logdet = 2.0 * np.sum(np.log(np.diag(L)))
            logpdf[:, q] = -0.5 * (d * _LOG_2PI + logdet + np.sum(half**2, axis=0))
        logjoint = p["log_w"][None, :] + logpdf
        logden = logsumexp(logjoint, axis=1)
        resp = np.exp(logjoint - logden[:, None])
        return {"alpha": a, "beta": b, "means": means, "covs": covs,
                "u": u, "resp": resp, "log_density": logden}

    def dynamics(self, t: float, x: np.ndarray) -> DynamicsAt:
        """Closed-form velocity, score, denoiser, log-density at (t, x)."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        x2 = np.atleast_2d(x)
        if not np.all(np.isfinite(x2)):
            raise ValueError("non-finite state")
        st = self._component_state(t, x2)
        a, b = st["alpha"], st["beta"]
        a_dot, b_dot = self.schedule.alpha_dot(t), self.schedule.beta_dot(t)
        p = self._pairs
        # Conditional means per pair: E[x1|x] = n + b*S u, E[x0|x] = m + a*C u.
        Su = np.einsum("pij,npj->npi", p["S"], st["u"])
        Cu = np.einsum("pij,npj->npi", p["C"], st["u"])
        e1 = p["n"][None] + b * Su
        e0 = p["m"][None] + a * Cu
        r = st["resp"]
        velocity = np.einsum("np,npi->ni", r, a_dot * e0 + b_dot * e1)
        score = -np.einsum("np,npi->ni", r, st["u"])
        denoiser = np.einsum("np,npi->ni", r, e1)
        if squeeze:
            return DynamicsAt(velocity[0], score[0], denoiser[0], st["log_density"][0])
        return DynamicsAt(velocity, score, denoiser, st["log_density"])

    def conditional_means(self, t: float, x: np.ndarray):
        """Posterior-averaged E[x0 | I_t=x] and E[x1 | I_t=x]."""
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        st = self._component_state(t, x2)
        a, b = st["alpha"], st["beta"]
        p = self._pairs
        e1 = p["n"][None] + b * np.einsum("pij,npj->npi", p["S"], st["u"])
        e0 = p["m"][None] + a * np.einsum("pij,npj->npi", p["C"], st["u"])
        r = st["resp"]
        return np.einsum("np,npi->ni", r, e0), np.einsum("np,npi->ni", r, e1)

    def velocity_jacobian(self, t: float, x: np.ndarray) -> np.ndarray:
        """Analytic spatial Jacobian of the velocity field, shape (n, d, d)."""
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        st = self._component_state(t, x2)
        a, b = st["alpha"], st["beta"]
        a_dot, b_dot = self.schedule.alpha_dot(t), self.schedule.beta_dot(t)
        p = self._pairs
        n_pts, d = x2.shape
        P = st["means"].shape[0]
        covs = st["covs"]
        r, u = st["resp"], st["u"]
        # v_p(x) = (a_dot*m + b_dot*n) + M_p (x - mu_p),  M_p = (a_dot*a*C + b_dot*b*S) Sigma^{-1}
        M = np.empty((P, d, d))
        for q in range(P):
            num = a_dot * a * p["C"][q] + b_dot * b * p["S"][q]
            M[q] = np.linalg.solve(covs[q].T, num.T).T
        Su = np.einsum("pij,npj->npi", p["S"], u)
        Cu = np.einsum("pij,npj->npi", p["C"], u)
        v = (a_dot * (p["m"][None] + a * Cu) + b_dot * (p["n"][None] + b * Su))
        score = -np.einsum("np,npi->ni", r, u)
        # grad log resp_p = -u_p - score
        g = -u - score[:, None, :]
        jac = np.einsum("np,pij->nij", r, M) + np.einsum("np,npi,npj->nij", r, v, g)
        if np.asarray(x).ndim == 1:
            return jac[0]
        return jac

    def denoiser_jacobian(self, t: float, x: np.ndarray) -> np.ndarray:
        """Analytic spatial Jacobian of the denoiser E[x1|I_t=x], (n, d, d)."""
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        st = self._component_state(t, x2)
        b = st["beta"]
        p = self._pairs
        n_pts, d = x2.shape
        P = st["means"].shape[0]
        r, u = st["resp"], st["u"]
        BS = np.empty((P, d, d))
        for q in range(P):
            BS[q] = np.linalg.solve(st["covs"][q].T, (b * p["S"][q]).T).T
        e1 = p["n"][None] + b * np.einsum("pij,npj->npi", p["S"], u)
        score = -np.einsum("np,npi->ni", r, u)
        g = -u - score[:, None, :]
        jac = np.einsum("np,pij->nij", r, BS) + np.einsum("np,npi,npj->nij", r, e1, g)
        if np.asarray(x).ndim == 1:
            return jac[0]
        return jac
