"""Terminal rewards and their time-dependent look-ahead extensions.

A terminal reward r(x) is lifted to r_t(x) by one of three look-ahead modes:
naive (r at the current state), denoiser (r at the conditional mean of the
endpoint), or flow map (r at the ODE-exact or few-step predicted endpoint),
each scaled by t so that r_0 = 0 and r_1 = r.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .flowmap import FlowMapEvaluator, MemoizedFlowMap
from .mixtures import GaussianMixture, MixturePath


class Reward:
    """Scalar reward with an analytic gradient; batched over (n, d) inputs."""

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearReward(Reward):
    """r(x) = coeffs . x"""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=float)))

    def value(self, x):
        return np.atleast_2d(x) @ self.coeffs

    def grad(self, x):
        x2 = np.atleast_2d(x)
        return np.broadcast_to(self.coeffs, x2.shape).copy()


@dataclass(frozen=True)
class QuadraticReward(Reward):
    """r(x) = -gamma * ||x||^2 / 2"""

    gamma: float = 1.0

    def value(self, x):
        x2 = np.atleast_2d(x)
        return -0.5 * self.gamma * np.sum(x2**2, axis=-1)

    def grad(self, x):
        return -self.gamma * np.atleast_2d(x)


@dataclass(frozen=True)
class LogResponsibilityReward(Reward):
    """r(x) = scale * log p(component | x) under the given mixture.

    The analytic analogue of a classifier log-likelihood reward: the
    posterior probability that x belongs to the chosen component.
    """

    mixture: GaussianMixture
    component: int
    scale: float = 1.0

    def __post_init__(self):
        if not 0 <= self.component < self.mixture.n_components:
            raise ValueError("component index out of range")

    def value(self, x):
        return self.scale * self.mixture.log_responsibilities(x)[:, self.component]

    def grad(self, x):
        x2 = np.atleast_2d(x)
        resp = np.exp(self.mixture.log_responsibilities(x2))
        k = self.mixture.n_components
        u = np.empty((x2.shape[0], k, x2.shape[1]))
        for q in range(k):
            diff = x2 - self.mixture.means[q]
            u[:, q, :] = np.linalg.solve(
                self.mixture.covariances[q], diff.T
            ).T
        # grad log p(c|x) = -u_c + sum_j p(j|x) u_j
        g = -u[:, self.component, :] + np.einsum("nk,nki->ni", resp, u)
        return self.scale * g


@dataclass(frozen=True)
class ZeroReward(Reward):
    def value(self, x):
        return np.zeros(np.atleast_2d(x).shape[0])

    def grad(self, x):
        return np.zeros_like(np.atleast_2d(x), dtype=float)


@dataclass(frozen=True)
class CustomReward(Reward):
    """Arbitrary scalar field; gradient falls back to central differences."""

    fn: Callable[[np.ndarray], np.ndarray]
    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None
    fd_step: float = 1e-6

    def value(self, x):
        return np.asarray(self.fn(np.atleast_2d(x)), dtype=float)

    def grad(self, x):
        x2 = np.atleast_2d(x)
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(x2), dtype=float)
        g = np.empty_like(x2)
        for i in range(x2.shape[1]):
            e = np.zeros(x2.shape[1])
            e[i] = self.fd_step
            g[:, i] = (self.value(x2 + e) - self.value(x2 - e)) / (2 * self.fd_step)
        return g


MODES = ("naive", "denoiser", "flowmap_exact", "flowmap_ksteps")


class TimeDependentReward:
    """Look-ahead reward r_t(x) with analytic gradients through the mode."""

    def __init__(self, base: Reward, mode: str, path: MixturePath | None = None,
                 flow: FlowMapEvaluator | MemoizedFlowMap | None = None,
                 k: int = 4, k_scheme: str = "euler"):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        if mode != "naive" and path is None:
            raise ValueError(f"mode {mode!r} requires a path")
        if mode.startswith("flowmap") and flow is None:
            flow = FlowMapEvaluator(path, rel_tol=1e-7, abs_tol=1e-9)
        self.base = base
        self.mode = mode
        self.path = path
        self.flow = flow
        self.k = k
        self.k_scheme = k_scheme

    def is_flowmap(self) -> bool:
        return self.mode.startswith("flowmap")

    def _endpoint(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.mode == "naive":
            return np.atleast_2d(x)
        if self.mode == "denoiser":
            if t == 1.0:
                return np.atleast_2d(x)
            return np.atleast_2d(self.path.dynamics(t, np.atleast_2d(x)).denoiser)
        if self.mode == "flowmap_exact":
            return np.atleast_2d(self.flow.flow_map(t, 1.0, np.atleast_2d(x)))
        return np.atleast_2d(
            self.flow.k_step_map(t, 1.0, np.atleast_2d(x), self.k, self.k_scheme))

    def terminal_lookahead(self, t: float, x: np.ndarray) -> np.ndarray:
        """r evaluated at the predicted endpoint (no factor t)."""
        return self.base.value(self._endpoint(t, x))

    def value(self, t: float, x: np.ndarray) -> np.ndarray:
        if t == 0.0:
            return np.zeros(np.atleast_2d(x).shape[0])
        return t * self.terminal_lookahead(t, x)

    def grad(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.value_and_grad(t, x)[1]

    def value_and_grad(self, t: float, x: np.ndarray):
        """(r_t(x), grad r_t(x)) with one look-ahead solve in flow-map mode."""
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        if self.mode == "naive":
            return t * self.base.value(x2), t * self.base.grad(x2)
        if self.mode == "denoiser":
            if t == 1.0:
                return self.base.value(x2), self.base.grad(x2)
            end = self.path.dynamics(t, x2).denoiser
            jac = self.path.denoiser_jacobian(t, x2)
        elif self.mode == "flowmap_exact":
            res = self.flow.flow_map_jacobian(t, 1.0, x2)
            end, jac = np.atleast_2d(res.endpoint), res.jacobian
        else:
            res = self.flow.k_step_map_jacobian(t, 1.0, x2, self.k, self.k_scheme)
            end, jac = np.atleast_2d(res.endpoint), res.jacobian
        jac = jac.reshape(x2.shape[0], x2.shape[1], x2.shape[1])
        gr = self.base.grad(end)
        return t * self.base.value(end), t * np.einsum("nij,ni->nj", jac, gr)

    def lookahead_value_and_grad(self, t: float, x: np.ndarray):
        """(r(endpoint), r_t(x), grad r_t(x)); shares the Jacobian solve."""
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        if self.mode == "naive":
            v = self.base.value(x2)
            return v, t * v, t * self.base.grad(x2)
        val, grad = self.value_and_grad(t, x2)
        if t == 0.0:
            look = self.terminal_lookahead(t, x2)
        else:
            look = val / t
        return look, val, grad

    def time_derivative(self, t: float, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
        """Central finite difference of r_t(x) in t; one-sided at the ends."""
        lo, hi = max(t - h, 0.0), min(t + h, 1.0)
        if hi == lo:
            raise ValueError("degenerate finite-difference stencil")
        return (self.value(hi, x) - self.value(lo, x)) / (hi - lo)


def hutchinson_laplacian(rt: TimeDependentReward, t: float, x: np.ndarray,
                         m_probes: int = 64, eps: float = 1e-3,
                         rng: np.random.Generator | None = None,
                         probe: str = "gaussian") -> np.ndarray:
    """Stochastic trace estimate of the Laplacian of r_t.

    Averages z . [grad r_t(x + eps z) - grad r_t(x - eps z)] / (2 eps) over
    random probes z (Gaussian or Rademacher).
    """
    if m_probes < 1:
        raise ValueError("m_probes must be >= 1")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    rng = rng or np.random.default_rng()
    x2 = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x2.shape
    total = np.zeros(n)
    for _ in range(m_probes):
        if probe == "gaussian":
            z = rng.standard_normal((n, d))
        elif probe == "rademacher":
            z = rng.integers(0, 2, size=(n, d)) * 2.0 - 1.0
        else:
            raise ValueError(f"unknown probe kind {probe!r}")
        gp = rt.grad(t, x2 + eps * z)
        gm = rt.grad(t, x2 - eps * z)
        total += np.einsum("ni,ni->n", z, gp - gm)
    return total / (2.0 * m_probes * eps)
