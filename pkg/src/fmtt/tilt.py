"""Reward-tilted SDE steps and the matching log-weight updates.

One Euler-Maruyama step of the tilted position dynamics

    x' = x + dt * [b_t + chi_t * grad r_t + eps_t * (s_t + grad r_t)] + sqrt(2 eps_t dt) * xi

for any drift-multiplier choice chi, together with four discretizations of
the accompanying log-weight ODE: the flow-map simplification (valid for
chi = 0), a Laplacian-corrected Euler update, an Ito forward/backward
difference update, and an inner-expectation update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import SchemeCompatibilityError
from .mixtures import MixturePath
from .rewards import TimeDependentReward, hutchinson_laplacian

CHI_CHOICES = ("default", "tilted_score", "local_tilt", "base")
WEIGHT_SCHEMES = ("simplified", "laplacian", "ito", "expectation")


@dataclass(frozen=True)
class DriftMultiplier:
    """Selects the coefficient chi_t of the extra reward-gradient drift term.

    default: chi = 0; tilted_score: chi = eta_t; local_tilt: chi = eps_t;
    base: chi = -eps_t (cancels the score-tilt term, reward enters weights
    only).
    """

    choice: str = "default"

    def __post_init__(self):
        if self.choice not in CHI_CHOICES:
            raise ValueError(f"unknown chi choice {self.choice!r}; expected one of {CHI_CHOICES}")

    def value(self, schedule, t: float) -> float:
        if self.choice == "default":
            return 0.0
        if self.choice == "tilted_score":
            return schedule.eta(t)
        eps = schedule.epsilon(t)
        return eps if self.choice == "local_tilt" else -eps


@dataclass(frozen=True)
class StepInput:
    """State, log-weight, step times, and the shared Gaussian increment."""

    x: np.ndarray
    logweight: np.ndarray
    t: float
    t_next: float
    noise: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_2d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "noise", np.atleast_2d(np.asarray(self.noise, dtype=float)))
        object.__setattr__(self, "logweight",
                           np.atleast_1d(np.asarray(self.logweight, dtype=float)))
        if not self.t < self.t_next:
            raise ValueError("require t < t_next")
        if self.noise.shape != self.x.shape:
            raise ValueError("noise shape must match state shape")
        if self.logweight.shape[0] != self.x.shape[0]:
            raise ValueError("logweight length must match particle count")

    @property
    def dt(self) -> float:
        return self.t_next - self.t


def position_step(inp: StepInput, chi: DriftMultiplier, rt: TimeDependentReward,
                  path: MixturePath) -> np.ndarray:
    """One Euler-Maruyama step of the tilted position SDE."""
    sched = path.schedule
    eps = sched.epsilon(inp.t)
    c = chi.value(sched, inp.t)
    dyn = path.dynamics(inp.t, inp.x)
    drift = dyn.velocity + eps * dyn.score
    coeff = c + eps
    if coeff != 0.0:
        drift = drift + coeff * rt.grad(inp.t, inp.x)
    return inp.x + inp.dt * drift + np.sqrt(2.0 * eps * inp.dt) * inp.noise


def weight_step_simplified(inp: StepInput, rt: TimeDependentReward) -> np.ndarray:
    """Log-weight update A' = A + dt * r(endpoint prediction at time t).

    Valid for chi = 0 with a flow-map look-ahead reward; the update is well
    defined at t = 0 (no division by t).
    """
    if not rt.is_flowmap():
        raise SchemeCompatibilityError("simplified weights require a flow-map look-ahead reward")
    return inp.logweight + inp.dt * rt.terminal_lookahead(inp.t, inp.x)


def _drift_bracket(inp: StepInput, rt: TimeDependentReward, path: MixturePath,
                   td_step: float = 1e-4):
    """Reward transport term D and grad r_t at (t, x).

    In flow-map mode D = r(X_{t,1}(x)); otherwise D = b . grad r_t + d/dt r_t
    with the time derivative by finite differences.
    """
    if rt.is_flowmap():
        look, _, grad = rt.lookahead_value_and_grad(inp.t, inp.x)
        return look, grad
    grad = rt.grad(inp.t, inp.x)
    b = path.dynamics(inp.t, inp.x).velocity
    d = np.einsum("ni,ni->n", b, grad) + rt.time_derivative(inp.t, inp.x, td_step)
    return d, grad


def weight_step_laplacian(inp: StepInput, chi: DriftMultiplier, rt: TimeDependentReward,
                          path: MixturePath, m_probes: int = 64, probe_eps: float = 1e-3,
                          rng: np.random.Generator | None = None,
                          probe: str = "gaussian") -> np.ndarray:
    """Euler log-weight update with a Hutchinson Laplacian correction.

    A' = A + dt * [D + chi * (||grad r_t||^2 + lap r_t + grad r_t . s_t)];
    the Laplacian estimate is skipped entirely when chi = 0.
    """
    c = chi.value(path.schedule, inp.t)
    d, grad = _drift_bracket(inp, rt, path)
    incr = d
    if c != 0.0:
        score = path.dynamics(inp.t, inp.x).score
        lap = hutchinson_laplacian(rt, inp.t, inp.x, m_probes, probe_eps, rng, probe)
        incr = incr + c * (np.einsum("ni,ni->n", grad, grad) + lap
                           + np.einsum("ni,ni->n", grad, score))
    return inp.logweight + inp.dt * incr


def _ito_coefficient(c: float, eps: float, t: float) -> float:
    """chi / sqrt(2 eps), with 0 when chi vanishes and an error at eps = 0."""
    if c == 0.0:
        return 0.0
    if eps <= 0.0:
        raise SchemeCompatibilityError(
            f"Ito-difference weights need eps > 0 where chi != 0 (t={t})")
    return c / np.sqrt(2.0 * eps)


def weight_step_ito(inp: StepInput, chi: DriftMultiplier, rt: TimeDependentReward,
                    path: MixturePath, x_next: np.ndarray) -> np.ndarray:
    """Log-weight update from the forward/backward Ito integral difference.

    The same Gaussian increment used in the position step must be supplied
    in the StepInput; the forward-integral gradient is evaluated at the
    post-step state x_next.
    """
    sched = path.schedule
    c_t = chi.value(sched, inp.t)
    c_tn = chi.value(sched, inp.t_next)
    d, grad = _drift_bracket(inp, rt, path)
    incr = d
    if c_t != 0.0:
        score = path.dynamics(inp.t, inp.x).score
        incr = incr + c_t * (np.einsum("ni,ni->n", grad, grad)
                             + np.einsum("ni,ni->n", grad, score))
    out = inp.logweight + inp.dt * incr
    sq = np.sqrt(inp.dt)
    coef_fwd = _ito_coefficient(c_tn, sched.epsilon(inp.t_next), inp.t_next)
    coef_bwd = _ito_coefficient(c_t, sched.epsilon(inp.t), inp.t)
    if coef_fwd != 0.0:
        grad_next = rt.grad(inp.t_next, np.atleast_2d(x_next))
        out = out + coef_fwd * sq * np.einsum("ni,ni->n", grad_next, inp.noise)
    if coef_bwd != 0.0:
        out = out - coef_bwd * sq * np.einsum("ni,ni->n", grad, inp.noise)
    return out


def weight_step_expectation(inp: StepInput, chi: DriftMultiplier, rt: TimeDependentReward,
                            path: MixturePath, m_samples: int = 16,
                            rng: np.random.Generator | None = None,
                            paper_literal: bool = False) -> np.ndarray:
    """Log-weight update from an inner expectation of exp(reward increments).

    With g = (1/M) sum_m exp(r_{t'}(y_m) - r_t(x)) over perturbed one-step
    predictions y_m, the update is A' = A + log g for chi >= 0 and
    A' = A + 2*[r_{t'}(x + dt b) - r_t(x)] - log g for chi < 0.  At chi = 0
    both branches degenerate to the noise-free A' = A + r_{t'}(y) - r_t(x).

    ``paper_literal`` uses g itself (no log) as the additive increment,
    reproducing a multiplicative-form variant of the update.
    """
    if m_samples < 1:
        raise ValueError("m_samples must be >= 1")
    sched = path.schedule
    c = chi.value(sched, inp.t)
    dyn = path.dynamics(inp.t, inp.x)
    r_here = rt.value(inp.t, inp.x)
    if c == 0.0:
        y = inp.x + inp.dt * dyn.velocity
        return inp.logweight + rt.value(inp.t_next, y) - r_here
    rng = rng or np.random.default_rng()
    mean_drifted = inp.x + inp.dt * (dyn.velocity + abs(c) * dyn.score)
    scale = np.sqrt(2.0 * abs(c) * inp.dt)
    deltas = np.empty((m_samples, inp.x.shape[0]))
    for m in range(m_samples):
        y = mean_drifted + scale * rng.standard_normal(inp.x.shape)
        deltas[m] = rt.value(inp.t_next, y) - r_here
    log_g = logsumexp(deltas, axis=0) - np.log(m_samples)
    if c > 0.0:
        incr = np.exp(log_g) if paper_literal else log_g
        return inp.logweight + incr
    drift_only = rt.value(inp.t_next, inp.x + inp.dt * dyn.velocity) - r_here
    tail = np.exp(log_g) if paper_literal else log_g
    return inp.logweight + 2.0 * drift_only - tail
