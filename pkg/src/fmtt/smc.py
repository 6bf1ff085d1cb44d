"""Sequential Monte Carlo driver for reward-tilted interpolant dynamics.

Particles are initialized from the base density, propagated by the tilted
position SDE, and reweighted by the chosen log-weight scheme.  In sampling
mode, resampling by the softmax of the log-weights is triggered either when
the effective sample size drops below a threshold, periodically, or at
explicit steps; in searching mode the ensemble is greedily truncated to the
top-n states by the current look-ahead reward and recloned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DegenerateEnsembleError
from .flowmap import MemoizedFlowMap
from .mixtures import MixturePath
from .rewards import TimeDependentReward
from .tilt import (CHI_CHOICES, WEIGHT_SCHEMES, DriftMultiplier, StepInput,
                   position_step, weight_step_expectation, weight_step_ito,
                   weight_step_laplacian, weight_step_simplified)


@dataclass
class ParticleEnsemble:
    """Flat ensemble of n_particles * clones states with log-weights."""

    positions: np.ndarray
    logweights: np.ndarray
    n_particles: int
    clones: int = 1
    generation: int = 0

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.logweights = np.atleast_1d(np.asarray(self.logweights, dtype=float))
        if self.positions.shape[0] != self.n_particles * self.clones:
            raise ValueError("positions must hold n_particles * clones states")
        if self.logweights.shape[0] != self.positions.shape[0]:
            raise ValueError("one log-weight per state required")

    @property
    def size(self) -> int:
        return self.positions.shape[0]


def ess(logweights: np.ndarray) -> float:
    """Effective sample size (sum w)^2 / sum w^2, computed in log-space."""
    a = np.asarray(logweights, dtype=float)
    m = np.max(a)
    if not np.isfinite(m):
        raise DegenerateEnsembleError("no finite log-weight in the ensemble")
    w = np.exp(a - m)
    return float(w.sum() ** 2 / np.sum(w**2))


def _normalized_weights(logweights: np.ndarray) -> np.ndarray:
    a = np.asarray(logweights, dtype=float)
    m = np.max(a)
    if not np.isfinite(m):
        raise DegenerateEnsembleError("no finite log-weight in the ensemble")
    w = np.exp(a - m)
    return w / w.sum()


def weighted_expectation(ensemble_or_logw, h, positions: np.ndarray | None = None):
    """Self-normalized weighted mean of the observable h over the ensemble."""
    if isinstance(ensemble_or_logw, ParticleEnsemble):
        logw, pos = ensemble_or_logw.logweights, ensemble_or_logw.positions
    else:
        logw, pos = np.asarray(ensemble_or_logw, dtype=float), np.atleast_2d(positions)
    w = _normalized_weights(logw)
    vals = np.asarray(h(pos), dtype=float)
    return float(np.sum(w * vals)) if vals.ndim == 1 else w @ vals


def _ancestors_multinomial(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(probs.shape[0], size=probs.shape[0], p=probs)


def _ancestors_systematic(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = probs.shape[0]
    u = (rng.random() + np.arange(n)) / n
    return np.searchsorted(np.cumsum(probs), u).clip(max=n - 1)


def resample(ensemble: ParticleEnsemble, rng: np.random.Generator,
             scheme: str = "systematic") -> ParticleEnsemble:
    """Draw ancestors by the softmax of the log-weights; reset weights to 0."""
    probs = _normalized_weights(ensemble.logweights)
    if scheme == "systematic":
        idx = _ancestors_systematic(probs, rng)
    elif scheme == "multinomial":
        idx = _ancestors_multinomial(probs, rng)
    else:
        raise ValueError(f"unknown resampling scheme {scheme!r}")
    return ParticleEnsemble(ensemble.positions[idx], np.zeros(ensemble.size),
                            ensemble.n_particles, ensemble.clones,
                            ensemble.generation)


def top_n_select(ensemble: ParticleEnsemble, scores: np.ndarray, n: int) -> ParticleEnsemble:
    """Keep the n highest-scoring states (ties to the lower flat index) and
    reclone each survivor to the ensemble's clone count; weights reset to 0."""
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    keep = np.sort(order[:n])
    positions = np.repeat(ensemble.positions[keep], ensemble.clones, axis=0)
    return ParticleEnsemble(positions, np.zeros(n * ensemble.clones),
                            n, ensemble.clones, ensemble.generation)


@dataclass(frozen=True)
class RunConfig:
    """Configuration of one SMC run."""

    n_particles: int = 128
    n_steps: int = 200
    clones: int = 1
    schedule_times: np.ndarray | None = None
    mode: str = "sampling"
    chi: str = "default"
    weight_scheme: str = "simplified"
    resampling: dict = field(default_factory=lambda: {"kind": "ess", "threshold": 0.85})
    resample_method: str = "systematic"
    expectation_samples: int = 16
    hutchinson_probes: int = 64
    hutchinson_eps: float = 1e-3
    hutchinson_probe: str = "gaussian"
    paper_literal: bool = False
    seed: int = 0

    def times(self) -> np.ndarray:
        if self.schedule_times is None:
            return np.linspace(0.0, 1.0, self.n_steps + 1)
        ts = np.asarray(self.schedule_times, dtype=float)
        if ts.ndim != 1 or ts.shape[0] != self.n_steps + 1:
            raise ConfigError("schedule must have n_steps + 1 knots")
        if ts[0] != 0.0 or ts[-1] != 1.0 or np.any(np.diff(ts) <= 0):
            raise ConfigError("schedule must increase strictly from 0 to 1")
        return ts

    def validate(self, rt: TimeDependentReward) -> None:
        if self.n_particles < 1 or self.n_steps < 1 or self.clones < 1:
            raise ConfigError("n_particles, n_steps and clones must be >= 1")
        if self.mode not in ("sampling", "searching"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.chi not in CHI_CHOICES:
            raise ConfigError(f"unknown chi choice {self.chi!r}")
        if self.weight_scheme not in WEIGHT_SCHEMES:
            raise ConfigError(f"unknown weight scheme {self.weight_scheme!r}")
        if self.weight_scheme == "simplified":
            if self.chi != "default":
                raise ConfigError("simplified weights require chi = default")
            if not rt.is_flowmap():
                raise ConfigError("simplified weights require a flow-map look-ahead reward")
        kind = self.resampling.get("kind")
        if kind == "ess":
            tau = self.resampling.get("threshold", 0.85)
            if not 0.0 < tau <= 1.0:
                raise ConfigError("ESS threshold must lie in (0, 1]")
        elif kind == "every":
            r = self.resampling.get("r")
            if not (isinstance(r, int) and r >= 1 and self.n_steps % r == 0):
                raise ConfigError("periodic resampling interval must divide n_steps")
        elif kind == "at_steps":
            steps = self.resampling.get("steps", [])
            if any(not 1 <= s <= self.n_steps for s in steps):
                raise ConfigError("explicit resampling steps must lie in [1, n_steps]")
        elif kind != "never":
            raise ConfigError(f"unknown resampling kind {kind!r}")
        self.times()


@dataclass
class RunResult:
    """Trace of one SMC run."""

    ensemble: ParticleEnsemble
    times: np.ndarray
    ess_history: np.ndarray
    resample_steps: list
    resample_log_means: list
    log_z_history: np.ndarray
    mean_reward_history: np.ndarray
    prev_logweights: np.ndarray
    log_g: np.ndarray
    mode: str

    def log_z(self, k: int | None = None) -> float:
        k = self.log_z_history.shape[0] if k is None else k
        if self.mode == "searching":
            return float("nan")
        return float(self.log_z_history[k - 1])


def _step_rng(seed: int, step: int, channel: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, step, channel); thread-safe
    determinism independent of execution order."""
    return np.random.Generator(np.random.Philox(key=[seed, (step << 8) + channel]))


def z_smc(result: RunResult, k: int | None = None) -> float:
    """Unbiased normalization estimate at step k (product of pre-reset mean
    weights over earlier resampling events, times the current mean weight)."""
    lz = result.log_z(k)
    return float(np.exp(lz))


def run(cfg: RunConfig, path: MixturePath, rt: TimeDependentReward) -> RunResult:
    """Execute the full propagate / reweight / resample-or-select loop."""
    cfg.validate(rt)
    if rt.is_flowmap() and not isinstance(rt.flow, MemoizedFlowMap):
        rt = TimeDependentReward(rt.base, rt.mode, rt.path,
                                 MemoizedFlowMap(rt.flow), rt.k, rt.k_scheme)
    ts = cfg.times()
    chi = DriftMultiplier(cfg.chi)
    n, c = cfg.n_particles, cfg.clones
    total = n * c
    d = path.dim

    init_rng = _step_rng(cfg.seed, 0, 0)
    x0 = path.base.sample(n, init_rng)
    ens = ParticleEnsemble(np.repeat(x0, c, axis=0), np.zeros(total), n, c)

    K = cfg.n_steps
    ess_hist = np.empty(K)
    log_z_hist = np.empty(K)
    mean_r_hist = np.empty(K)
    prev_logw = np.empty((K, total))
    log_g = np.empty((K, total))
    resample_steps: list[int] = []
    resample_log_means: list[float] = []
    log_z_events = 0.0

    kind = cfg.resampling.get("kind")
    explicit = set(cfg.resampling.get("steps", [])) if kind == "at_steps" else set()

    for k in range(1, K + 1):
        t, t_next = ts[k - 1], ts[k]
        noise = _step_rng(cfg.seed, k, 1).standard_normal((total, d))
        inp = StepInput(ens.positions, ens.logweights, t, t_next, noise)
        x_next = position_step(inp, chi, rt, path)

        if cfg.weight_scheme == "simplified":
            a_next = weight_step_simplified(inp, rt)
        elif cfg.weight_scheme == "laplacian":
            a_next = weight_step_laplacian(
                inp, chi, rt, path, cfg.hutchinson_probes, cfg.hutchinson_eps,
                _step_rng(cfg.seed, k, 2), cfg.hutchinson_probe)
        elif cfg.weight_scheme == "ito":
            a_next = weight_step_ito(inp, chi, rt, path, x_next)
        else:
            a_next = weight_step_expectation(
                inp, chi, rt, path, cfg.expectation_samples,
                _step_rng(cfg.seed, k, 2), cfg.paper_literal)

        prev_logw[k - 1] = ens.logweights
        log_g[k - 1] = a_next - ens.logweights
        ens = ParticleEnsemble(x_next, a_next, n, c, k)

        ess_hist[k - 1] = ess(ens.logweights)
        log_mean_w = float(logsumexp(ens.logweights) - np.log(total))
        log_z_hist[k - 1] = log_z_events + log_mean_w
        mean_r_hist[k - 1] = float(np.mean(rt.value(t_next, ens.positions)))

        if k == K:
            break
        if kind == "never":
            trigger = False
        elif kind == "ess":
            trigger = ess_hist[k - 1] < cfg.resampling.get("threshold", 0.85) * total
        elif kind == "every":
            trigger = k % cfg.resampling["r"] == 0
        else:
            trigger = k in explicit
        if trigger:
            resample_steps.append(k)
            resample_log_means.append(log_mean_w)
            if cfg.mode == "sampling":
                log_z_events += log_mean_w
                ens = resample(ens, _step_rng(cfg.seed, k, 3), cfg.resample_method)
            else:
                scores = rt.value(t_next, ens.positions)
                ens = top_n_select(ens, scores, n)

    return RunResult(ens, ts, ess_hist, resample_steps, resample_log_means,
                     log_z_hist, mean_r_hist, prev_logw, log_g, cfg.mode)
