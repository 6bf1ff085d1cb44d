"""Command-line entry point: configuration-driven runs and verification.

Subcommands: sample (SMC sampling run), search (greedy top-n search with a
no-search baseline), diagnose (discrepancy and barrier estimation), refine
(iterative schedule refinement), verify (invariant suites).  Outputs go to
one directory per run with a resolved-config snapshot for provenance.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .config import ExperimentConfig
from .errors import ConfigError, DiagnosticsUndefinedError, FmttError
from .oracles import gaussian_tilt_closed_form, snis_tilted_expectation
from .smc import RunResult, run, weighted_expectation
from .verify import SUITES, run_suites


def _apply_thread_cap() -> None:
    cap = os.environ.get("FMTT_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _write_trace_csv(path: Path, result: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "t", "ess", "resampled", "logZ", "mean_reward"])
        resampled = set(result.resample_steps)
        for k in range(result.ess_history.shape[0]):
            writer.writerow([k + 1, f"{result.times[k + 1]:.10g}",
                             f"{result.ess_history[k]:.10g}",
                             int((k + 1) in resampled),
                             f"{result.log_z_history[k]:.10g}",
                             f"{result.mean_reward_history[k]:.10g}"])


def _write_diagnostics_csv(path: Path, trace: dg.DiscrepancyTrace,
                           profile: dg.BarrierProfile) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "t", "D_hat", "Lambda_cum"])
        for k in range(trace.n_steps):
            writer.writerow([k + 1, f"{trace.times[k + 1]:.10g}",
                             f"{trace.d_hat[k]:.10g}",
                             f"{profile.lambda_cum[k + 1]:.10g}"])


def _weighted_mean_with_stderr(result: RunResult):
    """Self-normalized mean of each coordinate with a delta-method stderr."""
    logw = result.ensemble.logweights
    pos = result.ensemble.positions
    w = np.exp(logw - logw.max())
    w = w / w.sum()
    mean = w @ pos
    var = np.einsum("n,ni->i", w**2, (pos - mean) ** 2)
    return mean, np.sqrt(var)


def _diagnostics_summary(trace: dg.DiscrepancyTrace) -> dict:
    profile = dg.thermodynamic_length(trace)
    out = {"D_total": dg.total_discrepancy(trace), "Lambda": profile.total}
    try:
        out["quality_ratio"] = dg.quality_ratio(trace)
    except DiagnosticsUndefinedError:
        out["quality_ratio"] = None
    return out


def _oracle_comparison(cfg: ExperimentConfig, rng: np.random.Generator) -> dict | None:
    """Ground-truth tilted mean where an oracle applies: closed form for
    linear/quadratic tilts of a single-Gaussian target, SNIS otherwise."""
    if cfg.reward_kind == "zero":
        return None
    if cfg.target.n_components == 1 and cfg.target.dim == 1:
        mu = float(cfg.target.means[0, 0])
        var = float(cfg.target.covariances[0, 0, 0])
        if cfg.reward_kind == "linear":
            lam = float(np.asarray(cfg.reward_params.get("coeffs", [1.0])).ravel()[0])
            tilt = gaussian_tilt_closed_form(mu, var, linear=lam)
            return {"kind": "closed_form", "oracle_mean": tilt.mean,
                    "oracle_stderr": 0.0}
        if cfg.reward_kind == "quadratic":
            gam = float(cfg.reward_params.get("gamma", 1.0))
            tilt = gaussian_tilt_closed_form(mu, var, quadratic=gam)
            return {"kind": "closed_form", "oracle_mean": tilt.mean,
                    "oracle_stderr": 0.0}
    if cfg.target.dim <= 2:
        est = snis_tilted_expectation(cfg.target, cfg.build_base_reward(),
                                      lambda x: x[:, 0], 10**6, rng)
        return {"kind": "snis", "oracle_mean": est.estimate,
                "oracle_stderr": est.stderr}
    return None


def _prepare(args):
    cfg = ExperimentConfig.from_file(args.config, args.seed)
    if args.paper_literal:
        cfg = replace(cfg, run=replace(cfg.run, paper_literal=True))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_resolved.yaml").write_text(cfg.resolved_yaml())
    path = cfg.build_path()
    rt = cfg.build_reward(path)
    return cfg, out, path, rt


def cmd_sample(args) -> int:
    cfg, out, path, rt = _prepare(args)
    if cfg.run.mode != "sampling":
        raise ConfigError("sample command requires mode: sampling")
    result = run(cfg.run, path, rt)
    _write_trace_csv(out / "trace.csv", result)
    summary = {"command": "sample", "seed": cfg.run.seed,
               "log_z": result.log_z(), "terminal_ess": float(result.ess_history[-1]),
               "resample_steps": result.resample_steps}
    mean, stderr = _weighted_mean_with_stderr(result)
    summary["tilted_mean"] = [float(m) for m in mean]
    summary["tilted_mean_stderr"] = [float(s) for s in stderr]
    oracle = _oracle_comparison(cfg, np.random.default_rng(cfg.run.seed + 10**6))
    if oracle is not None:
        summary["oracle"] = oracle
    if cfg.diagnostics_enabled:
        trace = dg.trace_from_run(result, cfg.run.paper_literal)
        _write_diagnostics_csv(out / "diagnostics.csv", trace,
                               dg.thermodynamic_length(trace))
        summary["diagnostics"] = _diagnostics_summary(trace)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return 0


def cmd_search(args) -> int:
    cfg, out, path, rt = _prepare(args)
    if cfg.run.mode != "searching":
        raise ConfigError("search command requires mode: searching")
    result = run(cfg.run, path, rt)
    _write_trace_csv(out / "trace.csv", result)
    terminal_rewards = rt.value(1.0, result.ensemble.positions)
    baseline_cfg = replace(cfg.run, mode="sampling", clones=1,
                           resampling={"kind": "never"})
    baseline = run(baseline_cfg, path, rt)
    base_rewards = rt.value(1.0, baseline.ensemble.positions)
    summary = {
        "command": "search", "seed": cfg.run.seed,
        "mean_terminal_reward": float(np.mean(terminal_rewards)),
        "terminal_reward_stderr": float(np.std(terminal_rewards)
                                        / np.sqrt(terminal_rewards.size)),
        "baseline_mean_terminal_reward": float(np.mean(base_rewards)),
        "baseline_reward_stderr": float(np.std(base_rewards)
                                        / np.sqrt(base_rewards.size)),
        "selection_steps": result.resample_steps,
    }
    np.savetxt(out / "terminal_rewards.csv", terminal_rewards,
               header="terminal_reward", comments="")
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return 0


def _estimate_trace(cfg: ExperimentConfig, path, rt, schedule_times, seed_shift: int):
    results = []
    for j in range(cfg.diagnostics_runs):
        rc = replace(cfg.run, schedule_times=schedule_times,
                     seed=cfg.run.seed + seed_shift + j)
        results.append(run(rc, path, rt))
    return dg.trace_from_runs(results, cfg.run.paper_literal)


def cmd_diagnose(args) -> int:
    cfg, out, path, rt = _prepare(args)
    if cfg.run.mode != "sampling":
        raise ConfigError("diagnose command requires mode: sampling")
    trace = _estimate_trace(cfg, path, rt, cfg.run.schedule_times, 0)
    profile = dg.thermodynamic_length(trace)
    _write_diagnostics_csv(out / "diagnostics.csv", trace, profile)
    refined = dg.refine_schedule(profile, cfg.run.n_steps)
    summary = {"command": "diagnose", "seed": cfg.run.seed,
               "n_runs": cfg.diagnostics_runs, "flat_profile": refined.flat}
    summary.update(_diagnostics_summary(trace))
    (out / "refined_schedule.yaml").write_text(
        "schedule_times:\n" + "".join(f"- {t:.12g}\n" for t in refined.times))
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return 0


def cmd_refine(args) -> int:
    cfg, out, path, rt = _prepare(args)
    if cfg.run.mode != "sampling":
        raise ConfigError("refine command requires mode: sampling")
    times = cfg.run.schedule_times
    rounds = []
    for rnd in range(cfg.refinement_rounds):
        trace = _estimate_trace(cfg, path, rt, times, 1000 * rnd)
        profile = dg.thermodynamic_length(trace)
        entry = {"round": rnd, "flat_profile": False}
        entry.update(_diagnostics_summary(trace))
        refined = dg.refine_schedule(profile, cfg.run.n_steps)
        entry["flat_profile"] = refined.flat
        rounds.append(entry)
        if refined.flat:
            break
        times = refined.times
    final = np.linspace(0.0, 1.0, cfg.run.n_steps + 1) if times is None else times
    (out / "refined_schedule.yaml").write_text(
        "schedule_times:\n" + "".join(f"- {t:.12g}\n" for t in final))
    summary = {"command": "refine", "seed": cfg.run.seed, "rounds": rounds}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return 0


def cmd_verify(args) -> int:
    report = run_suites(args.only)
    width = max(len(f"{m}.{n}") for m, n, _, _ in report)
    failures = 0
    for module, name, ok, detail in report:
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        print(f"{status}  {f'{module}.{name}':<{width}}  {detail}")
    print(f"{len(report) - failures}/{len(report)} checks passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmtt",
                                     description="Reward-tilted flow sampling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (("sample", cmd_sample, True),
                                   ("search", cmd_search, True),
                                   ("diagnose", cmd_diagnose, True),
                                   ("refine", cmd_refine, True),
                                   ("verify", cmd_verify, False)):
        p = sub.add_parser(name)
        p.set_defaults(fn=fn)
        if needs_config:
            p.add_argument("--config", required=True)
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--out", required=True)
            p.add_argument("--paper-literal", action="store_true")
        else:
            p.add_argument("--only", choices=sorted(SUITES), default=None)
    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FmttError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
