import csv
import json

import numpy as np
import pytest
import yaml

from fmtt import ConfigError, ExperimentConfig
from fmtt.cli import main

FAST_SAMPLE = """
seed: 5
problem:
  base: standard_normal
  target: standard_normal
schedule:
  kind: linear
  eta_offset: 0.05
run:
  n_particles: 48
  n_steps: 30
  chi: local_tilt
  weight_scheme: ito
  resampling: {kind: never}
reward:
  kind: linear
  params: {coeffs: [0.5]}
  mode: naive
"""

SEARCH = """
seed: 9
problem:
  base: {standard_normal_dim: 2}
  target:
    weights: [0.5, 0.5]
    means: [[-2.0, 0.0], [2.0, 0.0]]
    covariances: [[[0.25, 0.0], [0.0, 0.25]], [[0.25, 0.0], [0.0, 0.25]]]
schedule:
  kind: linear
  eta_offset: 0.05
run:
  n_particles: 16
  n_steps: 30
  clones: 2
  mode: searching
  chi: tilted_score
  weight_scheme: ito
  resampling: {kind: at_steps, steps: [15]}
reward:
  kind: log_responsibility
  params: {component: 1, scale: 0.1}
  mode: denoiser
"""


def test_from_yaml_builds_everything():
    cfg = ExperimentConfig.from_yaml(FAST_SAMPLE)
    assert cfg.run.seed == 5
    assert cfg.run.n_particles == 48
    path = cfg.build_path()
    rt = cfg.build_reward(path)
    assert rt.mode == "naive"
    assert rt.value(1.0, np.array([[2.0]]))[0] == pytest.approx(1.0)


def test_seed_override():
    cfg = ExperimentConfig.from_yaml(FAST_SAMPLE, seed_override=42)
    assert cfg.run.seed == 42


def test_unknown_keys_rejected_at_every_level():
    for mutate in (
        lambda d: d.update(bogus=1),
        lambda d: d["problem"].update(extra="x"),
        lambda d: d["schedule"].update(gamma=2),
        lambda d: d["run"].update(particles=3),
        lambda d: d["run"]["resampling"].update(tau=0.5),
        lambda d: d["reward"].update(strength=1.0),
        lambda d: d["reward"]["params"].update(gamma=1.0),
    ):
        raw = yaml.safe_load(FAST_SAMPLE)
        mutate(raw)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_yaml(yaml.safe_dump(raw))


def test_invalid_values_rejected():
    for mutate in (
        lambda d: d.update(seed=-1),
        lambda d: d["schedule"].update(kind="cosine"),
        lambda d: d["reward"].update(kind="neural"),
        lambda d: d["run"].update(mode="browsing"),
        lambda d: d["run"].update(weight_scheme="simplified"),
    ):
        raw = yaml.safe_load(FAST_SAMPLE)
        mutate(raw)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_yaml(yaml.safe_dump(raw))


def test_resolved_yaml_roundtrips():
    cfg = ExperimentConfig.from_yaml(FAST_SAMPLE)
    again = ExperimentConfig.from_yaml(cfg.resolved_yaml())
    assert again.run == cfg.run
    assert again.reward_kind == cfg.reward_kind


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_sample_outputs(tmp_path):
    cfg = _write(tmp_path, FAST_SAMPLE)
    out = tmp_path / "out"
    assert main(["sample", "--config", cfg, "--out", str(out)]) == 0
    with open(out / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "t", "ess", "resampled", "logZ", "mean_reward"]
    assert len(rows) == 31
    with open(out / "diagnostics.csv") as fh:
        drows = list(csv.reader(fh))
    assert drows[0] == ["step", "t", "D_hat", "Lambda_cum"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["command"] == "sample"
    assert summary["oracle"]["oracle_mean"] == pytest.approx(0.5)
    assert abs(summary["tilted_mean"][0] - 0.5) < 0.5
    assert (out / "config_resolved.yaml").exists()


def test_cli_sample_bit_identical_reruns(tmp_path):
    cfg = _write(tmp_path, FAST_SAMPLE)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["sample", "--config", cfg, "--out", str(out1)])
    main(["sample", "--config", cfg, "--out", str(out2)])
    assert (out1 / "trace.csv").read_text() == (out2 / "trace.csv").read_text()
    assert (out1 / "summary.json").read_text() == (out2 / "summary.json").read_text()


def test_cli_seed_flag_changes_output(tmp_path):
    cfg = _write(tmp_path, FAST_SAMPLE)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["sample", "--config", cfg, "--out", str(out1)])
    main(["sample", "--config", cfg, "--seed", "123", "--out", str(out2)])
    assert (out1 / "trace.csv").read_text() != (out2 / "trace.csv").read_text()


def test_cli_search_outputs(tmp_path):
    cfg = _write(tmp_path, SEARCH)
    out = tmp_path / "out"
    assert main(["search", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["command"] == "search"
    assert summary["selection_steps"] == [15]
    assert "baseline_mean_terminal_reward" in summary
    assert (out / "terminal_rewards.csv").exists()


def test_cli_search_rejects_sampling_config(tmp_path):
    cfg = _write(tmp_path, FAST_SAMPLE)
    assert main(["search", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_cli_diagnose_and_refine(tmp_path):
    cfg = _write(tmp_path, FAST_SAMPLE)
    out = tmp_path / "diag"
    assert main(["diagnose", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["D_total"] > 0
    sched = yaml.safe_load((out / "refined_schedule.yaml").read_text())
    times = np.asarray(sched["schedule_times"])
    assert times.shape[0] == 31
    assert times[0] == 0.0 and times[-1] == 1.0
    assert np.all(np.diff(times) > 0)

    out2 = tmp_path / "refine"
    assert main(["refine", "--config", cfg, "--out", str(out2)]) == 0
    summary2 = json.loads((out2 / "summary.json").read_text())
    assert len(summary2["rounds"]) >= 1
    assert (out2 / "refined_schedule.yaml").exists()


def test_cli_bad_config_json_error(tmp_path, capsys):
    cfg = _write(tmp_path, FAST_SAMPLE + "\nunknown_root_key: 1\n")
    code = main(["sample", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigError"


def test_cli_verify_only_suite(capsys):
    assert main(["verify", "--only", "oracles"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
