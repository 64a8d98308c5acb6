import filecmp

import numpy as np
import pytest
import yaml

from evdrcc import io
from evdrcc.cli import main
from evdrcc.config import ConfigError, default_config_path, load_config
from evdrcc.pipeline import MomentSummary, run_experiment

ALL_FILES = ["scenarios.csv", "moments.csv", "cov.csv", "dispatch_deterministic.csv",
             "dispatch_drcc.csv", "dispatch_drcc_pm.csv", "eval_summary.csv", "comparison.txt",
             "violations.csv"]


@pytest.fixture
def small_cfg(tmp_path):
    raw = yaml.safe_load(default_config_path().read_text())
    raw["scenarios"] = 60
    raw["evaluation"]["realizations"] = 40
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def run(cfg, out, *extra):
    return main([extra[0], "--config", str(cfg), "--out", str(out), *extra[1:]])


def same_dirs(a, b):
    match, mismatch, errors = filecmp.cmpfiles(a, b, ALL_FILES, shallow=False)
    return not mismatch and not errors


def test_pipeline_writes_everything_and_is_deterministic(small_cfg, tmp_path, capsys):
    assert run(small_cfg, tmp_path / "a", "pipeline") == 0
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == sorted(ALL_FILES)
    assert run(small_cfg, tmp_path / "b", "pipeline") == 0
    assert same_dirs(tmp_path / "a", tmp_path / "b")
    assert run(small_cfg, tmp_path / "c", "pipeline", "--threads", "4") == 0
    assert same_dirs(tmp_path / "a", tmp_path / "c")
    out = capsys.readouterr().out
    assert "comparison.txt" in out


def test_stages_compose_to_pipeline(small_cfg, tmp_path):
    assert run(small_cfg, tmp_path / "p", "pipeline") == 0
    for stage in ("simulate", "moments", "solve", "evaluate"):
        assert run(small_cfg, tmp_path / "s", stage) == 0
    assert same_dirs(tmp_path / "p", tmp_path / "s")


def test_seed_override_changes_output(small_cfg, tmp_path):
    run(small_cfg, tmp_path / "a", "simulate")
    run(small_cfg, tmp_path / "b", "simulate", "--seed", "7")
    assert (tmp_path / "a" / "scenarios.csv").read_bytes() != \
        (tmp_path / "b" / "scenarios.csv").read_bytes()


def test_single_mode(small_cfg, tmp_path):
    out = tmp_path / "m"
    assert run(small_cfg, out, "pipeline", "--mode", "drcc") == 0
    summary = io.read_eval_summary(out / "eval_summary.csv")
    assert list(summary) == ["drcc"] and summary["drcc"]["cost_increase_pct"] == 0


def test_missing_inputs(small_cfg, tmp_path, capsys):
    assert run(small_cfg, tmp_path / "empty", "solve", "--mode", "drcc") == 1
    assert "missing scenarios.csv" in capsys.readouterr().err
    run(small_cfg, tmp_path / "x", "simulate")
    assert run(small_cfg, tmp_path / "x", "evaluate") == 1
    assert "missing moments.csv" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    raw = yaml.safe_load(default_config_path().read_text())
    raw["population"]["tau_gap"] = [[0, 0.1], [5, 20], [0.2, 1.0]]
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(raw, sort_keys=False))
    with pytest.raises(ConfigError, match=r"bad.yaml \(line \d+\): population: tau_gap"):
        load_config(bad)
    line = next(i for i, t in enumerate(bad.read_text().splitlines(), 1) if "tau_gap" in t)
    assert main(["simulate", "--config", str(bad)]) == 2
    assert f"(line {line})" in capsys.readouterr().err
    raw = yaml.safe_load(default_config_path().read_text())
    raw["dopf"]["modes"] = ["robust"]
    bad.write_text(yaml.safe_dump(raw))
    with pytest.raises(ConfigError, match="unknown mode"):
        load_config(bad)
    bad.write_text("network: [unclosed\n")
    with pytest.raises(ConfigError, match="parse error"):
        load_config(bad)
    assert main(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 2
    assert main(["simulate", "--threads", "0"]) == 2


def test_moments_roundtrip(tmp_path, net33):
    ids = [s.id for s in net33.stations]
    ms = MomentSummary(mean=np.array([1.0, 0.8, 1.2, 0.9]), n_bar=np.array([20, 16, 24, 18.0]),
                       mean_pm=np.array([1.0, 0.82, 1.15, 0.95]),
                       cov=np.diag([0.04, 0.03, 0.05, 0.02]) + 0.001, k_sc=100)
    io.write_moments(tmp_path, ids, ms)
    back = io.read_moments(tmp_path, ids, 100)
    for f in ("mean", "n_bar", "mean_pm", "cov"):
        np.testing.assert_allclose(getattr(back, f), getattr(ms, f), rtol=1e-8)
    with pytest.raises(ValueError, match="station ids"):
        io.read_moments(tmp_path, ids[::-1], 100)


def test_dispatch_roundtrip(tmp_path, cfg33):
    cfg = cfg33.with_overrides(modes=["drcc"])
    from dataclasses import replace
    cfg = replace(cfg, scenarios=40, evaluation=replace(cfg.evaluation, realizations=5))
    res = run_experiment(cfg)
    d = res["dispatches"]["drcc"]
    path = io.write_dispatch(tmp_path / "d.csv", res["net"], d)
    back = io.read_dispatch(path, res["net"])
    for f in ("p_g", "q_g", "v2", "p_flow", "q_flow", "alpha", "mean_ref"):
        np.testing.assert_allclose(getattr(back, f), getattr(d, f), rtol=1e-8, atol=1e-12)
    assert back.mode == "drcc"
    path.write_text("section,id\n")
    with pytest.raises(ValueError, match="unexpected header"):
        io.read_dispatch(path, res["net"])
    with pytest.raises(io.MissingArtifact):
        io.read_dispatch(tmp_path / "none.csv", res["net"])
