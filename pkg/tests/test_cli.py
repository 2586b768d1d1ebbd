"""Pipeline CLI: artifacts, determinism, stage isolation, exit codes."""

import json
import re
from pathlib import Path

import pytest

from propflow.cli import (
    DataError,
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    EXIT_STAGE,
    config_digest,
    main,
    parse_config,
    verify_manifest,
)

NINE_ARTIFACTS = (
    "balanced.csv",
    "balance_audit.json",
    "tune_result.json",
    "model.json",
    "metrics.json",
    "shap.csv",
    "importance.json",
    "cart.json",
    "rules.txt",
)
STAGES = ("generate", "balance", "tune", "train", "evaluate", "explain")


def base_config(out):
    return {
        "seed": 7,
        "out": str(out),
        "generator": {"n": 900, "prevalence": 0.06},
        "resample": {"adasyn": {"beta": 0.3}, "nearmiss": {"variant": 1}, "alpha": 0.01},
        "search": {
            "budget": 3,
            "cv": 3,
            "n_trees": [20, 80],
            "max_depth": [2, 4],
            "learning_rate": [0.05, 0.3],
            "min_split_gain": [0.0, 1.0],
        },
        "evaluate": {"k": 4, "threshold": 0.5},
        "explain": {"max_depth": 3, "min_leaf": 10, "cv_folds": 4},
    }


def write_config(path, cfg):
    Path(path).write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return str(path)


def manifest_sans_wall_clock(out_dir):
    m = json.loads((Path(out_dir) / "manifest.json").read_text())
    for rec in m["stages"].values():
        rec.pop("wall_clock_s")
    return m


@pytest.fixture(scope="module")
def completed(tmp_path_factory):
    """One finished run-all, shared by the read-only assertions."""
    root = tmp_path_factory.mktemp("cli_run")
    out = root / "run"
    cfg_path = write_config(root / "cfg.json", base_config(out))
    assert main(["run-all", "--config", cfg_path]) == EXIT_OK
    return {"out": out, "cfg_path": cfg_path, "root": root}


def test_run_all_emits_all_nine_artifacts(completed):
    out = completed["out"]
    for name in NINE_ARTIFACTS:
        assert (out / name).exists(), name
    assert (out / "dataset.csv").exists()
    assert (out / "manifest.json").exists()


def test_metrics_table_prints_mean_std_five_decimals(completed, capsys):
    assert main(["evaluate", "--config", completed["cfg_path"]]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    names = [ln.split()[0] for ln in lines]
    assert names == ["pr_auc", "recall", "specificity", "accuracy"]
    for ln in lines:
        assert re.fullmatch(r"\w+ +\d\.\d{5} \(\d\.\d{5}\)", ln), ln


def test_rerun_is_byte_identical(completed, tmp_path, capsys):
    cfg = base_config(tmp_path / "run_b")
    cfg_path = write_config(tmp_path / "cfg.json", cfg)
    assert main(["run-all", "--config", cfg_path]) == EXIT_OK
    capsys.readouterr()
    for name in NINE_ARTIFACTS + ("dataset.csv",):
        a = (completed["out"] / name).read_bytes()
        b = (tmp_path / "run_b" / name).read_bytes()
        assert a == b, name
    assert manifest_sans_wall_clock(completed["out"]) == manifest_sans_wall_clock(
        tmp_path / "run_b"
    )


def test_thread_count_does_not_change_artifacts(completed, tmp_path, capsys):
    for threads, sub in (("1", "t1"), ("2", "t2")):
        cfg_path = write_config(tmp_path / f"cfg_{sub}.json", base_config(tmp_path / sub))
        assert main(["run-all", "--config", cfg_path, "--threads", threads]) == EXIT_OK
    capsys.readouterr()
    for name in NINE_ARTIFACTS:
        assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t2" / name).read_bytes()
        assert (tmp_path / "t1" / name).read_bytes() == (completed["out"] / name).read_bytes()


def test_stage_by_stage_matches_run_all(completed, tmp_path, capsys):
    cfg_path = write_config(tmp_path / "cfg.json", base_config(tmp_path / "steps"))
    for stage in STAGES:
        assert main([stage, "--config", cfg_path]) == EXIT_OK, stage
    capsys.readouterr()
    for name in NINE_ARTIFACTS + ("dataset.csv",):
        assert (tmp_path / "steps" / name).read_bytes() == (completed["out"] / name).read_bytes()
    assert manifest_sans_wall_clock(tmp_path / "steps") == manifest_sans_wall_clock(
        completed["out"]
    )


def test_json_artifacts_embed_config_digest(completed):
    raw = json.loads(Path(completed["cfg_path"]).read_text())
    digest = config_digest(parse_config(raw))
    json_names = [n for n in NINE_ARTIFACTS if n.endswith(".json")]
    for name in json_names + ["manifest.json"]:
        body = json.loads((completed["out"] / name).read_text())
        assert body["config_digest"] == digest, name


def test_manifest_digests_recomputed_on_read(completed):
    verify_manifest(completed["out"])  # clean run passes


def test_corrupted_artifact_is_caught(completed, tmp_path, capsys):
    cfg_path = write_config(tmp_path / "cfg.json", base_config(tmp_path / "run"))
    assert main(["run-all", "--config", cfg_path]) == EXIT_OK
    capsys.readouterr()
    bal = tmp_path / "run" / "balanced.csv"
    bal.write_bytes(bal.read_bytes() + b"0,0,0\n")
    with pytest.raises(DataError, match="digest mismatch"):
        verify_manifest(tmp_path / "run")
    # the stage that consumes it refuses too
    assert main(["train", "--config", cfg_path]) == EXIT_DATA
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"]["exit_code"] == EXIT_DATA


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c.update(tpyo=1),
        lambda c: c["generator"].update(rows=5),
        lambda c: c["resample"]["adasyn"].update(neighbours=3),
        lambda c: c["search"].update(learn_rate=[0.1, 0.2]),
        lambda c: c["evaluate"].update(folds=5),
        lambda c: c["explain"].update(depth=2),
    ],
)
def test_unknown_keys_are_hard_errors(tmp_path, capsys, mutate):
    cfg = base_config(tmp_path / "run")
    mutate(cfg)
    cfg_path = write_config(tmp_path / "cfg.json", cfg)
    assert main(["run-all", "--config", cfg_path]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip())
    assert "unknown key" in err["error"]["message"]


def test_seed_required_but_flag_may_supply_it(tmp_path, capsys):
    cfg = base_config(tmp_path / "run")
    del cfg["seed"]
    cfg_path = write_config(tmp_path / "cfg.json", cfg)
    assert main(["generate", "--config", cfg_path]) == EXIT_CONFIG
    capsys.readouterr()
    assert main(["generate", "--config", cfg_path, "--seed", "7"]) == EXIT_OK


def test_exactly_one_data_source(tmp_path, capsys):
    cfg = base_config(tmp_path / "run")
    cfg["dataset"] = {"path": "whatever.csv"}
    assert main(["run-all", "--config", write_config(tmp_path / "a.json", cfg)]) == EXIT_CONFIG
    del cfg["dataset"], cfg["generator"]
    assert main(["run-all", "--config", write_config(tmp_path / "b.json", cfg)]) == EXIT_CONFIG
    capsys.readouterr()


def test_dataset_path_config_skips_generate(completed, tmp_path, capsys):
    cfg = base_config(tmp_path / "run")
    del cfg["generator"]
    cfg["dataset"] = {"path": str(completed["out"] / "dataset.csv")}
    cfg_path = write_config(tmp_path / "cfg.json", cfg)
    assert main(["run-all", "--config", cfg_path]) == EXIT_OK
    capsys.readouterr()
    assert not (tmp_path / "run" / "dataset.csv").exists()
    for name in NINE_ARTIFACTS:
        assert (tmp_path / "run" / name).exists(), name
    # same source rows and seed -> same model, though the digest differs
    ours = json.loads((tmp_path / "run" / "model.json").read_text())
    theirs = json.loads((completed["out"] / "model.json").read_text())
    assert ours.pop("config_digest") != theirs.pop("config_digest")
    assert ours == theirs


def test_missing_stage_input_exits_3(tmp_path, capsys):
    cfg_path = write_config(tmp_path / "cfg.json", base_config(tmp_path / "run"))
    assert main(["balance", "--config", cfg_path]) == EXIT_DATA
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"]["stage"] == "balance"
    assert "generate" in err["error"]["message"]


def test_stage_failure_exits_4(tmp_path, capsys):
    cfg = base_config(tmp_path / "run")
    cfg["generator"] = {"n": 40, "prevalence": 0.05}  # 2 positives: ADASYN can run,
    assert main(["generate", "--config", write_config(tmp_path / "cfg.json", cfg)]) == EXIT_OK
    # but 3-fold splits leave single-positive training folds downstream
    assert main(["tune", "--config", str(tmp_path / "cfg.json")]) == EXIT_STAGE
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"]["stage"] == "tune"
    assert err["error"]["exit_code"] == EXIT_STAGE


def test_seed_override_invalidates_stale_inputs(completed, tmp_path, capsys):
    # artifacts in the run dir carry seed 7's digest; asking for seed 99 must refuse
    assert main(["train", "--config", completed["cfg_path"], "--seed", "99"]) == EXIT_DATA
    err = json.loads(capsys.readouterr().err.strip())
    assert "different config" in err["error"]["message"]


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c["search"].update(learning_rate=[0.5, 0.2]),
        lambda c: c["generator"].update(prevalence=2.0),
        lambda c: c["evaluate"].update(threshold=1.5),
        lambda c: c.update(seed=-1),
        lambda c: c["resample"]["adasyn"].update(beta="high"),
    ],
)
def test_invalid_values_are_config_errors(tmp_path, capsys, mutate):
    cfg = base_config(tmp_path / "run")
    mutate(cfg)
    cfg_path = write_config(tmp_path / "cfg.json", cfg)
    assert main(["run-all", "--config", cfg_path]) == EXIT_CONFIG
    capsys.readouterr()


def test_config_digest_ignores_output_location():
    a = parse_config(base_config("/tmp/one"))
    b = parse_config(base_config("/tmp/two"))
    assert config_digest(a) == config_digest(b)
    c = parse_config({**base_config("/tmp/one"), "seed": 8})
    assert config_digest(c) != config_digest(a)


def test_malformed_config_json(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{nope")
    assert main(["run-all", "--config", str(p)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"]["stage"] == "config"


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()


def test_bundled_demo_config_runs(tmp_path, capsys):
    cfg = Path(__file__).resolve().parent.parent / "configs" / "demo.json"
    assert main(["run-all", "--config", str(cfg), "--out", str(tmp_path / "run")]) == EXIT_OK
    capsys.readouterr()
    for name in NINE_ARTIFACTS:
        assert (tmp_path / "run" / name).exists(), name
