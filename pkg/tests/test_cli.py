from __future__ import annotations

import json

import pytest
import yaml
from conftest import tiny_profile

from weak_speaker.cli import (
    EXIT_MISSING_ARTIFACT,
    EXIT_OK,
    EXIT_USAGE,
    build_parser,
    run,
)


def _run(config_path, *args: str) -> int:
    return run([args[0], "--config", str(config_path), *args[1:]])


def test_no_command_is_a_usage_error():
    assert run([]) == EXIT_USAGE


def test_bad_choice_exits_with_usage_status():
    with pytest.raises(SystemExit) as error:
        run(["train-weak", "--aggregation", "mean"])
    assert error.value.code == EXIT_USAGE


def test_parser_knows_every_command():
    parser = build_parser()

    for command in (
        "synth",
        "diarize",
        "train-weak",
        "select",
        "train-strong",
        "train-reference",
        "eval",
        "report",
    ):
        assert parser.parse_args([command]).command == command


def test_diarize_before_synth_reports_missing_artifact(tiny_config_path):
    assert _run(tiny_config_path, "diarize") == EXIT_MISSING_ARTIFACT


def test_invalid_settings_are_a_usage_error(tmp_path):
    profile = tiny_profile(tmp_path / "work")
    profile["training"]["learning_rate"] = -1.0
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(profile), encoding="utf-8")

    assert _run(path, "synth") == EXIT_USAGE


def test_full_chain_writes_every_artifact(tiny_config_path, tmp_path):
    work = tmp_path / "work"

    assert _run(tiny_config_path, "synth") == EXIT_OK
    assert _run(tiny_config_path, "diarize") == EXIT_OK
    rttm = (work / "diarization" / "diarization.rttm").read_bytes()
    assert _run(tiny_config_path, "diarize") == EXIT_OK
    assert (work / "diarization" / "diarization.rttm").read_bytes() == rttm

    assert _run(tiny_config_path, "train-weak") == EXIT_OK
    assert (work / "models" / "stage1-lse-0.5-0.1.ckpt").exists()
    assert (work / "models" / "stage1-lse-0.5-0.1.log.jsonl").exists()

    assert _run(tiny_config_path, "select") == EXIT_OK
    summary = json.loads((work / "selection" / "summary.json").read_text(encoding="utf-8"))
    assert (work / "selection" / "self_labeled.tsv").exists()

    models = ["stage1-lse-0.5-0.1", "reference-m0.1-0.3-k1", "untrained"]
    if summary["chunks"]:
        assert _run(tiny_config_path, "train-strong") == EXIT_OK
        models.append("stage2-m0.1-0.3-k1")
    else:
        assert _run(tiny_config_path, "train-strong") == EXIT_USAGE
    assert _run(tiny_config_path, "train-reference") == EXIT_OK

    model_flags = [flag for name in models for flag in ("--model", name)]
    assert _run(tiny_config_path, "eval", *model_flags) == EXIT_OK
    for name in models:
        metrics = json.loads((work / "eval" / f"{name}.metrics.json").read_text(encoding="utf-8"))
        assert 0.0 <= metrics["eer"] <= 1.0
        assert metrics["trials"] > 0
        assert (work / "eval" / f"{name}.scores.csv").exists()

    assert _run(tiny_config_path, "report") == EXIT_OK
    rows = json.loads((work / "report" / "models.json").read_text(encoding="utf-8"))["rows"]
    assert sorted(row["model"] for row in rows) == sorted(models)
    datasets = json.loads((work / "report" / "datasets.json").read_text(encoding="utf-8"))["rows"]
    assert datasets[0]["recordings"] == 12
    assert (work / "report" / "models.csv").exists()
    assert list((work / "logs").glob("weak-speaker-*.log"))


def test_eval_of_unknown_model_reports_missing_artifact(tiny_config_path):
    assert _run(tiny_config_path, "synth") == EXIT_OK

    assert _run(tiny_config_path, "eval", "--model", "stage9") == EXIT_MISSING_ARTIFACT


def test_training_is_byte_identical_across_runs_and_threads(tiny_config_path, tmp_path):
    checkpoint = tmp_path / "work" / "models" / "stage1-lse-0.5-0.1.ckpt"
    log = tmp_path / "work" / "models" / "stage1-lse-0.5-0.1.log.jsonl"
    assert _run(tiny_config_path, "synth") == EXIT_OK
    assert _run(tiny_config_path, "diarize") == EXIT_OK

    assert _run(tiny_config_path, "train-weak") == EXIT_OK
    first = checkpoint.read_bytes(), log.read_bytes()
    assert _run(tiny_config_path, "train-weak") == EXIT_OK
    second = checkpoint.read_bytes(), log.read_bytes()
    assert _run(tiny_config_path, "train-weak", "--threads", "3") == EXIT_OK
    threaded = checkpoint.read_bytes(), log.read_bytes()

    assert first == second == threaded
