from __future__ import annotations

import json

import pytest

from firewatch.cli import main
from firewatch.dataset import load_manifest
from firewatch.synth import read_event_catalog


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    """synth + build-dataset run once through the CLI, shared by the tests below."""
    root = tmp_path_factory.mktemp("cli")
    crops = root / "crops"
    assert (
        main(["synth", "--out", str(crops), "--events", "3", "--grid", "6x6", "--seed", "7"])
        == 0
    )
    dataset = root / "dataset"
    assert (
        main(
            [
                "build-dataset",
                "--events", str(crops / "events.json"),
                "--crops", str(crops),
                "--out", str(dataset),
                "--neg-ratio", "1.0",
                "--buffer", "2",
                "--ratios", "0.34,0.33,0.33",
                "--bins", "1x1",
                "--seed", "5",
            ]
        )
        == 0
    )
    return root


def test_synth_creates_bundles_and_catalog(cli_workspace):
    crops = cli_workspace / "crops"
    events = read_event_catalog(crops / "events.json")
    assert len(events) == 3
    for ev in events:
        assert (crops / ev.event_id / "metadata.json").exists()
        assert (crops / ev.event_id / "data.bin").exists()


def test_build_dataset_outputs(cli_workspace):
    dataset = cli_workspace / "dataset"
    manifest = load_manifest(dataset)
    assert sum(manifest.splits.counts().values()) == 3
    for split in ("train", "validation", "test"):
        assert (dataset / f"series_{split}.bin").exists()


def test_train_evaluate_experiment(cli_workspace, tmp_path):
    dataset = cli_workspace / "dataset"
    model_config = tmp_path / "model.json"
    model_config.write_text(
        json.dumps(
            {
                "d_model": 16,
                "encoder_layers": 1,
                "decoder_layers": 1,
                "attention_heads": 2,
                "ff_width": 32,
                "mask_ratio": 0.75,
                "timesteps": 96,
                "landcover_classes": 9,
            }
        )
    )
    out = tmp_path / "run"
    code = main(
        [
            "train",
            "--dataset", str(dataset),
            "--model-config", str(model_config),
            "--scheduler", "cosine",
            "--seed", "17",
            "--epochs", "2",
            "--out", str(out),
        ]
    )
    assert code == 0
    assert (out / "checkpoint" / "header.json").exists()
    assert (out / "checkpoint" / "weights.bin").exists()
    assert (out / "history.csv").exists()
    assert (out / "history.png").exists()
    lines = (out / "history.csv").read_text().strip().splitlines()
    assert len(lines) == 3  # header + 2 epochs

    assert (
        main(
            [
                "evaluate",
                "--checkpoint", str(out / "checkpoint"),
                "--dataset", str(dataset),
                "--split", "test",
            ]
        )
        == 0
    )

    report = tmp_path / "results.txt"
    code = main(
        [
            "experiment",
            "--dataset", str(dataset),
            "--schedulers", "cosine",
            "--seeds", "17",
            "--model-config", str(model_config),
            "--epochs", "1",
            "--out", str(report),
        ]
    )
    assert code == 0
    assert report.exists()
    assert report.with_suffix(".csv").exists()
    assert report.with_suffix(".png").exists()
    assert "Scheduler" in report.read_text(encoding="utf-8")


def test_unknown_subcommand_nonzero():
    assert main(["frobnicate"]) != 0


def test_missing_required_flag_nonzero():
    assert main(["synth"]) != 0


def test_runtime_error_reports_and_fails(tmp_path, capsys):
    code = main(["evaluate", "--checkpoint", str(tmp_path / "nope"),
                 "--dataset", str(tmp_path), "--split", "test"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_ssl_only_flag(cli_workspace, tmp_path):
    dataset = cli_workspace / "dataset"
    out = tmp_path / "ssl"
    model_config = tmp_path / "m.json"
    model_config.write_text(
        json.dumps(
            {
                "d_model": 16,
                "encoder_layers": 1,
                "decoder_layers": 1,
                "attention_heads": 2,
                "ff_width": 32,
                "mask_ratio": 0.75,
                "timesteps": 96,
                "landcover_classes": 9,
            }
        )
    )
    code = main(
        [
            "train",
            "--dataset", str(dataset),
            "--model-config", str(model_config),
            "--epochs", "1",
            "--ssl-only",
            "--out", str(out),
        ]
    )
    assert code == 0
