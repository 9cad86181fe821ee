import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from tagprobe.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def dir_bytes(path: Path) -> dict:
    return {
        str(p.relative_to(path)): p.read_bytes()
        for p in sorted(path.rglob("*")) if p.is_file()
    }


def test_synth_and_validate(runner, tmp_path):
    out = tmp_path / "data"
    result = run_ok(runner, [
        "synth", "--out", str(out), "--num-clips", "80", "--num-tags", "4",
        "--frame-dim", "6", "--frames-per-clip", "2", "--seed", "9",
    ])
    body = json.loads(result.output)
    assert body["manifest"].endswith("manifest.json")
    run_ok(runner, ["validate", str(out / "manifest.json")])


def test_validate_failure_exits_3(runner, tmp_path):
    bad = tmp_path / "bad.fsl"
    bad.write_bytes(b"WRNG----")
    result = runner.invoke(main, ["validate", str(bad)])
    assert result.exit_code == 3


def test_missing_manifest_exits_2(runner, tmp_path):
    result = runner.invoke(main, [
        "train-full", "--manifest", str(tmp_path / "none.json"),
        "--out", str(tmp_path / "o"),
    ])
    assert result.exit_code == 2
    assert "config" in result.output or "config" in (result.stderr or "")


def test_corrupt_dataset_exits_3(runner, tmp_path):
    manifest = tmp_path / "m.json"
    manifest.write_text("{broken")
    result = runner.invoke(main, [
        "train-full", "--manifest", str(manifest), "--out", str(tmp_path / "o"),
    ])
    assert result.exit_code == 3


def test_full_pipeline_and_subcommand_determinism(runner, tmp_path):
    """Each subcommand run twice with equal config yields identical bytes."""
    data = tmp_path / "data"
    synth_args = [
        "synth", "--out", None, "--num-clips", "100", "--num-tags", "4",
        "--frame-dim", "6", "--frames-per-clip", "2", "--seed", "5",
    ]
    for d in (data, tmp_path / "data2"):
        synth_args[2] = str(d)
        run_ok(runner, synth_args)
    assert dir_bytes(data) == dir_bytes(tmp_path / "data2")

    manifest = str(data / "manifest.json")
    for d in ("agg1", "agg2"):
        run_ok(runner, ["aggregate", "--manifest", manifest, "--out", str(tmp_path / d)])
    assert dir_bytes(tmp_path / "agg1") == dir_bytes(tmp_path / "agg2")

    for d in ("full1", "full2"):
        run_ok(runner, [
            "train-full", "--manifest", manifest, "--out", str(tmp_path / d),
            "--embedding", "synthetic", "--max-epochs", "80",
        ])
    assert dir_bytes(tmp_path / "full1") == dir_bytes(tmp_path / "full2")

    full_model = str(tmp_path / "full1" / "full_synthetic.fsp")
    for d in ("grid1", "grid2"):
        run_ok(runner, [
            "grid", "--manifest", manifest, "--out", str(tmp_path / d),
            "--embedding", "synthetic", "--n-values", "2,3", "--k-values", "1,2",
            "--seeds", "0,1", "--full-model", full_model, "--max-epochs", "30",
        ])
    assert dir_bytes(tmp_path / "grid1") == dir_bytes(tmp_path / "grid2")

    for d in ("sweep1", "sweep2"):
        run_ok(runner, [
            "sweep", "--manifest", manifest, "--out", str(tmp_path / d),
            "--embedding", "synthetic", "--k-values", "1,2",
            "--no-correlation", "--max-epochs", "30",
        ])
    assert dir_bytes(tmp_path / "sweep1") == dir_bytes(tmp_path / "sweep2")

    for d in ("rep1", "rep2"):
        run_ok(runner, [
            "report", "--results", str(tmp_path / "grid1" / "results.json"),
            "--kind", "heatmap_csv", "--out", str(tmp_path / d),
        ])
    assert dir_bytes(tmp_path / "rep1") == dir_bytes(tmp_path / "rep2")


def test_config_file_with_flag_override(runner, tmp_path):
    data = tmp_path / "data"
    config = tmp_path / "synth.json"
    config.write_text(json.dumps({
        "out_dir": str(data), "num_clips": 80, "num_tags": 4,
        "frame_dim": 6, "frames_per_clip": 2, "seed": 1, "name": "from-config",
    }))
    run_ok(runner, ["synth", "--config", str(config), "--name", "overridden"])
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["name"] == "overridden"
    assert manifest["splits"]["train"]  # config values applied


def test_bad_int_list_is_usage_error(runner, tmp_path):
    result = runner.invoke(main, [
        "grid", "--manifest", "m.json", "--out", str(tmp_path),
        "--n-values", "2,five",
    ])
    assert result.exit_code == 2


def test_grid_n_beyond_tags_exits_2(runner, synth_dir, tmp_path):
    result = runner.invoke(main, [
        "grid", "--manifest", str(synth_dir / "manifest.json"),
        "--out", str(tmp_path / "g"), "--embedding", "synthetic",
        "--n-values", "2,50", "--k-values", "1", "--no-correlation",
        "--max-epochs", "10",
    ])
    assert result.exit_code == 2


def test_version_flag(runner):
    result = run_ok(runner, ["--version"])
    assert "tagprobe" in result.output
