import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tagprobe import SplitAssignment, TagMatrix, generate_synthetic
from tagprobe.runner import run_synth


@pytest.fixture
def toy_tags():
    """12 clips, 3 tags with train-split positive counts 5 / 9 / 7."""
    labels = np.zeros((12, 3), dtype=np.uint8)
    labels[[0, 1, 2, 3, 4], 0] = 1
    labels[[0, 1, 2, 3, 4, 5, 6, 7, 8], 1] = 1
    labels[[2, 3, 4, 5, 6, 7, 9], 2] = 1
    labels[10, 0] = 1  # valid split coverage
    labels[11, 1] = 1
    labels[11, 2] = 1
    labels[10, 1] = 1
    clip_ids = tuple(f"c{i}" for i in range(12))
    return TagMatrix(clip_ids, ("alpha", "beta", "gamma"), labels)


@pytest.fixture
def toy_split():
    return SplitAssignment(
        train_rows=tuple(range(10)), valid_rows=(10,), test_rows=(11,)
    )


@pytest.fixture(scope="session")
def synth_small():
    """In-memory synthetic dataset used across modules."""
    return generate_synthetic(120, 5, 8, 3, 0.1, 7)


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory) -> Path:
    """On-disk synthetic dataset; returns its directory."""
    out = tmp_path_factory.mktemp("synth_data")
    run_synth(out, num_clips=120, num_tags=5, frame_dim=8, frames_per_clip=3,
              noise_scale=0.1, seed=7)
    return out


@pytest.fixture(scope="session")
def synth500_dir(tmp_path_factory) -> Path:
    """The 500-clip / 10-tag / 32-dim separable dataset (seed 42)."""
    out = tmp_path_factory.mktemp("synth500")
    run_synth(out, num_clips=500, num_tags=10, frame_dim=32, frames_per_clip=4,
              noise_scale=0.1, seed=42)
    return out


@pytest.fixture(scope="session")
def full500(synth500_dir, tmp_path_factory):
    """Full probe trained on the 500x10 dataset; returns (config, model, report)."""
    from tagprobe.runner import ExperimentConfig, run_full

    out = tmp_path_factory.mktemp("full500")
    config = ExperimentConfig(
        manifest=str(synth500_dir / "manifest.json"),
        out_dir=str(out),
        mode="full",
        embedding="synthetic",
    )
    model, report = run_full(config)
    return config, model, report


@pytest.fixture(scope="session")
def sweep500(synth500_dir, full500, tmp_path_factory):
    """5-seed K-sweep at N=10 against the full probe; returns GridResult."""
    from tagprobe.runner import ExperimentConfig, run_grid

    full_config, _, _ = full500
    out = tmp_path_factory.mktemp("sweep500")
    config = ExperimentConfig(
        manifest=str(synth500_dir / "manifest.json"),
        out_dir=str(out),
        mode="grid",
        embedding="synthetic",
        n_values=(10,),
        k_values=(1, 5, 10, 15, 20),
        seeds=(0, 1, 2, 3, 4),
        full_model=str(Path(full_config.out_dir) / "full_synthetic.fsp"),
    )
    return run_grid(config)
