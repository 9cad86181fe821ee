import wave
from pathlib import Path

import numpy as np
import pytest

from extractor_bridge.models import MODEL_DIMS, ModelAdapter, register_adapter


def write_wav(path: Path, seconds: float = 0.5, rate: int = 22050, freq: float = 440.0):
    t = np.arange(int(seconds * rate)) / rate
    samples = (0.4 * np.sin(2 * np.pi * freq * t) * 32767).astype(np.int16)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(samples.tobytes())
    return path


@pytest.fixture
def audio_dir(tmp_path) -> Path:
    d = tmp_path / "audio"
    d.mkdir()
    for i, freq in enumerate((220.0, 440.0, 880.0)):
        write_wav(d / f"clip_{i:02d}.wav", freq=freq)
    return d


def fake_extract(dims: int):
    """Deterministic content-derived frames: ~4 frames/s, width dims."""

    def extract(samples: np.ndarray, sr: int) -> np.ndarray:
        num_frames = max(1, int(round(4 * len(samples) / sr)))
        segments = np.array_split(samples.astype(np.float64), num_frames)
        rows = [np.resize(seg, dims) + float(np.abs(seg).mean()) for seg in segments]
        return np.stack(rows).astype(np.float32)

    return extract


@pytest.fixture
def fake_backends():
    """Replace the three model factories with offline deterministic ones."""
    originals = {}
    from extractor_bridge import models

    for name, dims in MODEL_DIMS.items():
        originals[name] = models._FACTORIES[name]
        rate = {"vggish": 16000, "openl3": 48000, "passt": 32000}[name]

        def factory(batch_size, _name=name, _dims=dims, _rate=rate):
            return ModelAdapter(_name, _dims, _rate, fake_extract(_dims))

        register_adapter(name, factory)
    yield MODEL_DIMS
    for name, factory in originals.items():
        register_adapter(name, factory)
