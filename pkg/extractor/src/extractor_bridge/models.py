"""Pretrained-model adapters behind a pluggable registry.

Each adapter decodes nothing itself: it receives mono float32 audio at its
declared sample rate and returns a (num_frames x dims) float32 matrix over
the whole clip. The three shipped backends import their frameworks lazily
and raise ExtractorUnavailableError with an install hint when missing, so
the pipeline (and its tests) can run with registered substitutes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ExtractorUnavailableError

MODEL_DIMS = {"vggish": 128, "openl3": 512, "passt": 768}


@dataclass(frozen=True)
class ModelAdapter:
    name: str
    dims: int
    sample_rate: int
    extract: Callable[[np.ndarray, int], np.ndarray]


_FACTORIES: dict[str, Callable[[int], ModelAdapter]] = {}


def register_adapter(name: str, factory: Callable[[int], ModelAdapter]) -> None:
    """Install or replace the factory behind a model name."""
    _FACTORIES[name] = factory


def available_models() -> tuple[str, ...]:
    return tuple(sorted(_FACTORIES))


def load_adapter(name: str, batch_size: int = 8) -> ModelAdapter:
    factory = _FACTORIES.get(name)
    if factory is None:
        raise ExtractorUnavailableError(
            f"unknown model {name!r}; available: {', '.join(available_models())}"
        )
    return factory(batch_size)


def _vggish_factory(batch_size: int) -> ModelAdapter:
    try:
        import torch  # noqa: F401
    except ImportError as e:
        raise ExtractorUnavailableError(
            "vggish backend needs torch and the torchvggish hub model "
            "(pip install torch; weights are fetched via torch.hub)"
        ) from e
    import torch

    try:
        model = torch.hub.load("harritaylor/torchvggish", "vggish")
    except Exception as e:
        raise ExtractorUnavailableError(
            f"could not load the torchvggish hub model: {e}"
        ) from e
    model.eval()
    # released post-processing (PCA + 8-bit quantization) stays enabled,
    # matching the published embedding distribution
    model.postprocess = True

    def extract(samples: np.ndarray, sr: int) -> np.ndarray:
        with torch.no_grad():
            out = model.forward(samples.astype(np.float64), fs=sr)
        return np.asarray(out.cpu().numpy(), dtype=np.float32)

    return ModelAdapter("vggish", 128, 16000, extract)


def _openl3_factory(batch_size: int) -> ModelAdapter:
    try:
        import openl3
    except ImportError as e:
        raise ExtractorUnavailableError(
            "openl3 backend is not installed (pip install openl3)"
        ) from e

    def extract(samples: np.ndarray, sr: int) -> np.ndarray:
        emb, _ = openl3.get_audio_embedding(
            samples, sr, content_type="music", embedding_size=512,
            batch_size=batch_size, verbose=False,
        )
        return np.asarray(emb, dtype=np.float32)

    return ModelAdapter("openl3", 512, 48000, extract)


def _passt_factory(batch_size: int) -> ModelAdapter:
    try:
        import torch
        from hear21passt.base30sec import get_basic_model
    except ImportError as e:
        raise ExtractorUnavailableError(
            "passt backend is not installed (pip install hear21passt); "
            "the 30 s time-positional-encoding variant is required"
        ) from e

    model = get_basic_model(mode="embed_only")
    model.eval()

    def extract(samples: np.ndarray, sr: int) -> np.ndarray:
        with torch.no_grad():
            wav = torch.from_numpy(samples[None, :].astype(np.float32))
            emb = model(wav)
        frames = emb.cpu().numpy().reshape(-1, 768)
        return np.asarray(frames, dtype=np.float32)

    return ModelAdapter("passt", 768, 32000, extract)


register_adapter("vggish", _vggish_factory)
register_adapter("openl3", _openl3_factory)
register_adapter("passt", _passt_factory)
