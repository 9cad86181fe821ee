"""WAV decoding and resampling for the extraction pipeline."""

from __future__ import annotations

from math import gcd
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import AudioDecodeError

_PCM_SCALE = {
    np.dtype(np.int16): 2**15,
    np.dtype(np.int32): 2**31,
}


def decode_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file as float32 mono in [-1, 1]; returns (samples, rate)."""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise AudioDecodeError(f"{path}: file not found") from None
    except Exception as e:
        raise AudioDecodeError(f"{path}: cannot decode ({e})") from e
    if data.size == 0:
        raise AudioDecodeError(f"{path}: empty audio stream")
    samples = np.asarray(data)
    if samples.dtype == np.uint8:
        samples = (samples.astype(np.float32) - 128.0) / 128.0
    elif samples.dtype in _PCM_SCALE:
        samples = samples.astype(np.float32) / _PCM_SCALE[samples.dtype]
    else:
        samples = samples.astype(np.float32)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if not np.isfinite(samples).all():
        raise AudioDecodeError(f"{path}: non-finite samples")
    return samples.astype(np.float32), int(rate)


def resample(samples: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    """Polyphase resampling to the model's expected rate."""
    if rate == target_rate:
        return samples
    g = gcd(rate, target_rate)
    out = resample_poly(samples.astype(np.float64), target_rate // g, rate // g)
    return out.astype(np.float32)
