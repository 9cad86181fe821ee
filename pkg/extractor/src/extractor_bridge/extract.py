"""Clip-directory extraction: decode, run a model, write FSE1 + manifest fragment."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import decode_wav, resample
from .errors import AudioDecodeError, DimsMismatchError, ExtractorError
from .fse import write_fse
from .models import MODEL_DIMS, load_adapter

log = logging.getLogger(__name__)

AUDIO_EXTENSIONS = (".wav",)


@dataclass(frozen=True)
class ExtractionJob:
    audio_dir: Path
    model: str
    out_path: Path
    batch_size: int = 8
    rate_policy: str = "resample"  # or "require-native"
    manifest_fragment: Path | None = None

    def fragment_path(self) -> Path:
        if self.manifest_fragment is not None:
            return Path(self.manifest_fragment)
        out = Path(self.out_path)
        return out.with_name(out.name + ".manifest.json")


@dataclass
class ExtractionReport:
    source: str
    out_path: str
    clips: list[str] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    dims: int = 0
    total_frames: int = 0


def list_audio_files(audio_dir: Path) -> list[Path]:
    audio_dir = Path(audio_dir)
    if not audio_dir.is_dir():
        raise ExtractorError(f"audio directory not found: {audio_dir}")
    files = sorted(
        p for p in audio_dir.iterdir()
        if p.is_file() and p.suffix.lower() in AUDIO_EXTENSIONS
    )
    if not files:
        raise ExtractorError(f"no audio files under {audio_dir}")
    return files


def extract(job: ExtractionJob) -> ExtractionReport:
    """Run the whole-clip extraction job; returns the written report.

    Undecodable clips are skipped with a logged warning and recorded in the
    manifest fragment; a model emitting the wrong frame width is fatal.
    """
    if job.rate_policy not in ("resample", "require-native"):
        raise ExtractorError(f"unknown rate policy {job.rate_policy!r}")
    adapter = load_adapter(job.model, job.batch_size)
    expected = MODEL_DIMS.get(adapter.name, adapter.dims)
    if adapter.dims != expected:
        raise DimsMismatchError(
            f"adapter {adapter.name!r} declares dims={adapter.dims}, expected {expected}"
        )
    report = ExtractionReport(source=adapter.name, out_path=str(job.out_path))
    clips: list[tuple[str, np.ndarray]] = []
    for path in list_audio_files(job.audio_dir):
        clip_id = path.stem
        try:
            samples, rate = decode_wav(path)
        except AudioDecodeError as e:
            log.warning("skipping %s: %s", path.name, e)
            report.skipped.append({"clip": clip_id, "reason": str(e)})
            continue
        if rate != adapter.sample_rate:
            if job.rate_policy == "require-native":
                reason = f"sample rate {rate} != {adapter.sample_rate}"
                log.warning("skipping %s: %s", path.name, reason)
                report.skipped.append({"clip": clip_id, "reason": reason})
                continue
            samples = resample(samples, rate, adapter.sample_rate)
        frames = np.asarray(adapter.extract(samples, adapter.sample_rate), dtype=np.float32)
        if frames.ndim != 2 or frames.shape[1] != adapter.dims or frames.shape[0] < 1:
            raise DimsMismatchError(
                f"{path.name}: model produced shape {frames.shape}, "
                f"expected (>=1, {adapter.dims})"
            )
        clips.append((clip_id, frames))
        report.clips.append(clip_id)
        report.total_frames += frames.shape[0]
    if not clips:
        raise ExtractorError(
            f"no clip under {job.audio_dir} could be processed "
            f"({len(report.skipped)} skipped)"
        )
    report.dims = adapter.dims
    write_fse(job.out_path, adapter.name, adapter.dims, clips)
    _write_fragment(job, report)
    return report


def _write_fragment(job: ExtractionJob, report: ExtractionReport) -> Path:
    fragment = {
        "frames": {report.source: os.path.basename(report.out_path)},
        "clips": report.clips,
        "skipped": report.skipped,
        "dims": report.dims,
        "total_frames": report.total_frames,
    }
    path = job.fragment_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(fragment, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path
