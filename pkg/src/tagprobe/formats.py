"""Binary file formats and dataset assembly.

All formats are little-endian. Layouts:

* Frames file ``FSE1``: magic, u32 version=1, u32 num_clips, u32 dims,
  u8 source code, then per clip: u32 id length, UTF-8 id, u32 num_frames,
  num_frames x dims float32 row-major.
* Aggregated table ``FSA1``: magic, u32 version=1, u32 num_clips, u32 dims,
  u32 num_blocks, per block (u8 source code, u32 start, u32 length), clip
  ids as above, then num_clips x dims float32 row-major.
* Tag file ``FSL1``: magic, u32 version=1, u32 num_clips, u32 num_tags,
  tag names (u32 length + UTF-8 each), clip ids, then num_clips x num_tags
  bytes of 0/1.

Source codes: 1 vggish, 2 openl3, 3 passt, 4 synthetic, 5 other. Code 5 is
followed by a u32-length-prefixed UTF-8 name so custom sources round-trip
bit-exactly; files holding the four named sources carry no name field.

The dataset manifest is JSON: dataset name, per-source file paths, split
row-index arrays, and the format version.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    AggregatedTable,
    FrameStore,
    ProvenanceBlock,
    SplitAssignment,
    TagMatrix,
    check_source_dims,
)
from .errors import AlignmentError, ConfigError, FormatError, ValidationError

FORMAT_VERSION = 1

SOURCE_CODES = {"vggish": 1, "openl3": 2, "passt": 3, "synthetic": 4}
CODE_SOURCES = {v: k for k, v in SOURCE_CODES.items()}
OTHER_CODE = 5

# header caps; anything beyond these is a corrupt or hostile file
_MAX_COUNT = 2**31


class Reader:
    """Byte-offset-tracking reader; every failure names the offset."""

    def __init__(self, data: bytes, name: str = "<file>"):
        self.data = data
        self.name = name
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"{self.name}: truncated payload, needed {n} more bytes", offset=self.pos
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        at = self.pos
        n = self.u32()
        if n > _MAX_COUNT:
            raise FormatError(f"{self.name}: implausible string length {n}", offset=at)
        raw = self.take(n)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"{self.name}: invalid UTF-8 string", offset=at + 4) from e

    def f32_matrix(self, rows: int, cols: int) -> np.ndarray:
        raw = self.take(rows * cols * 4)
        return np.frombuffer(raw, dtype="<f4").reshape(rows, cols).copy()

    def expect_magic(self, magic: bytes) -> None:
        got = self.take(4)
        if got != magic:
            raise FormatError(
                f"{self.name}: bad magic {got!r}, expected {magic!r}", offset=0
            )

    def expect_version(self) -> None:
        at = self.pos
        version = self.u32()
        if version != FORMAT_VERSION:
            raise FormatError(
                f"{self.name}: unsupported version {version}", offset=at
            )

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.name}: {len(self.data) - self.pos} trailing bytes", offset=self.pos
            )

    def check_finite(self, values: np.ndarray, payload_start: int) -> None:
        bad = np.flatnonzero(~np.isfinite(values.ravel()))
        if bad.size:
            raise FormatError(
                f"{self.name}: non-finite value", offset=payload_start + int(bad[0]) * 4
            )


def _u32(v: int) -> bytes:
    return struct.pack("<I", v)


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return _u32(len(raw)) + raw


def _source(source_id: str) -> bytes:
    code = SOURCE_CODES.get(source_id)
    if code is not None:
        return bytes([code])
    return bytes([OTHER_CODE]) + _string(source_id)


def _read_source(r: Reader) -> str:
    at = r.pos
    code = r.u8()
    if code in CODE_SOURCES:
        return CODE_SOURCES[code]
    if code == OTHER_CODE:
        return r.string()
    raise FormatError(f"{r.name}: unknown source code {code}", offset=at)


def _read_bytes(path) -> bytes:
    path = Path(path)
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None


def atomic_write_bytes(path, payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def canonical_json(obj, indent: int | None = 2) -> str:
    return json.dumps(obj, indent=indent, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# FSE1: frame stores
# ---------------------------------------------------------------------------

def write_frames(store: FrameStore, path) -> Path:
    buf = bytearray(b"FSE1")
    buf += _u32(FORMAT_VERSION)
    buf += _u32(store.num_clips)
    buf += _u32(store.dims)
    buf += _source(store.source_id)
    for clip_id, frames in zip(store.clip_ids, store.frames):
        buf += _string(clip_id)
        buf += _u32(frames.shape[0])
        buf += np.ascontiguousarray(frames, dtype="<f4").tobytes()
    return atomic_write_bytes(path, bytes(buf))


def load_frames(path) -> FrameStore:
    r = Reader(_read_bytes(path), name=str(path))
    r.expect_magic(b"FSE1")
    r.expect_version()
    num_clips = r.u32()
    at = r.pos
    dims = r.u32()
    if dims == 0:
        raise FormatError(f"{r.name}: dims=0 in header", offset=at)
    if num_clips > _MAX_COUNT or dims > _MAX_COUNT:
        raise FormatError(f"{r.name}: implausible header counts", offset=8)
    source_id = _read_source(r)
    clip_ids = []
    frames = []
    for _ in range(num_clips):
        clip_ids.append(r.string())
        at = r.pos
        num_frames = r.u32()
        if num_frames == 0:
            raise FormatError(f"{r.name}: clip with zero frames", offset=at)
        payload_start = r.pos
        mat = r.f32_matrix(num_frames, dims)
        r.check_finite(mat, payload_start)
        frames.append(mat)
    r.done()
    check_source_dims(source_id, dims)
    return FrameStore(tuple(clip_ids), dims, tuple(frames), source_id)


# ---------------------------------------------------------------------------
# FSA1: aggregated tables
# ---------------------------------------------------------------------------

def write_table(table: AggregatedTable, path) -> Path:
    buf = bytearray(b"FSA1")
    buf += _u32(FORMAT_VERSION)
    buf += _u32(table.num_clips)
    buf += _u32(table.dims)
    buf += _u32(len(table.provenance))
    for b in table.provenance:
        buf += _source(b.source_id)
        buf += _u32(b.start)
        buf += _u32(b.length)
    for clip_id in table.clip_ids:
        buf += _string(clip_id)
    buf += np.ascontiguousarray(table.rows, dtype="<f4").tobytes()
    return atomic_write_bytes(path, bytes(buf))


def load_table(path) -> AggregatedTable:
    r = Reader(_read_bytes(path), name=str(path))
    r.expect_magic(b"FSA1")
    r.expect_version()
    num_clips = r.u32()
    at = r.pos
    dims = r.u32()
    if dims == 0:
        raise FormatError(f"{r.name}: dims=0 in header", offset=at)
    num_blocks = r.u32()
    if max(num_clips, dims, num_blocks) > _MAX_COUNT:
        raise FormatError(f"{r.name}: implausible header counts", offset=8)
    blocks = []
    for _ in range(num_blocks):
        source = _read_source(r)
        start = r.u32()
        length = r.u32()
        blocks.append(ProvenanceBlock(source, start, length))
    clip_ids = [r.string() for _ in range(num_clips)]
    payload_start = r.pos
    rows = r.f32_matrix(num_clips, dims)
    r.check_finite(rows, payload_start)
    r.done()
    return AggregatedTable(tuple(clip_ids), dims, rows, tuple(blocks))


# ---------------------------------------------------------------------------
# FSL1: tag matrices
# ---------------------------------------------------------------------------

def write_tags(tags: TagMatrix, path) -> Path:
    buf = bytearray(b"FSL1")
    buf += _u32(FORMAT_VERSION)
    buf += _u32(tags.num_clips)
    buf += _u32(tags.num_tags)
    for name in tags.tag_names:
        buf += _string(name)
    for clip_id in tags.clip_ids:
        buf += _string(clip_id)
    buf += np.ascontiguousarray(tags.labels, dtype=np.uint8).tobytes()
    return atomic_write_bytes(path, bytes(buf))


def load_tags(path) -> TagMatrix:
    r = Reader(_read_bytes(path), name=str(path))
    r.expect_magic(b"FSL1")
    r.expect_version()
    num_clips = r.u32()
    num_tags = r.u32()
    if max(num_clips, num_tags) > _MAX_COUNT:
        raise FormatError(f"{r.name}: implausible header counts", offset=8)
    tag_names = [r.string() for _ in range(num_tags)]
    clip_ids = [r.string() for _ in range(num_clips)]
    payload_start = r.pos
    raw = r.take(num_clips * num_tags)
    labels = np.frombuffer(raw, dtype=np.uint8).reshape(num_clips, num_tags).copy()
    bad = np.flatnonzero(labels.ravel() > 1)
    if bad.size:
        raise FormatError(
            f"{r.name}: label byte must be 0/1", offset=payload_start + int(bad[0])
        )
    r.done()
    return TagMatrix(tuple(clip_ids), tuple(tag_names), labels)


# ---------------------------------------------------------------------------
# Manifest and dataset assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetManifest:
    """Paths and split assignment describing one on-disk dataset."""

    name: str
    frames: dict[str, str]
    tags: str
    splits: SplitAssignment
    aggregated: dict[str, str] = field(default_factory=dict)
    root: Path = Path(".")

    def frames_path(self, source: str) -> Path:
        return Path(self.root) / self.frames[source]

    def tags_path(self) -> Path:
        return Path(self.root) / self.tags

    def to_json(self) -> dict:
        out = {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "frames": dict(self.frames),
            "tags": self.tags,
            "splits": {
                "train": list(self.splits.train_rows),
                "valid": list(self.splits.valid_rows),
                "test": list(self.splits.test_rows),
            },
        }
        if self.aggregated:
            out["aggregated"] = dict(self.aggregated)
        return out


def save_manifest(manifest: DatasetManifest, path) -> Path:
    return atomic_write_text(path, canonical_json(manifest.to_json()))


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    raw = _read_bytes(path)
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not valid JSON ({e})", offset=e.pos) from e

    def need(key, typ):
        if key not in obj:
            raise FormatError(f"{path}: manifest missing key {key!r}")
        if not isinstance(obj[key], typ):
            raise FormatError(f"{path}: manifest key {key!r} has wrong type")
        return obj[key]

    version = need("format_version", int)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported manifest version {version}")
    name = need("name", str)
    frames = need("frames", dict)
    if not frames or not all(isinstance(v, str) for v in frames.values()):
        raise FormatError(f"{path}: manifest 'frames' must map source -> path")
    tags = need("tags", str)
    splits_obj = need("splits", dict)
    try:
        splits = SplitAssignment(
            train_rows=tuple(splits_obj["train"]),
            valid_rows=tuple(splits_obj["valid"]),
            test_rows=tuple(splits_obj["test"]),
        )
    except (KeyError, TypeError) as e:
        raise FormatError(f"{path}: manifest 'splits' needs train/valid/test arrays") from e
    aggregated = obj.get("aggregated", {})
    if not isinstance(aggregated, dict) or not all(
        isinstance(v, str) for v in aggregated.values()
    ):
        raise FormatError(f"{path}: manifest 'aggregated' must map source -> path")
    return DatasetManifest(
        name=name,
        frames=dict(frames),
        tags=tags,
        splits=splits,
        aggregated=dict(aggregated),
        root=path.parent,
    )


@dataclass(frozen=True)
class Dataset:
    """A fully loaded and alignment-checked dataset."""

    manifest: DatasetManifest
    stores: dict[str, FrameStore]
    tags: TagMatrix
    splits: SplitAssignment

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(self.stores)


def load_dataset(manifest_path) -> Dataset:
    manifest = load_manifest(manifest_path)
    stores = {
        source: load_frames(manifest.frames_path(source))
        for source in manifest.frames
    }
    tags = load_tags(manifest.tags_path())
    for source, store in stores.items():
        if store.clip_ids != tags.clip_ids:
            limit = min(len(store.clip_ids), len(tags.clip_ids))
            pos = next(
                (i for i in range(limit) if store.clip_ids[i] != tags.clip_ids[i]),
                limit,
            )
            raise AlignmentError(
                f"clip ids of source {source!r} disagree with the tag file at position {pos}"
            )
    tags_n = tags.num_clips
    manifest.splits.validate(tags_n)
    return Dataset(manifest, stores, tags, manifest.splits)


# ---------------------------------------------------------------------------
# Validation reports
# ---------------------------------------------------------------------------

def validate_file(path) -> dict:
    """Format-check one file by magic; returns a JSON-serializable report."""
    path = Path(path)
    report: dict = {"path": str(path), "ok": False}
    try:
        if path.suffix == ".json":
            dataset = load_dataset(path)
            report.update(
                format="manifest",
                name=dataset.manifest.name,
                sources={
                    s: {"num_clips": st.num_clips, "dims": st.dims}
                    for s, st in dataset.stores.items()
                },
                num_tags=dataset.tags.num_tags,
                ok=True,
            )
            return report
        head = _read_bytes(path)[:4]
        if head == b"FSE1":
            store = load_frames(path)
            report.update(
                format="FSE1",
                source=store.source_id,
                num_clips=store.num_clips,
                dims=store.dims,
                total_frames=int(sum(f.shape[0] for f in store.frames)),
                ok=True,
            )
        elif head == b"FSA1":
            table = load_table(path)
            report.update(
                format="FSA1",
                num_clips=table.num_clips,
                dims=table.dims,
                blocks=[b.to_json() for b in table.provenance],
                ok=True,
            )
        elif head == b"FSL1":
            tags = load_tags(path)
            report.update(
                format="FSL1",
                num_clips=tags.num_clips,
                num_tags=tags.num_tags,
                positives=int(tags.labels.sum()),
                ok=True,
            )
        elif head == b"FSP1":
            from .probe import load_model

            model = load_model(path)
            report.update(
                format="FSP1",
                num_tags=model.num_tags,
                dims=model.dims,
                ok=True,
            )
        else:
            raise FormatError(f"{path}: unrecognized magic {head!r}", offset=0)
    except (FormatError, ValidationError, ConfigError) as e:
        report["error"] = str(e)
        report["error_kind"] = e.kind
    return report
