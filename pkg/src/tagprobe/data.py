"""In-memory dataset types and the math that operates on them.

Frame stores hold per-clip sequences of fixed-width embedding frames;
aggregation collapses each clip into one mean+std row; tag matrices carry
the multi-hot ground truth. All types are immutable after construction and
every operation is a pure function of its inputs, so values can be shared
freely across threads.

Values are stored as float32 and all reductions are computed in float64
before being cast back, which keeps results reproducible with bounded
rounding drift.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentError,
    ArgumentError,
    GenerationError,
    ValidationError,
)

log = logging.getLogger(__name__)

# Standard deviations below this are clamped before any division.
STD_EPS = 1e-8

# Frame widths of the supported pretrained extractors. Aggregation doubles
# them (mean block followed by std block).
SOURCE_FRAME_DIMS = {"vggish": 128, "openl3": 512, "passt": 768}

KNOWN_SOURCES = ("vggish", "openl3", "passt", "synthetic")


def check_source_dims(source_id: str, dims: int) -> None:
    """Reject frame widths that contradict a declared extractor."""
    expected = SOURCE_FRAME_DIMS.get(source_id)
    if expected is not None and dims != expected:
        raise ValidationError(
            f"source {source_id!r} produces {expected}-dimensional frames, "
            f"but dims={dims} was declared"
        )


def _as_f32_matrix(a, what: str) -> np.ndarray:
    m = np.ascontiguousarray(np.asarray(a, dtype=np.float32))
    if m.ndim != 2:
        raise ValidationError(f"{what} must be a 2-D matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class FrameStore:
    """Per-clip variable-length sequences of fixed-dimension embedding frames."""

    clip_ids: tuple[str, ...]
    dims: int
    frames: tuple[np.ndarray, ...]
    source_id: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "clip_ids", tuple(str(c) for c in self.clip_ids))
        object.__setattr__(
            self,
            "frames",
            tuple(_as_f32_matrix(f, f"frames of clip {i}") for i, f in enumerate(self.frames)),
        )
        if self.dims <= 0:
            raise ValidationError(f"dims must be positive, got {self.dims}")
        if len(self.frames) != len(self.clip_ids):
            raise ValidationError(
                f"{len(self.clip_ids)} clip ids but {len(self.frames)} frame matrices"
            )
        check_source_dims(self.source_id, self.dims)
        for i, f in enumerate(self.frames):
            if f.shape[0] < 1:
                raise ValidationError(f"clip {self.clip_ids[i]!r} has no frames")
            if f.shape[1] != self.dims:
                raise ValidationError(
                    f"clip {self.clip_ids[i]!r} has {f.shape[1]} dims, store declares {self.dims}"
                )
            if not np.isfinite(f).all():
                raise ValidationError(f"clip {self.clip_ids[i]!r} contains non-finite values")

    @property
    def num_clips(self) -> int:
        return len(self.clip_ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameStore):
            return NotImplemented
        return (
            self.clip_ids == other.clip_ids
            and self.dims == other.dims
            and self.source_id == other.source_id
            and len(self.frames) == len(other.frames)
            and all(a.shape == b.shape and a.tobytes() == b.tobytes()
                    for a, b in zip(self.frames, other.frames))
        )


@dataclass(frozen=True)
class ProvenanceBlock:
    """Which original embedding occupies which column range of a table."""

    source_id: str
    start: int
    length: int

    def to_json(self) -> list:
        return [self.source_id, self.start, self.length]

    @classmethod
    def from_json(cls, obj) -> "ProvenanceBlock":
        source, start, length = obj
        return cls(str(source), int(start), int(length))


@dataclass(frozen=True, eq=False)
class AggregatedTable:
    """One row per clip: mean+std aggregated (optionally concatenated) features."""

    clip_ids: tuple[str, ...]
    dims: int
    rows: np.ndarray
    provenance: tuple[ProvenanceBlock, ...]

    def __post_init__(self):
        object.__setattr__(self, "clip_ids", tuple(str(c) for c in self.clip_ids))
        object.__setattr__(self, "rows", _as_f32_matrix(self.rows, "rows"))
        object.__setattr__(self, "provenance", tuple(self.provenance))
        if self.dims <= 0:
            raise ValidationError(f"dims must be positive, got {self.dims}")
        if self.rows.shape != (len(self.clip_ids), self.dims):
            raise ValidationError(
                f"rows shape {self.rows.shape} does not match "
                f"({len(self.clip_ids)}, {self.dims})"
            )
        if not np.isfinite(self.rows).all():
            raise ValidationError("table contains non-finite values")
        offset = 0
        for b in self.provenance:
            if b.start != offset or b.length <= 0:
                raise ValidationError(f"provenance blocks must tile the columns, got {b}")
            if b.length % 2 != 0:
                raise ValidationError(f"block length must be even (mean+std), got {b}")
            frame_dims = SOURCE_FRAME_DIMS.get(b.source_id)
            if frame_dims is not None and b.length != 2 * frame_dims:
                raise ValidationError(
                    f"block for {b.source_id!r} must be {2 * frame_dims} wide, got {b.length}"
                )
            offset += b.length
        if offset != self.dims:
            raise ValidationError(
                f"provenance blocks cover {offset} columns, table has {self.dims}"
            )

    @property
    def num_clips(self) -> int:
        return len(self.clip_ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AggregatedTable):
            return NotImplemented
        return (
            self.clip_ids == other.clip_ids
            and self.dims == other.dims
            and self.provenance == other.provenance
            and self.rows.shape == other.rows.shape
            and self.rows.tobytes() == other.rows.tobytes()
        )


@dataclass(frozen=True, eq=False)
class TagMatrix:
    """clips x tags multi-hot ground truth with a named tag vocabulary."""

    clip_ids: tuple[str, ...]
    tag_names: tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "clip_ids", tuple(str(c) for c in self.clip_ids))
        object.__setattr__(self, "tag_names", tuple(str(t) for t in self.tag_names))
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.uint8))
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 2 or labels.shape != (len(self.clip_ids), len(self.tag_names)):
            raise ValidationError(
                f"labels shape {labels.shape} does not match "
                f"({len(self.clip_ids)}, {len(self.tag_names)})"
            )
        if labels.size and labels.max() > 1:
            raise ValidationError("labels must be 0/1")
        dead = np.flatnonzero(labels.sum(axis=0) == 0)
        if dead.size:
            names = ", ".join(self.tag_names[i] for i in dead[:5])
            raise ValidationError(
                f"{dead.size} tag(s) have zero positives in the dataset (first: {names})"
            )

    @property
    def num_clips(self) -> int:
        return len(self.clip_ids)

    @property
    def num_tags(self) -> int:
        return len(self.tag_names)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TagMatrix):
            return NotImplemented
        return (
            self.clip_ids == other.clip_ids
            and self.tag_names == other.tag_names
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train/valid/test row indices."""

    train_rows: tuple[int, ...]
    valid_rows: tuple[int, ...]
    test_rows: tuple[int, ...]

    def __post_init__(self):
        for name in ("train_rows", "valid_rows", "test_rows"):
            object.__setattr__(self, name, tuple(int(i) for i in getattr(self, name)))

    def validate(self, num_clips: int) -> None:
        splits = {
            "train": self.train_rows,
            "valid": self.valid_rows,
            "test": self.test_rows,
        }
        seen: dict[int, str] = {}
        for name, rows in splits.items():
            if not rows:
                raise ValidationError(f"{name} split is empty")
            for r in rows:
                if not 0 <= r < num_clips:
                    raise ValidationError(f"{name} split row {r} outside [0, {num_clips})")
                if r in seen:
                    raise ValidationError(
                        f"row {r} appears in both {seen[r]} and {name} splits"
                    )
                seen[r] = name


@dataclass(frozen=True)
class NormStats:
    """Per-dimension frame statistics computed on one split."""

    mean: np.ndarray
    std: np.ndarray
    computed_on: str = "train"

    def __post_init__(self):
        mean = np.ascontiguousarray(np.asarray(self.mean, dtype=np.float64))
        std = np.ascontiguousarray(np.asarray(self.std, dtype=np.float64))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        if mean.ndim != 1 or std.shape != mean.shape:
            raise ValidationError("mean and std must be 1-D vectors of equal length")
        if not (np.isfinite(mean).all() and np.isfinite(std).all()):
            raise ValidationError("norm stats contain non-finite values")
        if (std < 0).any():
            raise ValidationError("std entries must be >= 0")

    @property
    def dims(self) -> int:
        return self.mean.shape[0]


def aggregate_frames(store: FrameStore) -> AggregatedTable:
    """Collapse each clip to [per-dim mean | per-dim population std].

    The output is twice as wide as the input; the std block is the
    population form (divide by the frame count), which is well defined for
    single-frame clips.
    """
    out = np.empty((store.num_clips, 2 * store.dims), dtype=np.float64)
    for i, f in enumerate(store.frames):
        f64 = f.astype(np.float64)
        out[i, : store.dims] = f64.mean(axis=0)
        out[i, store.dims :] = f64.std(axis=0)
    return AggregatedTable(
        clip_ids=store.clip_ids,
        dims=2 * store.dims,
        rows=out.astype(np.float32),
        provenance=(ProvenanceBlock(store.source_id, 0, 2 * store.dims),),
    )


def compute_norm_stats(store: FrameStore, rows) -> NormStats:
    """Mean/std over all frames of the given clips, per frame dimension."""
    rows = [int(r) for r in rows]
    if not rows:
        raise ArgumentError("cannot compute norm stats on an empty row list")
    for r in rows:
        if not 0 <= r < store.num_clips:
            raise ArgumentError(f"row {r} outside [0, {store.num_clips})")
    stacked = np.concatenate([store.frames[r] for r in rows]).astype(np.float64)
    return NormStats(mean=stacked.mean(axis=0), std=stacked.std(axis=0))


def standardize_frames(store: FrameStore, stats: NormStats) -> FrameStore:
    """Z-score every frame value with the given per-dimension statistics."""
    if stats.dims != store.dims:
        raise ArgumentError(
            f"stats have {stats.dims} dims, store has {store.dims}"
        )
    denom = np.maximum(stats.std, STD_EPS)
    frames = tuple(
        ((f.astype(np.float64) - stats.mean) / denom).astype(np.float32)
        for f in store.frames
    )
    return FrameStore(store.clip_ids, store.dims, frames, store.source_id)


def l2_normalize_frames(store: FrameStore) -> FrameStore:
    """Scale each frame to unit L2 norm (sensitivity-check alternative)."""
    frames = []
    for f in store.frames:
        f64 = f.astype(np.float64)
        norms = np.maximum(np.linalg.norm(f64, axis=1, keepdims=True), STD_EPS)
        frames.append((f64 / norms).astype(np.float32))
    return FrameStore(store.clip_ids, store.dims, tuple(frames), store.source_id)


def concat_tables(tables) -> AggregatedTable:
    """Column-wise concatenation of aligned tables, provenance appended."""
    tables = list(tables)
    if not tables:
        raise ArgumentError("concat_tables needs at least one table")
    first = tables[0]
    for t in tables[1:]:
        if t.clip_ids != first.clip_ids:
            limit = min(len(t.clip_ids), len(first.clip_ids))
            pos = next(
                (i for i in range(limit) if t.clip_ids[i] != first.clip_ids[i]),
                limit,
            )
            raise AlignmentError(
                f"clip ids disagree at position {pos}: "
                f"{first.clip_ids[pos] if pos < len(first.clip_ids) else '<missing>'!r} vs "
                f"{t.clip_ids[pos] if pos < len(t.clip_ids) else '<missing>'!r}"
            )
    if len(tables) == 1:
        return first
    blocks = []
    offset = 0
    for t in tables:
        for b in t.provenance:
            blocks.append(ProvenanceBlock(b.source_id, offset + b.start, b.length))
        offset += t.dims
    rows = np.hstack([t.rows for t in tables])
    return AggregatedTable(first.clip_ids, offset, rows, tuple(blocks))


# ---------------------------------------------------------------------------
# Synthetic dataset generation
# ---------------------------------------------------------------------------
#
# All randomness comes from the counter-based Philox 4x64 generator, keyed by
# SeedSequence(seed, spawn_key=stream). Streams: (0,) tag prototypes,
# (1, attempt) tag activations, (2, attempt) split shuffle, (3,) frame noise.
# The draw order is fixed, so equal arguments give byte-identical outputs.

_MAX_SYNTH_RETRIES = 100


def _rng(seed: int, *stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def generate_synthetic(
    num_clips: int,
    num_tags: int,
    frame_dim: int,
    frames_per_clip: int,
    noise_scale: float,
    seed: int,
    max_retries: int = _MAX_SYNTH_RETRIES,
) -> tuple[FrameStore, TagMatrix, SplitAssignment]:
    """Generate a linearly separable toy dataset.

    Each tag gets a Gaussian prototype vector; each clip activates 1-3 tags
    and its embedding is the sum of the active prototypes; frames add
    Gaussian noise around the clip embedding. Clips are split 70/10/20 by a
    seeded shuffle, re-drawing activations and split until every tag has at
    least one positive in every split (bounded retries).
    """
    if min(num_clips, num_tags, frame_dim, frames_per_clip) <= 0:
        raise ArgumentError("num_clips, num_tags, frame_dim and frames_per_clip must be positive")
    if noise_scale < 0:
        raise ArgumentError("noise_scale must be >= 0")
    if num_clips < 10:
        raise ArgumentError("need at least 10 clips for non-empty 70/10/20 splits")
    if num_clips < 10 * num_tags:
        log.warning(
            "num_clips=%d is below the recommended 10*num_tags=%d; "
            "split positivity may need many retries", num_clips, 10 * num_tags,
        )

    prototypes = _rng(seed, 0).normal(size=(num_tags, frame_dim))

    labels = split = None
    for attempt in range(max_retries):
        act_rng = _rng(seed, 1, attempt)
        counts = act_rng.integers(1, min(3, num_tags) + 1, size=num_clips)
        cand = np.zeros((num_clips, num_tags), dtype=np.uint8)
        for i in range(num_clips):
            active = act_rng.choice(num_tags, size=int(counts[i]), replace=False)
            cand[i, active] = 1

        perm = _rng(seed, 2, attempt).permutation(num_clips)
        n_train = int(num_clips * 0.7)
        n_valid = int(num_clips * 0.1)
        cand_split = SplitAssignment(
            train_rows=tuple(sorted(perm[:n_train].tolist())),
            valid_rows=tuple(sorted(perm[n_train : n_train + n_valid].tolist())),
            test_rows=tuple(sorted(perm[n_train + n_valid :].tolist())),
        )
        ok = all(
            cand[list(rows)].sum(axis=0).min() >= 1
            for rows in (cand_split.train_rows, cand_split.valid_rows, cand_split.test_rows)
        )
        if ok:
            labels, split = cand, cand_split
            if attempt > 0:
                log.warning("synthetic generation satisfied split positivity after %d retries", attempt)
            break
    if labels is None:
        raise GenerationError(
            f"could not place >=1 positive per tag in every split within {max_retries} "
            f"attempts; increase num_clips (have {num_clips} clips for {num_tags} tags)"
        )

    clip_emb = labels.astype(np.float64) @ prototypes
    noise = _rng(seed, 3).normal(size=(num_clips, frames_per_clip, frame_dim))
    frames = tuple(
        (clip_emb[i] + noise_scale * noise[i]).astype(np.float32)
        for i in range(num_clips)
    )
    clip_ids = tuple(f"clip_{i:05d}" for i in range(num_clips))
    tag_names = tuple(f"tag_{t:03d}" for t in range(num_tags))

    store = FrameStore(clip_ids, frame_dim, frames, source_id="synthetic")
    tags = TagMatrix(clip_ids, tag_names, labels)
    split.validate(num_clips)
    return store, tags, split
