"""Weight-space diagnostics for trained probes.

A weight profile is the L1 norm of the weight matrix at each input
position (summed over tags; biases have no input position and are
excluded). Profiles of few-shot and full probes are compared by Pearson
correlation, and per-embedding-block magnitude shares show how much each
concatenated source contributes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ProvenanceBlock
from .errors import (
    ArgumentError,
    UndefinedCorrelationError,
    UndefinedShareError,
    ValidationError,
)
from .probe import ProbeModel


@dataclass(frozen=True)
class WeightProfile:
    """Per-input-position L1 weight norms of one model."""

    norms: np.ndarray
    provenance: dict

    def __post_init__(self):
        norms = np.ascontiguousarray(np.asarray(self.norms, dtype=np.float64))
        object.__setattr__(self, "norms", norms)
        if norms.ndim != 1:
            raise ValidationError("profile must be a vector")
        if (norms < 0).any() or not np.isfinite(norms).all():
            raise ValidationError("profile norms must be finite and >= 0")

    @property
    def dims(self) -> int:
        return self.norms.shape[0]

    def to_json(self) -> dict:
        return {"norms": self.norms.tolist(), "provenance": dict(self.provenance)}


@dataclass(frozen=True)
class BlockShares:
    """Fraction of total weight magnitude per provenance block."""

    shares: tuple[tuple[str, float], ...]

    def to_json(self) -> list[dict]:
        return [{"source": s, "share": v} for s, v in self.shares]


def position_norms(model: ProbeModel) -> WeightProfile:
    """norms[j] = sum over tags of |W[t, j]|."""
    return WeightProfile(
        norms=np.abs(model.weights).sum(axis=0),
        provenance=dict(model.provenance),
    )


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size < 2:
        raise ArgumentError("pearson needs two equal-length vectors of size >= 2")
    da = a - a.mean()
    db = b - b.mean()
    va = float(np.dot(da, da))
    vb = float(np.dot(db, db))
    if va == 0.0 or vb == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    r = float(np.dot(da, db) / np.sqrt(va * vb))
    return max(-1.0, min(1.0, r))


def weight_correlation(few: ProbeModel, full: ProbeModel) -> float:
    """Pearson correlation between the two models' position-norm profiles."""
    if few.dims != full.dims:
        raise ArgumentError(f"model dims differ: {few.dims} vs {full.dims}")
    if few.num_tags != full.num_tags:
        raise ArgumentError(
            f"models cover different tag sets: {few.num_tags} vs {full.num_tags} tags"
        )
    return pearson(position_norms(few).norms, position_norms(full).norms)


def block_shares(profile: WeightProfile, blocks) -> BlockShares:
    """Per-block share of the total weight magnitude; blocks must tile [0, dims)."""
    blocks = tuple(blocks)
    offset = 0
    for b in blocks:
        if not isinstance(b, ProvenanceBlock):
            raise ArgumentError("blocks must be ProvenanceBlock instances")
        if b.start != offset or b.length <= 0:
            raise ArgumentError(f"blocks must tile the profile without overlap, got {b}")
        offset += b.length
    if offset != profile.dims:
        raise ArgumentError(
            f"blocks cover {offset} positions, profile has {profile.dims}"
        )
    total = float(profile.norms.sum())
    if total == 0.0:
        raise UndefinedShareError("shares undefined for an all-zero profile")
    shares = tuple(
        (b.source_id, float(profile.norms[b.start : b.start + b.length].sum()) / total)
        for b in blocks
    )
    return BlockShares(shares=shares)
