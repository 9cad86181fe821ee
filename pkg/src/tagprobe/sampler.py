"""Deterministic construction of nested N-way-K-shot support sets.

Each tag owns an RNG stream derived from the root seed and the tag index,
so its candidate permutation never depends on N or K. Selection proceeds
shot-by-shot across the chosen tags (round-robin): round j hands every tag
its (j+1)-th pick. Growing K only appends rounds and growing N only appends
tags inside each round, which yields the required nesting: per-tag picks at
(N, K) are prefixes of the picks at (N, K' >= K), and the union of selected
rows at (N, K) is contained in the union at any (N' >= N, K' >= K).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .data import SplitAssignment, TagMatrix
from .errors import ArgumentError, ValidationError

ORDER_POLICIES = ("frequency_descending", "manifest_order", "seeded_shuffle")

# spawn-key namespaces; 0-3 belong to the synthetic generator
_TAG_STREAM = 10
_SHUFFLE_STREAM = 11


def _rng(seed: int, *stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class TagOrder:
    """A permutation of tag indices plus the policy that produced it."""

    order: tuple[int, ...]
    policy: str

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(t) for t in self.order))
        if sorted(self.order) != list(range(len(self.order))):
            raise ValidationError("tag order must be a permutation of [0, num_tags)")
        if self.policy not in ORDER_POLICIES:
            raise ArgumentError(f"unknown order policy {self.policy!r}")

    @property
    def num_tags(self) -> int:
        return len(self.order)


def order_tags(
    tags: TagMatrix,
    split: SplitAssignment,
    policy: str = "frequency_descending",
    seed: int = 0,
) -> TagOrder:
    """Deterministic tag permutation per policy and seed."""
    num_tags = tags.num_tags
    if policy == "manifest_order":
        order = tuple(range(num_tags))
    elif policy == "frequency_descending":
        counts = tags.labels[list(split.train_rows)].sum(axis=0).astype(np.int64)
        # ties broken by ascending tag index
        order = tuple(int(t) for t in np.lexsort((np.arange(num_tags), -counts)))
    elif policy == "seeded_shuffle":
        order = tuple(int(t) for t in _rng(seed, _SHUFFLE_STREAM).permutation(num_tags))
    else:
        raise ArgumentError(f"unknown order policy {policy!r}")
    return TagOrder(order, policy)


@dataclass(frozen=True)
class SupportSet:
    """The deterministic N-way-K-shot selection of training rows."""

    n_way: int
    k_shot: int
    tag_indices: tuple[int, ...]
    rows_by_tag: tuple[tuple[int, ...], ...]
    union_rows: tuple[int, ...]
    seed: int
    shortfalls: tuple[int, ...]
    order_policy: str
    dedup: bool = True

    def __post_init__(self):
        if len(self.tag_indices) != self.n_way:
            raise ValidationError("tag_indices must have n_way entries")
        if len(self.rows_by_tag) != self.n_way or len(self.shortfalls) != self.n_way:
            raise ValidationError("per-tag rows/shortfalls must align with tag_indices")
        if len(self.union_rows) > self.n_way * self.k_shot:
            raise ValidationError("union exceeds n_way * k_shot rows")

    def to_json(self) -> dict:
        return {
            "n_way": self.n_way,
            "k_shot": self.k_shot,
            "seed": self.seed,
            "order_policy": self.order_policy,
            "dedup": self.dedup,
            "tags": [
                {"tag": t, "rows": list(rows), "shortfall": s}
                for t, rows, s in zip(self.tag_indices, self.rows_by_tag, self.shortfalls)
            ],
            "union_rows": list(self.union_rows),
        }

    def digest(self) -> str:
        payload = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    @property
    def total_shortfall(self) -> int:
        return int(sum(self.shortfalls))


def sample_support(
    tags: TagMatrix,
    split: SplitAssignment,
    order: TagOrder,
    n_way: int,
    k_shot: int,
    seed: int,
    dedup: bool = True,
) -> SupportSet:
    """Select up to k_shot positive train rows for the first n_way tags.

    A clip already selected for an earlier tag is skipped for later tags
    unless ``dedup`` is False (then tags may share clips and the union
    shrinks). Tags with fewer than k_shot available positives yield a
    recorded shortfall, never an error.
    """
    if order.num_tags != tags.num_tags:
        raise ArgumentError("tag order does not match the tag matrix")
    if not 1 <= n_way <= tags.num_tags:
        raise ArgumentError(f"n_way={n_way} outside [1, {tags.num_tags}]")
    if k_shot < 1:
        raise ArgumentError(f"k_shot={k_shot} must be >= 1")

    chosen = order.order[:n_way]
    train_rows = np.array(sorted(split.train_rows), dtype=np.int64)

    perms: list[list[int]] = []
    for tag in chosen:
        positives = train_rows[tags.labels[train_rows, tag] == 1]
        perm = _rng(seed, _TAG_STREAM, tag).permutation(positives)
        perms.append([int(r) for r in perm])

    cursors = [0] * n_way
    picks: list[list[int]] = [[] for _ in range(n_way)]
    used: set[int] = set()
    for _ in range(k_shot):
        for i in range(n_way):
            stream = perms[i]
            j = cursors[i]
            if dedup:
                while j < len(stream) and stream[j] in used:
                    j += 1
            if j < len(stream):
                row = stream[j]
                picks[i].append(row)
                used.add(row)
                cursors[i] = j + 1

    union = sorted(used) if dedup else sorted({r for rows in picks for r in rows})
    shortfalls = tuple(k_shot - len(p) for p in picks)
    return SupportSet(
        n_way=n_way,
        k_shot=k_shot,
        tag_indices=tuple(chosen),
        rows_by_tag=tuple(tuple(p) for p in picks),
        union_rows=tuple(union),
        seed=int(seed),
        shortfalls=shortfalls,
        order_policy=order.policy,
        dedup=dedup,
    )


def support_labels(tags: TagMatrix, support: SupportSet) -> tuple[np.ndarray, np.ndarray]:
    """Feature row indices plus the multi-hot label submatrix for a support set.

    The submatrix is restricted to the support's tags (columns follow
    tag_indices order) and the union rows; a clip positive for several
    selected tags keeps all its positives.
    """
    if not support.union_rows:
        raise ValidationError("support set has an empty union of rows")
    rows = np.array(support.union_rows, dtype=np.int64)
    cols = np.array(support.tag_indices, dtype=np.int64)
    sub = tags.labels[np.ix_(rows, cols)]
    return rows, sub
