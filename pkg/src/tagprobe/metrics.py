"""Ranking metrics: per-tag average precision and ROC-AUC over the test split.

Average precision is the step-interpolated retrieval estimator
sum_n (R_n - R_{n-1}) * P_n over descending-score thresholds, with equal
scores grouped into a single threshold. AUC is the Mann-Whitney statistic
(ties count 0.5), computed from tie-averaged ranks. Tags where a metric is
undefined on the test split are excluded from the means and reported with a
reason, never imputed. All arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, UndefinedMetricError
from .probe import ProbeModel, forward

EXCLUDE_NO_POSITIVES = "no_positives"
EXCLUDE_NO_NEGATIVES = "no_negatives"


def _check_binary(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ArgumentError(f"scores {scores.shape} and labels {labels.shape} differ")
    if scores.size == 0:
        raise ArgumentError("empty score vector")
    if not np.isfinite(scores).all():
        raise ArgumentError("scores must be finite")
    u = np.unique(labels)
    if not np.isin(u, (0, 1)).all():
        raise ArgumentError("labels must be 0/1")
    return scores, labels.astype(np.int64)


def average_precision(scores, labels) -> float:
    scores, labels = _check_binary(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision undefined without positives")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # last index of each equal-score group = one threshold
    ends = np.flatnonzero(np.diff(s) != 0)
    ends = np.append(ends, s.size - 1)
    tp = np.cumsum(y)[ends].astype(np.float64)
    covered = (ends + 1).astype(np.float64)
    precision = tp / covered
    recall = tp / n_pos
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * precision))


def roc_auc(scores, labels) -> float:
    scores, labels = _check_binary(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0:
        raise UndefinedMetricError("AUC undefined without positives")
    if n_neg == 0:
        raise UndefinedMetricError("AUC undefined without negatives")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    # tie-averaged 1-based ranks
    ranks = np.empty(s.size, dtype=np.float64)
    start = 0
    for end in np.append(np.flatnonzero(np.diff(s) != 0), s.size - 1):
        end = int(end)
        ranks[start : end + 1] = 0.5 * (start + end) + 1.0
        start = end + 1
    rank_of = np.empty(s.size, dtype=np.float64)
    rank_of[order] = ranks
    pos_rank_sum = float(rank_of[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class MetricsReport:
    """Per-tag AP/AUC plus their means over the retained tags."""

    tag_indices: tuple[int, ...]
    ap: tuple[float, ...]
    auc: tuple[float, ...]
    map: float
    mean_auc: float
    excluded_tags: tuple[tuple[int, str], ...]
    num_test_rows: int

    @property
    def retained_tags(self) -> tuple[int, ...]:
        excluded = {t for t, _ in self.excluded_tags}
        return tuple(t for t in self.tag_indices if t not in excluded)

    def to_json(self) -> dict:
        def clean(v: float) -> float | None:
            return None if math.isnan(v) else v

        return {
            "map": clean(self.map),
            "mean_auc": clean(self.mean_auc),
            "num_test_rows": self.num_test_rows,
            "per_tag": [
                {"tag": t, "ap": clean(a), "auc": clean(u)}
                for t, a, u in zip(self.tag_indices, self.ap, self.auc)
            ],
            "excluded_tags": [
                {"tag": t, "reason": reason} for t, reason in self.excluded_tags
            ],
        }


def score_metrics(scores: np.ndarray, Y: np.ndarray, tag_subset) -> MetricsReport:
    """Per-tag AP/AUC of score columns against label columns.

    ``tag_subset`` gives the global tag index of each column; tags whose
    test labels are single-class are excluded with a reason and skipped in
    the means.
    """
    scores = np.asarray(scores, dtype=np.float64)
    Y = np.asarray(Y)
    tag_subset = [int(t) for t in tag_subset]
    if not tag_subset:
        raise ArgumentError("tag subset must be non-empty")
    if scores.shape != (Y.shape[0], len(tag_subset)) or Y.shape[1] != len(tag_subset):
        raise ArgumentError(
            f"scores {scores.shape} / labels {Y.shape} inconsistent with "
            f"{len(tag_subset)} tags"
        )
    ap: list[float] = []
    auc: list[float] = []
    excluded: list[tuple[int, str]] = []
    for j, tag in enumerate(tag_subset):
        col = Y[:, j]
        n_pos = int(col.sum())
        if n_pos == 0:
            excluded.append((tag, EXCLUDE_NO_POSITIVES))
            ap.append(float("nan"))
            auc.append(float("nan"))
            continue
        if n_pos == col.size:
            excluded.append((tag, EXCLUDE_NO_NEGATIVES))
            ap.append(float("nan"))
            auc.append(float("nan"))
            continue
        ap.append(average_precision(scores[:, j], col))
        auc.append(roc_auc(scores[:, j], col))
    retained = [j for j in range(len(tag_subset)) if not math.isnan(ap[j])]
    if retained:
        mean_ap = float(np.mean([ap[j] for j in retained]))
        mean_auc = float(np.mean([auc[j] for j in retained]))
    else:
        mean_ap = float("nan")
        mean_auc = float("nan")
    return MetricsReport(
        tag_indices=tuple(tag_subset),
        ap=tuple(ap),
        auc=tuple(auc),
        map=mean_ap,
        mean_auc=mean_auc,
        excluded_tags=tuple(excluded),
        num_test_rows=int(Y.shape[0]),
    )


def evaluate(model: ProbeModel, X_test, Y_test, tag_subset=None) -> MetricsReport:
    """Forward-score the full test split and compute per-tag AP/AUC.

    ``Y_test`` holds all tag columns; ``tag_subset`` selects which global
    tags to score (default: all model tags). The model must carry one row
    per entry of ``tag_subset`` (in that order), or one row per global tag;
    if both readings fit, the tag_subset-aligned one wins.
    """
    X_test = np.asarray(X_test, dtype=np.float64)
    Y_test = np.asarray(Y_test)
    if tag_subset is None:
        tag_subset = list(range(Y_test.shape[1]))
    tag_subset = [int(t) for t in tag_subset]
    if not tag_subset:
        raise ArgumentError("tag subset must be non-empty")
    if any(not 0 <= t < Y_test.shape[1] for t in tag_subset):
        raise ArgumentError("tag subset outside label columns")
    if model.num_tags == len(tag_subset):
        scores = forward(model, X_test)
    elif model.num_tags == Y_test.shape[1]:
        scores = forward(model, X_test)[:, tag_subset]
    else:
        raise ArgumentError(
            f"model has {model.num_tags} tags; expected {len(tag_subset)} "
            f"or {Y_test.shape[1]}"
        )
    return score_metrics(scores, Y_test[:, tag_subset], tag_subset)
