"""Few-shot linear-probe benchmark engine for multi-label music tagging."""

__version__ = "0.1.0"

from .data import (
    AggregatedTable,
    FrameStore,
    NormStats,
    ProvenanceBlock,
    SplitAssignment,
    TagMatrix,
    aggregate_frames,
    compute_norm_stats,
    concat_tables,
    generate_synthetic,
    l2_normalize_frames,
    standardize_frames,
)
from .sampler import SupportSet, TagOrder, order_tags, sample_support, support_labels
from .probe import ProbeModel, TrainConfig, TrainHistory, forward, bce_loss, gradient, train
from .metrics import MetricsReport, average_precision, evaluate, roc_auc
from .analysis import BlockShares, WeightProfile, block_shares, pearson, position_norms, weight_correlation

__all__ = [
    "__version__",
    "AggregatedTable",
    "FrameStore",
    "NormStats",
    "ProvenanceBlock",
    "SplitAssignment",
    "TagMatrix",
    "aggregate_frames",
    "compute_norm_stats",
    "concat_tables",
    "generate_synthetic",
    "l2_normalize_frames",
    "standardize_frames",
    "SupportSet",
    "TagOrder",
    "order_tags",
    "sample_support",
    "support_labels",
    "ProbeModel",
    "TrainConfig",
    "TrainHistory",
    "forward",
    "bce_loss",
    "gradient",
    "train",
    "MetricsReport",
    "average_precision",
    "evaluate",
    "roc_auc",
    "BlockShares",
    "WeightProfile",
    "block_shares",
    "pearson",
    "position_norms",
    "weight_correlation",
]
