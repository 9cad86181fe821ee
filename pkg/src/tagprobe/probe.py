"""One-vs-rest linear probe: scoring, BCE loss, gradients, training.

The probe is a single fully connected layer followed by a sigmoid, trained
with binary cross-entropy, which amounts to an independent logistic
regression per tag. Training is full-batch Adam from zero initialization:
the per-tag problem is convex, so this removes both batch-order and
init-seed nondeterminism and two runs on equal inputs produce bit-identical
parameters.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ArgumentError, FormatError, TrainingError, ValidationError
from .formats import FORMAT_VERSION, Reader, atomic_write_bytes


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 1000
    patience: int = 20
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    l2_penalty: float = 0.0
    probability_clamp: float = 1e-7

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be > 0")
        if self.patience < 1:
            raise ArgumentError("patience must be >= 1")
        if self.max_epochs < 0:
            raise ArgumentError("max_epochs must be >= 0")
        if self.l2_penalty < 0:
            raise ArgumentError("l2_penalty must be >= 0")
        if not 0 < self.probability_clamp < 0.5:
            raise ArgumentError("probability_clamp must be in (0, 0.5)")
        for b in (self.adam_beta1, self.adam_beta2):
            if not 0 <= b < 1:
                raise ArgumentError("adam betas must be in [0, 1)")

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class TrainHistory:
    train_losses: tuple[float, ...]
    valid_losses: tuple[float, ...]
    best_epoch: int
    stop_reason: str  # "patience" or "max_epochs"


@dataclass(frozen=True, eq=False)
class ProbeModel:
    """Weight matrix (num_tags x dims) plus bias, with training provenance."""

    weights: np.ndarray
    bias: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        b = np.ascontiguousarray(np.asarray(self.bias, dtype=np.float64))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ValidationError(
                f"weights {w.shape} and bias {b.shape} are inconsistent"
            )
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValidationError("model parameters must be finite")

    @property
    def num_tags(self) -> int:
        return self.weights.shape[0]

    @property
    def dims(self) -> int:
        return self.weights.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbeModel):
            return NotImplemented
        return (
            self.weights.shape == other.weights.shape
            and self.weights.tobytes() == other.weights.tobytes()
            and self.bias.tobytes() == other.bias.tobytes()
        )


def restrict_tags(model: ProbeModel, tag_indices) -> ProbeModel:
    """Model view holding only the given tag rows (for subset comparisons)."""
    idx = np.array([int(t) for t in tag_indices], dtype=np.int64)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= model.num_tags:
        raise ArgumentError("tag indices outside the model's tag range")
    provenance = dict(model.provenance)
    provenance["restricted_to"] = [int(t) for t in idx]
    return ProbeModel(model.weights[idx], model.bias[idx], provenance)


def forward(model: ProbeModel, X: np.ndarray) -> np.ndarray:
    """P = sigmoid(X W^T + b), one probability per (sample, tag)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dims:
        raise ArgumentError(
            f"feature matrix has shape {X.shape}, model expects (*, {model.dims})"
        )
    return sigmoid(X @ model.weights.T + model.bias)


def bce_loss(
    P: np.ndarray,
    Y: np.ndarray,
    weights: np.ndarray | None = None,
    l2_penalty: float = 0.0,
    clamp: float = 1e-7,
) -> float:
    """Mean binary cross-entropy over all cells plus l2_penalty * ||W||^2 / 2."""
    P = np.asarray(P, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if P.shape != Y.shape:
        raise ArgumentError(f"probability shape {P.shape} != label shape {Y.shape}")
    Pc = np.clip(P, clamp, 1.0 - clamp)
    loss = -float(np.mean(Y * np.log(Pc) + (1.0 - Y) * np.log(1.0 - Pc)))
    if l2_penalty and weights is not None:
        loss += 0.5 * l2_penalty * float(np.sum(np.asarray(weights) ** 2))
    return loss


def gradient(
    model: ProbeModel,
    X: np.ndarray,
    Y: np.ndarray,
    l2_penalty: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic BCE gradients: ((P-Y)^T X) / (S*T) + l2 W, and the bias analog."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (X.shape[0], model.num_tags):
        raise ArgumentError(
            f"label shape {Y.shape} inconsistent with {X.shape[0]} samples "
            f"and {model.num_tags} tags"
        )
    P = forward(model, X)
    scale = 1.0 / (X.shape[0] * model.num_tags)
    diff = P - Y
    grad_w = diff.T @ X * scale
    if l2_penalty:
        grad_w = grad_w + l2_penalty * model.weights
    grad_b = diff.sum(axis=0) * scale
    return grad_w, grad_b


def train(
    X_train: np.ndarray,
    Y_train: np.ndarray,
    X_valid: np.ndarray,
    Y_valid: np.ndarray,
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    provenance: dict | None = None,
) -> tuple[ProbeModel, TrainHistory]:
    """Full-batch Adam from zero init with early stopping on validation loss.

    Returns the parameter snapshot from the epoch with the lowest validation
    loss. The seed enters only the logged provenance; the optimization path
    itself is deterministic.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    Y_train = np.asarray(Y_train, dtype=np.float64)
    X_valid = np.asarray(X_valid, dtype=np.float64)
    Y_valid = np.asarray(Y_valid, dtype=np.float64)
    if X_train.ndim != 2 or X_train.shape[0] < 1:
        raise ArgumentError("need at least one training sample")
    if Y_train.shape[0] != X_train.shape[0] or Y_train.ndim != 2:
        raise ArgumentError("train features and labels disagree on sample count")
    if X_valid.shape[1:] != X_train.shape[1:] or Y_valid.shape[1:] != Y_train.shape[1:]:
        raise ArgumentError("valid shapes inconsistent with train shapes")
    if X_valid.shape[0] < 1:
        raise ArgumentError("need a non-empty validation set for early stopping")

    num_tags = Y_train.shape[1]
    dims = X_train.shape[1]
    lr = config.learning_rate
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_epsilon
    l2 = config.l2_penalty
    clamp = config.probability_clamp

    W = np.zeros((num_tags, dims))
    b = np.zeros(num_tags)
    m_w = np.zeros_like(W)
    v_w = np.zeros_like(W)
    m_b = np.zeros_like(b)
    v_b = np.zeros_like(b)

    prov = dict(provenance or {})
    prov.setdefault("seed", int(seed))
    prov["config_digest"] = config.digest()

    best_valid = np.inf
    best_w, best_b = W.copy(), b.copy()
    best_epoch = -1
    train_losses: list[float] = []
    valid_losses: list[float] = []
    stop_reason = "max_epochs"
    stale = 0

    scale = 1.0 / (X_train.shape[0] * num_tags)
    for epoch in range(config.max_epochs):
        diff = sigmoid(X_train @ W.T + b) - Y_train
        grad_w = diff.T @ X_train * scale
        if l2:
            grad_w = grad_w + l2 * W
        grad_b = diff.sum(axis=0) * scale

        t = epoch + 1
        m_w = b1 * m_w + (1 - b1) * grad_w
        v_w = b2 * v_w + (1 - b2) * grad_w**2
        m_b = b1 * m_b + (1 - b1) * grad_b
        v_b = b2 * v_b + (1 - b2) * grad_b**2
        mh_w = m_w / (1 - b1**t)
        vh_w = v_w / (1 - b2**t)
        mh_b = m_b / (1 - b1**t)
        vh_b = v_b / (1 - b2**t)
        W = W - lr * mh_w / (np.sqrt(vh_w) + eps)
        b = b - lr * mh_b / (np.sqrt(vh_b) + eps)

        train_loss = bce_loss(
            sigmoid(X_train @ W.T + b), Y_train, W, l2_penalty=l2, clamp=clamp
        )
        valid_loss = bce_loss(
            sigmoid(X_valid @ W.T + b), Y_valid, W, l2_penalty=l2, clamp=clamp
        )
        if not (np.isfinite(train_loss) and np.isfinite(valid_loss)):
            raise TrainingError(
                f"non-finite loss at epoch {epoch}: train={train_loss}, "
                f"valid={valid_loss}, |W|={np.linalg.norm(W):.3e}, "
                f"|b|={np.linalg.norm(b):.3e}"
            )
        train_losses.append(train_loss)
        valid_losses.append(valid_loss)

        if valid_loss < best_valid:
            best_valid = valid_loss
            best_w, best_b = W.copy(), b.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                stop_reason = "patience"
                break

    history = TrainHistory(
        train_losses=tuple(train_losses),
        valid_losses=tuple(valid_losses),
        best_epoch=best_epoch,
        stop_reason=stop_reason,
    )
    return ProbeModel(best_w, best_b, prov), history


# ---------------------------------------------------------------------------
# FSP1 serialization: magic, u32 version, u32 num_tags, u32 dims, float64
# weights row-major, float64 bias, u32-length-prefixed JSON provenance.
# ---------------------------------------------------------------------------

def save_model(model: ProbeModel, path) -> Path:
    buf = bytearray(b"FSP1")
    buf += struct.pack("<I", FORMAT_VERSION)
    buf += struct.pack("<I", model.num_tags)
    buf += struct.pack("<I", model.dims)
    buf += np.ascontiguousarray(model.weights, dtype="<f8").tobytes()
    buf += np.ascontiguousarray(model.bias, dtype="<f8").tobytes()
    trailer = json.dumps(model.provenance, sort_keys=True, separators=(",", ":"))
    raw = trailer.encode("utf-8")
    buf += struct.pack("<I", len(raw)) + raw
    return atomic_write_bytes(path, bytes(buf))


def load_model(path) -> ProbeModel:
    from .formats import _read_bytes

    r = Reader(_read_bytes(path), name=str(path))
    r.expect_magic(b"FSP1")
    r.expect_version()
    num_tags = r.u32()
    at = r.pos
    dims = r.u32()
    if num_tags == 0 or dims == 0:
        raise FormatError(f"{r.name}: degenerate header", offset=at)
    w_start = r.pos
    weights = np.frombuffer(r.take(num_tags * dims * 8), dtype="<f8").reshape(
        num_tags, dims
    ).copy()
    b_start = r.pos
    bias = np.frombuffer(r.take(num_tags * 8), dtype="<f8").copy()
    bad_w = np.flatnonzero(~np.isfinite(weights.ravel()))
    if bad_w.size:
        raise FormatError(f"{r.name}: non-finite weight", offset=w_start + int(bad_w[0]) * 8)
    bad_b = np.flatnonzero(~np.isfinite(bias))
    if bad_b.size:
        raise FormatError(f"{r.name}: non-finite bias", offset=b_start + int(bad_b[0]) * 8)
    trailer = r.string()
    r.done()
    try:
        provenance = json.loads(trailer) if trailer else {}
    except json.JSONDecodeError as e:
        raise FormatError(f"{r.name}: provenance trailer is not valid JSON") from e
    return ProbeModel(weights, bias, provenance)
