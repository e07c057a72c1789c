"""Compact per-subset expert models: a 2-layer tanh MLP with softmax output.

An expert is the server's entire stand-in for one data subset. Two kinds:
``self-supervised-rotation`` experts predict which of the four 90-degree
rotations was applied to an input (4 outputs), needing no labels;
``task-specific`` experts predict the subset's class labels.

Items without an image train on their feature vector reshaped to a square
single-channel grid, so the 4-way rotation task keeps its structure; the
manifest's feature_dim must then be a perfect square.

Weights are float32 (the wire format), training runs in float64 and casts
once at the end.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .core import Item
from .errors import (
    CorruptBlobError,
    DimensionMismatchError,
    DivergenceError,
    MissingImageError,
    MissingLabelsError,
    NonSquareImageError,
    SingleClassError,
    VersionMismatchError,
)

KIND_ROTATION = "self-supervised-rotation"
KIND_TASK = "task-specific"
ACTIVATION = "tanh"

EXPERT_FORMAT_VERSION = 1
_MAGIC = b"DSEX"
_KIND_CODES = {KIND_ROTATION: 0, KIND_TASK: 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

ROTATION_CLASSES = 4  # {0, 90, 180, 270} degrees


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    weight_init_scale: float = 1.0
    hidden: int = 64

    def __post_init__(self) -> None:
        if min(self.learning_rate, self.epochs, self.batch_size, self.weight_init_scale, self.hidden) <= 0:
            raise ValueError("all TrainConfig values must be positive")


@dataclass(frozen=True, eq=False)
class ExpertModel:
    kind: str
    w1: np.ndarray  # (d_in, hidden) float32
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, n_out)
    b2: np.ndarray  # (n_out,)
    activation: str = ACTIVATION
    subset_index: int = 0
    trained_on_size: int = 0
    version: int = EXPERT_FORMAT_VERSION

    @property
    def d_in(self) -> int:
        return int(self.w1.shape[0])

    @property
    def hidden(self) -> int:
        return int(self.w1.shape[1])

    @property
    def n_out(self) -> int:
        return int(self.w2.shape[1])

    def equals(self, other: "ExpertModel") -> bool:
        return (
            self.kind == other.kind
            and self.activation == other.activation
            and self.subset_index == other.subset_index
            and self.trained_on_size == other.trained_on_size
            and self.version == other.version
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("w1", "b1", "w2", "b2")
            )
        )


@dataclass(frozen=True)
class RotationInstance:
    """One augmented training example: item rotated by 90*j degrees."""

    base_item_id: str
    j: int
    input: np.ndarray
    target: int

    def __post_init__(self) -> None:
        if self.j not in (0, 1, 2, 3) or self.target != self.j:
            raise ValueError("rotation index must be in {0,1,2,3} and equal the target")


def rotate(image: np.ndarray, j: int) -> np.ndarray:
    """Rotate a square image counterclockwise by 90*j degrees.

    Pure index permutation, no interpolation. Accepts HxH or HxHxC arrays.
    """
    image = np.asarray(image)
    if image.ndim not in (2, 3) or image.shape[0] != image.shape[1]:
        raise NonSquareImageError(f"expected a square image, got shape {image.shape}")
    if j not in (0, 1, 2, 3):
        raise ValueError(f"rotation index must be in {{0,1,2,3}}, got {j}")
    return np.rot90(image, k=j, axes=(0, 1))


def rotation_input_grid(item: Item) -> np.ndarray:
    """The square array rotation acts on: the item's image, else its features
    reshaped to a sqrt(d) x sqrt(d) single-channel grid."""
    if item.image is not None:
        return item.image
    d = item.features.shape[0]
    side = math.isqrt(d)
    if side * side != d:
        raise MissingImageError(
            f"item {item.id!r} has no image and feature_dim {d} is not a perfect square"
        )
    return item.features.reshape(side, side)


def rotation_instances(item: Item) -> list[RotationInstance]:
    """All four rotated copies of one item, targets 0..3."""
    grid = rotation_input_grid(item)
    return [
        RotationInstance(base_item_id=item.id, j=j, input=rotate(grid, j), target=j)
        for j in range(ROTATION_CLASSES)
    ]


# --- MLP internals (float64; used by training and the gradient check) ---


def init_params(
    d_in: int, hidden: int, n_out: int, seed: int, scale: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, scale / math.sqrt(d_in), size=(d_in, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, scale / math.sqrt(hidden), size=(hidden, n_out))
    b2 = np.zeros(n_out)
    return w1, b1, w2, b2


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(params, x: np.ndarray) -> np.ndarray:
    w1, b1, w2, b2 = params
    h = np.tanh(x @ w1 + b1)
    return _softmax(h @ w2 + b2)


def loss_and_grads(params, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over the batch and its analytic parameter gradients."""
    w1, b1, w2, b2 = params
    n = x.shape[0]
    h = np.tanh(x @ w1 + b1)
    p = _softmax(h @ w2 + b2)
    # log(0) -> -inf on purpose: a diverged model must surface as a
    # non-finite loss, not be clamped into a finite one
    with np.errstate(divide="ignore"):
        loss = float(-np.mean(np.log(p[np.arange(n), y])))
    delta = p.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    dw2 = h.T @ delta
    db2 = delta.sum(axis=0)
    dh = delta @ w2.T
    dpre = dh * (1.0 - h * h)  # tanh'
    dw1 = x.T @ dpre
    db1 = dpre.sum(axis=0)
    return loss, (dw1, db1, dw2, db2)


def _sgd(x: np.ndarray, y: np.ndarray, n_out: int, cfg: TrainConfig, loss_out=None):
    """Plain mini-batch SGD; deterministic under cfg.seed."""
    n, d_in = x.shape
    params = list(init_params(d_in, cfg.hidden, n_out, cfg.seed, cfg.weight_init_scale))
    rng = np.random.default_rng(cfg.seed + 1)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(params, x[idx], y[idx])
            if not math.isfinite(loss):
                raise DivergenceError(f"training loss became non-finite ({loss})")
            for p, g in zip(params, grads):
                p -= cfg.learning_rate * g
        epoch_loss, _ = loss_and_grads(params, x, y)
        if not math.isfinite(epoch_loss):
            raise DivergenceError(f"training loss became non-finite ({epoch_loss})")
        if loss_out is not None:
            loss_out.append(epoch_loss)
    return params


def train_expert_ss(
    subset_items, cfg: TrainConfig, subset_index: int = 0, loss_out: list | None = None
) -> ExpertModel:
    """Train a rotation-prediction expert on all 4 rotations of every item.

    Pass ``loss_out`` to collect the epoch-end training losses.
    """
    items = list(subset_items)
    if not items:
        raise ValueError("subset is empty")
    instances = [inst for it in items for inst in rotation_instances(it)]
    x = np.stack([inst.input.reshape(-1) for inst in instances]).astype(np.float64)
    y = np.array([inst.target for inst in instances], dtype=np.int64)
    params = _sgd(x, y, ROTATION_CLASSES, cfg, loss_out)
    return _finalize(KIND_ROTATION, params, subset_index, len(items))


def train_expert_ts(
    subset_items, cfg: TrainConfig, subset_index: int = 0, loss_out: list | None = None
) -> ExpertModel:
    """Train a task-specific expert: cross-entropy on the subset's own labels.

    Class index c corresponds to the c-th label of subset_label_vocab(items).
    """
    items = list(subset_items)
    if not items:
        raise ValueError("subset is empty")
    if any(it.label is None for it in items):
        raise MissingLabelsError("task-specific training needs a label on every item")
    vocab = subset_label_vocab(items)
    if len(vocab) < 2:
        raise SingleClassError(f"subset has a single class {vocab[0]!r}; need at least 2")
    index = {lab: i for i, lab in enumerate(vocab)}
    x = np.stack([it.features for it in items]).astype(np.float64)
    y = np.array([index[it.label] for it in items], dtype=np.int64)
    params = _sgd(x, y, len(vocab), cfg, loss_out)
    return _finalize(KIND_TASK, params, subset_index, len(items))


def subset_label_vocab(items) -> list[str]:
    """Deterministic class order for a labeled subset (sorted distinct labels)."""
    return sorted({it.label for it in items if it.label is not None})


def _finalize(kind: str, params, subset_index: int, trained_on: int) -> ExpertModel:
    w1, b1, w2, b2 = (np.asarray(p, dtype=np.float32) for p in params)
    if not all(np.all(np.isfinite(p)) for p in (w1, b1, w2, b2)):
        raise DivergenceError("trained weights contain non-finite values")
    return ExpertModel(
        kind=kind,
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
        subset_index=subset_index,
        trained_on_size=trained_on,
    )


def predict(expert: ExpertModel, x: np.ndarray) -> np.ndarray:
    """Probability vector(s) for one input (d_in,) or a batch (m, d_in)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != expert.d_in:
        raise DimensionMismatchError(
            f"input has dimension {x.shape[-1]}, expert expects {expert.d_in}"
        )
    p = forward(
        (
            expert.w1.astype(np.float64),
            expert.b1.astype(np.float64),
            expert.w2.astype(np.float64),
            expert.b2.astype(np.float64),
        ),
        x,
    )
    return p[0] if single else p


def hidden_activations(expert: ExpertModel, x: np.ndarray) -> np.ndarray:
    """Frozen penultimate representation: tanh(x W1 + b1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != expert.d_in:
        raise DimensionMismatchError(
            f"input has dimension {x.shape[-1]}, expert expects {expert.d_in}"
        )
    return np.tanh(x @ expert.w1.astype(np.float64) + expert.b1.astype(np.float64))


# --- blob format ---
# magic(4) version(u16) kind(u8) subset_index(u32) trained_on_size(u64)
# d_in(u32) hidden(u32) n_out(u32), then little-endian float32 weights:
# w1 row-major, b1, w2 row-major, b2.

_HEADER = struct.Struct("<4sHBIQIII")


def serialize_expert(expert: ExpertModel) -> bytes:
    header = _HEADER.pack(
        _MAGIC,
        expert.version,
        _KIND_CODES[expert.kind],
        expert.subset_index,
        expert.trained_on_size,
        expert.d_in,
        expert.hidden,
        expert.n_out,
    )
    body = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes()
        for a in (expert.w1, expert.b1, expert.w2, expert.b2)
    )
    return header + body


def deserialize_expert(blob: bytes) -> ExpertModel:
    if len(blob) < _HEADER.size:
        raise CorruptBlobError(f"blob too short ({len(blob)} bytes)")
    magic, version, kind_code, subset_index, trained_on, d_in, hidden, n_out = _HEADER.unpack_from(
        blob
    )
    if magic != _MAGIC:
        raise CorruptBlobError(f"bad magic {magic!r}")
    if version != EXPERT_FORMAT_VERSION:
        raise VersionMismatchError(
            f"blob format version {version}, this build reads {EXPERT_FORMAT_VERSION}"
        )
    if kind_code not in _KIND_NAMES:
        raise CorruptBlobError(f"unknown expert kind code {kind_code}")
    counts = (d_in * hidden, hidden, hidden * n_out, n_out)
    expected = _HEADER.size + 4 * sum(counts)
    if len(blob) != expected:
        raise CorruptBlobError(f"blob is {len(blob)} bytes, format implies {expected}")
    flat = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    if not np.all(np.isfinite(flat)):
        raise CorruptBlobError("blob contains non-finite weights")
    offs = np.cumsum((0,) + counts)
    w1 = flat[offs[0] : offs[1]].reshape(d_in, hidden).copy()
    b1 = flat[offs[1] : offs[2]].copy()
    w2 = flat[offs[2] : offs[3]].reshape(hidden, n_out).copy()
    b2 = flat[offs[3] : offs[4]].copy()
    return ExpertModel(
        kind=_KIND_NAMES[kind_code],
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
        subset_index=subset_index,
        trained_on_size=trained_on,
        version=version,
    )
