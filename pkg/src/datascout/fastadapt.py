"""Client-side expert evaluation on the target dataset.

Produces the accuracy report that crosses the privacy boundary: K scalars in
[0, 1], one per downloaded expert, plus request metadata. Nothing derived
from individual target items ever leaves this module.

Two modes. ``proxy`` scores a rotation expert by inference only: the fraction
of (item, rotation) pairs whose rotation index the expert predicts, ties in
the argmax broken toward the lowest class. ``probe`` freezes the expert and
trains a fresh linear head on its hidden-layer representation of the target's
train split, scoring top-1 accuracy on the held-out split.
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass, field

import numpy as np

from .core import DatasetManifest, SplitSpec, split
from .errors import (
    KindMismatchError,
    MissingLabelsError,
    TooFewItemsError,
)
from .experts import (
    KIND_ROTATION,
    ExpertModel,
    hidden_activations,
    predict,
    rotate,
    rotation_input_grid,
)

MODES = ("proxy", "probe")


@dataclass(frozen=True)
class ProbeConfig:
    """Linear-probe adaptation knobs; the 80/20 split fraction is a knob, not
    a tuned value."""

    epochs: int = 10
    learning_rate: float = 0.01
    split: SplitSpec = field(default_factory=lambda: SplitSpec(train_fraction=0.8, seed=0))
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs and learning_rate must be positive")


@dataclass(frozen=True)
class AccuracyReport:
    """The entire client-to-server payload: K floats plus scalar metadata."""

    dataset_ref: str
    mode: str
    z: tuple[float, ...]
    target_size: int
    client_nonce: str

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if any(not (0.0 <= v <= 1.0) for v in self.z):
            raise ValueError("every accuracy must be in [0, 1]")

    def to_json(self) -> str:
        return json.dumps(
            {
                "dataset_ref": self.dataset_ref,
                "mode": self.mode,
                "z": list(self.z),
                "target_size": self.target_size,
                "client_nonce": self.client_nonce,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "AccuracyReport":
        obj = json.loads(text)
        return AccuracyReport(
            dataset_ref=str(obj["dataset_ref"]),
            mode=str(obj["mode"]),
            z=tuple(float(v) for v in obj["z"]),
            target_size=int(obj["target_size"]),
            client_nonce=str(obj["client_nonce"]),
        )


def proxy_accuracy(expert: ExpertModel, target: DatasetManifest) -> float:
    """Rotation-prediction accuracy of a frozen expert on the target set.

    Inference only; counts a hit when the argmax output index equals the
    applied rotation, averaged over all 4 rotations of every target item.
    """
    if expert.kind != KIND_ROTATION:
        raise KindMismatchError(f"proxy accuracy needs a rotation expert, got {expert.kind!r}")
    inputs = []
    targets = []
    for item in target.items:
        grid = rotation_input_grid(item)
        for j in range(4):
            inputs.append(rotate(grid, j).reshape(-1))
            targets.append(j)
    x = np.stack(inputs)
    probs = predict(expert, x)
    hits = np.argmax(probs, axis=1) == np.array(targets)
    return float(np.mean(hits))


def linear_probe(expert: ExpertModel, target: DatasetManifest, cfg: ProbeConfig) -> float:
    """Accuracy of a fresh linear head over the expert's frozen representation.

    Trains softmax regression on the target train split by full-batch gradient
    descent and returns top-1 accuracy on the validation split.
    """
    if any(it.label is None for it in target.items):
        raise MissingLabelsError("linear probe needs a label on every target item")
    if len(target.items) < 2:
        raise TooFewItemsError("linear probe needs at least 2 target items to split")
    train_ids, val_ids = split(target, cfg.split)
    by_id = target.by_id()
    labels = sorted({it.label for it in target.items})
    index = {lab: i for i, lab in enumerate(labels)}

    def embed(ids):
        x = np.stack([by_id[i].features for i in ids]).astype(np.float64)
        return hidden_activations(expert, x)

    h_tr = embed(train_ids)
    y_tr = np.array([index[by_id[i].label] for i in train_ids])
    h_va = embed(val_ids)
    y_va = np.array([index[by_id[i].label] for i in val_ids])

    rng = np.random.default_rng(cfg.seed)
    w = rng.normal(0.0, 0.01, size=(h_tr.shape[1], len(labels)))
    b = np.zeros(len(labels))
    n = h_tr.shape[0]
    for _ in range(cfg.epochs):
        logits = h_tr @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        delta = p
        delta[np.arange(n), y_tr] -= 1.0
        delta /= n
        w -= cfg.learning_rate * (h_tr.T @ delta)
        b -= cfg.learning_rate * delta.sum(axis=0)
    pred = np.argmax(h_va @ w + b, axis=1)
    return float(np.mean(pred == y_va))


def fast_adapt(
    experts: list[ExpertModel],
    target: DatasetManifest,
    mode: str = "proxy",
    cfg: ProbeConfig | None = None,
    dataset_ref: str = "",
) -> AccuracyReport:
    """Evaluate every expert in the bundle independently; z follows bundle order."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if cfg is None:
        cfg = ProbeConfig()
    z = []
    for i, expert in enumerate(experts):
        try:
            if mode == "proxy":
                z.append(proxy_accuracy(expert, target))
            else:
                z.append(linear_probe(expert, target, cfg))
        except KindMismatchError as exc:
            raise KindMismatchError(f"expert {i}: {exc}") from exc
    return AccuracyReport(
        dataset_ref=dataset_ref,
        mode=mode,
        z=tuple(z),
        target_size=len(target.items),
        client_nonce=secrets.token_hex(8),
    )
