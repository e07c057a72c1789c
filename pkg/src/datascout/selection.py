"""Turn an accuracy report into expert weights, per-item probabilities and a
budget-capped sample of source items.

Pipeline: min-max normalize the K accuracies, sharpen them through a
temperature softmax (default T=0.1) into expert weights w, spread each
expert's weight uniformly over its subset (pi(x) = w_i / |S_i| for the
expert i owning x), then draw a without-replacement weighted sample of
min(budget, |S|) distinct items.

All functions are pure; determinism is carried entirely by the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptySourceError,
    InvalidBudgetError,
    LengthMismatchError,
    NonFiniteInputError,
    NonPositiveTemperatureError,
)
from .gating import Partition

DEFAULT_TEMPERATURE = 0.1


@dataclass(frozen=True)
class WeightVector:
    """Per-expert importance weights summing to 1."""

    w: tuple[float, ...]
    temperature: float = DEFAULT_TEMPERATURE
    normalization_record: tuple[float, float] | None = None  # (z_min, z_max)

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.w):
            raise ValueError("weights must be non-negative")
        if abs(sum(self.w) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {sum(self.w)}")


@dataclass(frozen=True)
class Recommendation:
    """Budget-capped ordered sample of source items, with its audit trail."""

    dataset_ref: str
    budget: int
    sampled_ids: tuple[str, ...]
    urls: tuple[str, ...]
    pi_summary: tuple[dict, ...]  # per expert: {"expert", "w", "size"}
    seed: int
    padded: bool = False

    def to_json(self) -> str:
        return json.dumps(
            {
                "dataset_ref": self.dataset_ref,
                "budget": self.budget,
                "seed": self.seed,
                "flags": {"padded": self.padded},
                "items": [
                    {"id": i, "url": u} for i, u in zip(self.sampled_ids, self.urls)
                ],
                "weights": list(self.pi_summary),
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "Recommendation":
        obj = json.loads(text)
        return Recommendation(
            dataset_ref=str(obj["dataset_ref"]),
            budget=int(obj["budget"]),
            sampled_ids=tuple(str(e["id"]) for e in obj["items"]),
            urls=tuple(str(e["url"]) for e in obj["items"]),
            pi_summary=tuple(obj["weights"]),
            seed=int(obj["seed"]),
            padded=bool(obj["flags"]["padded"]),
        )

    def url_list(self) -> str:
        """Plain-text export: one URL per line."""
        return "".join(u + "\n" for u in self.urls)


def normalize_scores(z) -> np.ndarray:
    """Min-max normalize accuracies to [0, 1]; a constant vector maps to all
    0.5 so tied experts fall through to uniform weighting."""
    z = np.asarray(z, dtype=np.float64)
    if z.size < 1:
        raise ValueError("need at least one score")
    if not np.all(np.isfinite(z)):
        raise NonFiniteInputError(f"scores contain non-finite values: {z}")
    lo, hi = float(z.min()), float(z.max())
    if hi == lo:
        return np.full(z.shape, 0.5)
    return (z - lo) / (hi - lo)


def softmax_weights(
    z_norm,
    temperature: float = DEFAULT_TEMPERATURE,
    normalization_record: tuple[float, float] | None = None,
) -> WeightVector:
    """Temperature softmax with max-subtraction: w_i = exp(z_i/T) / sum."""
    if temperature <= 0:
        raise NonPositiveTemperatureError(f"temperature must be > 0, got {temperature}")
    z = np.asarray(z_norm, dtype=np.float64)
    scaled = z / temperature
    scaled -= scaled.max()
    e = np.exp(scaled)
    w = e / e.sum()
    return WeightVector(
        w=tuple(float(v) for v in w),
        temperature=temperature,
        normalization_record=normalization_record,
    )


def weights_from_scores(z, temperature: float = DEFAULT_TEMPERATURE) -> WeightVector:
    """normalize_scores + softmax_weights, recording (z_min, z_max) for audit."""
    raw = np.asarray(z, dtype=np.float64)
    z_norm = normalize_scores(raw)
    return softmax_weights(
        z_norm, temperature, normalization_record=(float(raw.min()), float(raw.max()))
    )


def item_probabilities(w: WeightVector, partition: Partition) -> dict[str, float]:
    """Per-item sampling probability: the owning expert's weight spread
    uniformly over that expert's subset. Sums to 1 over the source set."""
    if len(w.w) != partition.K:
        raise LengthMismatchError(
            f"weight vector has {len(w.w)} entries, partition has K={partition.K}"
        )
    return {
        item_id: w.w[g] / partition.sizes[g] for item_id, g in partition.assignment.items()
    }


def sample_budget(
    pi: dict[str, float],
    b: int,
    seed: int = 0,
    *,
    dataset_ref: str = "",
    url_map: dict[str, str] | None = None,
    pi_summary: tuple[dict, ...] = (),
) -> Recommendation:
    """Weighted sampling without replacement of min(b, |S|) distinct items.

    Uses the exponential-key method: each positive-probability item draws a
    key log(u)/pi(x) from a seeded generator and the b largest keys win, which
    selects at rate pi while guaranteeing distinct items. If fewer than b
    items have positive probability, the remainder is padded from the
    zero-probability items in id order and the result is flagged.
    """
    if not pi:
        raise EmptySourceError("no items to sample from")
    if b < 1:
        raise InvalidBudgetError(f"budget must be >= 1, got {b}")
    ids = sorted(pi.keys())
    probs = np.array([pi[i] for i in ids], dtype=np.float64)
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("probabilities must be finite and non-negative")
    rng = np.random.default_rng(seed)
    u = rng.random(len(ids))
    positive = probs > 0
    with np.errstate(divide="ignore"):
        keys = np.where(positive, np.log(u) / probs, -np.inf)
    take = min(b, len(ids))
    order = np.argsort(-keys, kind="stable")
    n_pos = int(np.count_nonzero(positive))
    chosen = [ids[i] for i in order[: min(take, n_pos)]]
    padded = False
    if len(chosen) < take:
        padded = True
        zero_ids = sorted(ids[i] for i in np.flatnonzero(~positive))
        chosen.extend(zero_ids[: take - len(chosen)])
    urls = tuple((url_map or {}).get(i, "") for i in chosen)
    return Recommendation(
        dataset_ref=dataset_ref,
        budget=b,
        sampled_ids=tuple(chosen),
        urls=urls,
        pi_summary=pi_summary,
        seed=seed,
        padded=padded,
    )


def weight_summary(w: WeightVector, partition: Partition) -> tuple[dict, ...]:
    """Per-expert rows for the recommendation audit trail."""
    return tuple(
        {"expert": i, "w": float(w.w[i]), "size": int(partition.sizes[i])}
        for i in range(partition.K)
    )
