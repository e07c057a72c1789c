"""Desk-scale downstream-transfer comparison and the incremental-growth check.

For each budget and selection method, a small classifier is trained on the
selected source subset together with the target train set and scored on a
held-out target validation set. The interesting output is the ordering of
the methods, not any absolute accuracy.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..core import DatasetManifest, Item
from ..experts import ExpertModel, TrainConfig, predict, subset_label_vocab, train_expert_ts
from ..fastadapt import proxy_accuracy
from ..gating import GatingConfig, Partition
from ..selection import item_probabilities, sample_budget, weights_from_scores
from ..server.registry import Registry

METHODS = ("weighted", "uniform", "full", "none")


@dataclass(frozen=True)
class DownstreamResult:
    method: str
    budget: int
    seed: int
    accuracy: float


def _train_and_score(
    train_items: list[Item], val: DatasetManifest, seed: int, cfg: TrainConfig
) -> float:
    model = train_expert_ts(train_items, replace(cfg, seed=seed))
    vocab = subset_label_vocab(train_items)
    index = {lab: i for i, lab in enumerate(vocab)}
    x = val.feature_matrix()
    probs = predict(model, x)
    pred = np.argmax(probs, axis=1)
    truth = np.array([index[it.label] for it in val.items])
    return float(np.mean(pred == truth))


def downstream_compare(
    source: DatasetManifest,
    partition: Partition,
    experts: list[ExpertModel],
    target: DatasetManifest,
    target_val: DatasetManifest,
    budgets: list[float],
    seeds: list[int],
    train_cfg: TrainConfig | None = None,
) -> list[DownstreamResult]:
    """Train-on-selection comparison across methods, budgets and seeds.

    Budgets are fractions of the source size. The z scores are computed once
    (they do not depend on budget or seed); only the sampling and the
    downstream training vary with the seed.
    """
    cfg = train_cfg or TrainConfig(hidden=32)
    by_id = source.by_id()
    n = len(source.items)
    z = [proxy_accuracy(e, target) for e in experts]
    weights = weights_from_scores(z)
    pi_weighted = item_probabilities(weights, partition)
    pi_uniform = {it.id: 1.0 / n for it in source.items}
    target_items = list(target.items)

    results: list[DownstreamResult] = []
    for seed in seeds:
        full_acc = _train_and_score(list(source.items) + target_items, target_val, seed, cfg)
        none_acc = _train_and_score(target_items, target_val, seed, cfg)
        for frac in budgets:
            b = max(1, round(frac * n))
            results.append(DownstreamResult("full", b, seed, full_acc))
            results.append(DownstreamResult("none", b, seed, none_acc))
            for method, pi in (("weighted", pi_weighted), ("uniform", pi_uniform)):
                rec = sample_budget(pi, b, seed)
                chosen = [by_id[i] for i in rec.sampled_ids]
                acc = _train_and_score(chosen + target_items, target_val, seed, cfg)
                results.append(DownstreamResult(method, b, seed, acc))
    return results


def mean_accuracy(results: list[DownstreamResult], method: str, budget: int) -> float:
    vals = [r.accuracy for r in results if r.method == method and r.budget == budget]
    if not vals:
        raise ValueError(f"no results for method={method} budget={budget}")
    return float(np.mean(vals))


def results_to_json(results: list[DownstreamResult]) -> str:
    return json.dumps(
        [
            {"method": r.method, "budget": r.budget, "seed": r.seed, "accuracy": r.accuracy}
            for r in results
        ],
        sort_keys=True,
    )


def results_to_csv(results: list[DownstreamResult]) -> str:
    lines = ["method,budget,seed,accuracy"]
    lines += [f"{r.method},{r.budget},{r.seed},{r.accuracy:.6f}" for r in results]
    return "\n".join(lines) + "\n"


def incremental_build_check(
    fixture_a: DatasetManifest,
    fixture_a_scaled: DatasetManifest,
    fixture_b: DatasetManifest,
    store_root,
    gating_cfg: GatingConfig | None = None,
    train_cfg: TrainConfig | None = None,
    repeats: int = 3,
) -> dict:
    """Adding a dataset must not retrain existing experts, and its build time
    must not depend on how much data is already indexed.

    Builds B next to A and next to a scaled-up A in two fresh registries;
    asserts A's expert blobs are bit-identical before and after B's build and
    reports the median build(B) wall-clock for both registry sizes.
    """
    gating_cfg = gating_cfg or GatingConfig(K=2, scheme="unsupervised", seed=0)
    train_cfg = train_cfg or TrainConfig(epochs=10)
    store_root = Path(store_root)

    def run(reg_dir: Path, a_manifest: DatasetManifest) -> tuple[bool, float]:
        registry = Registry(reg_dir)
        a_id = registry.register_dataset(a_manifest)
        registry.build_index(a_id, gating_cfg, train_cfg)
        rec_a = registry.get_record(a_id)
        before = [registry.expert_blob(a_id, i) for i in range(rec_a.K)]
        times = []
        for rep in range(repeats):
            b_copy = DatasetManifest(
                name=f"{fixture_b.name}-rep{rep}",
                feature_dim=fixture_b.feature_dim,
                items=fixture_b.items,
                role=fixture_b.role,
                image_shape=fixture_b.image_shape,
                label_set=fixture_b.label_set,
            )
            b_id = registry.register_dataset(b_copy)
            start = time.perf_counter()
            registry.build_index(b_id, gating_cfg, train_cfg)
            times.append(time.perf_counter() - start)
        after = [registry.expert_blob(a_id, i) for i in range(rec_a.K)]
        unchanged = all(x == y for x, y in zip(before, after))
        return unchanged, float(np.median(times))

    unchanged_small, t_small = run(store_root / "small", fixture_a)
    unchanged_large, t_large = run(store_root / "large", fixture_a_scaled)
    return {
        "a_blobs_unchanged": bool(unchanged_small and unchanged_large),
        "build_b_seconds_small_a": t_small,
        "build_b_seconds_large_a": t_large,
        "ratio": t_large / t_small if t_small > 0 else float("inf"),
    }
