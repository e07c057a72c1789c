"""Domain confusion measurements: proxy A-distance and its relation to the
rotation-proxy accuracies.

A linear domain classifier is trained to separate one source subset from the
target set; its held-out balanced error eps yields the distance estimate
2*(1 - 2*eps). Near-zero distance means the subset is indistinguishable from
the target domain, which is exactly when its expert should score well on the
rotation proxy; the correlation experiment quantifies that relationship.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..core import DatasetManifest
from ..errors import DimensionMismatchError
from ..experts import ExpertModel, TrainConfig, train_expert_ss
from ..fastadapt import proxy_accuracy
from ..gating import GatingConfig, Partition, build_partition


@dataclass(frozen=True)
class SubsetConfusion:
    subset_index: int
    epsilon: float
    distance: float  # 2 * (1 - 2*epsilon)
    proxy_accuracy: float


@dataclass(frozen=True)
class ConfusionReport:
    subsets: tuple[SubsetConfusion, ...]
    rank_correlation: float | None  # spearman(z, distance); None when undefined
    correlation_undefined: bool
    best_proxy_subset: int
    nearest_subset: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "subsets": [
                    {
                        "subset_index": s.subset_index,
                        "epsilon": s.epsilon,
                        "distance": s.distance,
                        "proxy_accuracy": s.proxy_accuracy,
                    }
                    for s in self.subsets
                ],
                "rank_correlation": self.rank_correlation,
                "correlation_undefined": self.correlation_undefined,
                "best_proxy_subset": self.best_proxy_subset,
                "nearest_subset": self.nearest_subset,
            },
            sort_keys=True,
        )


def _fit_logistic(
    x: np.ndarray, y: np.ndarray, epochs: int = 300, lr: float = 0.5, l2: float = 1e-3
) -> tuple[np.ndarray, float]:
    """Full-batch GD logistic regression on standardized inputs."""
    mu, sd = x.mean(axis=0), x.std(axis=0) + 1e-9
    xs = (x - mu) / sd
    w = np.zeros(x.shape[1])
    b = 0.0
    n = x.shape[0]
    for _ in range(epochs):
        p = 1.0 / (1.0 + np.exp(-(xs @ w + b)))
        g = p - y
        w -= lr * (xs.T @ g / n + l2 * w)
        b -= lr * float(g.mean())
    # fold the standardization back into the weights
    w_raw = w / sd
    b_raw = b - float(mu @ w_raw)
    return w_raw, b_raw


def _balanced_error(w: np.ndarray, b: float, x0: np.ndarray, x1: np.ndarray) -> float:
    pred0 = (x0 @ w + b) > 0
    pred1 = (x1 @ w + b) > 0
    err0 = float(np.mean(pred0))  # class-0 points predicted as 1
    err1 = float(np.mean(~pred1))
    return 0.5 * (err0 + err1)


def proxy_a_distance(
    subset_features: np.ndarray, target_features: np.ndarray, seed: int = 0
) -> tuple[float, float]:
    """Held-out balanced domain-classifier error and the distance 2(1-2*eps).

    Each side is shuffled and split 50/50; the classifier trains on the first
    halves and eps is its balanced error on the second halves.
    """
    sub = np.asarray(subset_features, dtype=np.float64)
    tgt = np.asarray(target_features, dtype=np.float64)
    if sub.ndim != 2 or tgt.ndim != 2 or sub.shape[1] != tgt.shape[1]:
        raise DimensionMismatchError(
            f"feature dimensions differ: {sub.shape} vs {tgt.shape}"
        )
    if len(sub) < 2 or len(tgt) < 2:
        raise ValueError("both sides need at least 2 items")
    rng = np.random.default_rng(seed)
    sub = sub[rng.permutation(len(sub))]
    tgt = tgt[rng.permutation(len(tgt))]
    h_sub, h_tgt = len(sub) // 2, len(tgt) // 2
    x_train = np.vstack([sub[:h_sub], tgt[:h_tgt]])
    y_train = np.concatenate([np.zeros(h_sub), np.ones(h_tgt)])
    w, b = _fit_logistic(x_train, y_train)
    eps = _balanced_error(w, b, sub[h_sub:], tgt[h_tgt:])
    return eps, 2.0 * (1.0 - 2.0 * eps)


def _ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average rank for ties
        i = j + 1
    return ranks


def spearman(a, b) -> float | None:
    """Rank correlation; None when either side has no rank variance."""
    ra, rb = _ranks(np.asarray(a, dtype=np.float64)), _ranks(np.asarray(b, dtype=np.float64))
    sa, sb = ra.std(), rb.std()
    if sa == 0.0 or sb == 0.0:
        return None
    return float(np.mean((ra - ra.mean()) * (rb - rb.mean())) / (sa * sb))


def build_index_local(
    source: DatasetManifest, gating_cfg: GatingConfig, train_cfg: TrainConfig | None = None
) -> tuple[Partition, list[ExpertModel]]:
    """Partition + one rotation expert per subset, in memory (no registry)."""
    from dataclasses import replace

    train_cfg = train_cfg or TrainConfig()
    partition = build_partition(source, gating_cfg)
    by_id = source.by_id()
    experts = []
    for i in range(partition.K):
        subset = [by_id[item_id] for item_id in partition.members(i)]
        experts.append(
            train_expert_ss(subset, replace(train_cfg, seed=train_cfg.seed + i), subset_index=i)
        )
    return partition, experts


def correlation_experiment(
    source: DatasetManifest,
    partition: Partition,
    experts: list[ExpertModel],
    target: DatasetManifest,
    seed: int = 0,
) -> ConfusionReport:
    """Per-subset proxy accuracy and domain distance, plus their rank
    correlation (expected strongly negative: accurate expert, near domain)."""
    by_id = source.by_id()
    target_feats = target.feature_matrix()
    rows = []
    for i in range(partition.K):
        member_feats = np.stack([by_id[m].features for m in partition.members(i)])
        eps, dist = proxy_a_distance(member_feats, target_feats, seed=seed + i)
        z_i = proxy_accuracy(experts[i], target)
        rows.append(
            SubsetConfusion(subset_index=i, epsilon=eps, distance=dist, proxy_accuracy=z_i)
        )
    z = [r.proxy_accuracy for r in rows]
    d = [r.distance for r in rows]
    corr = spearman(z, d)
    return ConfusionReport(
        subsets=tuple(rows),
        rank_correlation=corr,
        correlation_undefined=corr is None,
        best_proxy_subset=int(np.argmax(z)),
        nearest_subset=int(np.argmin(d)),
    )
