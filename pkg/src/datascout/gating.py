"""Hard gating: partition a source dataset into K mutually exclusive subsets.

Two schemes: ``unsupervised`` clusters item feature vectors directly;
``superclass`` clusters per-class mean feature vectors so whole classes move
together. Either way every item lands in exactly one subset and no subset is
left empty (downstream per-item probabilities divide by subset size).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import DatasetManifest
from .errors import KTooLargeError, MissingLabelsError, UnknownItemError

SCHEMES = ("superclass", "unsupervised")

PARTITION_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GatingConfig:
    K: int
    scheme: str = "unsupervised"
    seed: int = 0
    max_iters: int = 100
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass(frozen=True, eq=False)
class Partition:
    """One-hot assignment of every source item to an expert index in [0, K)."""

    K: int
    assignment: dict[str, int]
    sizes: tuple[int, ...]
    centroids: np.ndarray  # (K, d)
    scheme: str
    seed: int

    def gate(self, item_id: str) -> int:
        """Return the unique expert index the item is assigned to."""
        try:
            return self.assignment[item_id]
        except KeyError:
            raise UnknownItemError(f"item {item_id!r} is not in the partition") from None

    def members(self, index: int) -> list[str]:
        return [i for i, g in self.assignment.items() if g == index]

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": PARTITION_FORMAT_VERSION,
                "K": self.K,
                "scheme": self.scheme,
                "seed": self.seed,
                "sizes": list(self.sizes),
                "centroids": [[float(x) for x in row] for row in self.centroids],
                "assignment": self.assignment,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "Partition":
        obj = json.loads(text)
        if obj.get("version") != PARTITION_FORMAT_VERSION:
            raise ValueError(f"unsupported partition format version {obj.get('version')}")
        return Partition(
            K=int(obj["K"]),
            assignment={str(k): int(v) for k, v in obj["assignment"].items()},
            sizes=tuple(int(s) for s in obj["sizes"]),
            centroids=np.asarray(obj["centroids"], dtype=np.float64),
            scheme=str(obj["scheme"]),
            seed=int(obj["seed"]),
        )


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centroids by squared-distance weighting."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = points[first]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen centroid
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # argmin breaks distance ties toward the lowest centroid index
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _repair_empty(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray, k: int) -> None:
    """Move the point farthest from its centroid into each empty cluster."""
    for j in range(k):
        while np.count_nonzero(labels == j) == 0:
            dist = np.sum((points - centroids[labels]) ** 2, axis=1)
            # only steal from clusters that can spare a point
            counts = np.bincount(labels, minlength=k)
            dist[counts[labels] <= 1] = -1.0
            donor = int(np.argmax(dist))
            labels[donor] = j
            centroids[j] = points[donor]


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's k-means with k-means++ seeding and empty-cluster repair.

    Deterministic under ``seed``; every returned cluster has at least one
    member; the within-cluster sum of squares never increases across
    iterations. Raises KTooLargeError when k exceeds the number of points.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise KTooLargeError(f"k={k} exceeds the {n} available points")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(points, k, rng)
    labels = _assign(points, centroids)
    _repair_empty(points, labels, centroids, k)
    for _ in range(max_iters):
        new_centroids = centroids.copy()
        for j in range(k):
            mask = labels == j
            if mask.any():
                new_centroids[j] = points[mask].mean(axis=0)
        movement = float(np.max(np.sqrt(np.sum((new_centroids - centroids) ** 2, axis=1))))
        centroids = new_centroids
        labels = _assign(points, centroids)
        _repair_empty(points, labels, centroids, k)
        if movement < tol:
            break
    return labels, centroids


def wcss(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    """Within-cluster sum of squares (the k-means objective)."""
    return float(np.sum((points - centroids[labels]) ** 2))


def unsupervised_partition(source: DatasetManifest, cfg: GatingConfig) -> Partition:
    """Partition by k-means over the item feature vectors."""
    if cfg.scheme != "unsupervised":
        raise ValueError(f"config scheme is {cfg.scheme!r}, expected 'unsupervised'")
    points = source.feature_matrix()
    labels, centroids = kmeans(points, cfg.K, cfg.seed, cfg.max_iters, cfg.tol)
    assignment = {it.id: int(lab) for it, lab in zip(source.items, labels)}
    sizes = tuple(int(c) for c in np.bincount(labels, minlength=cfg.K))
    return Partition(
        K=cfg.K,
        assignment=assignment,
        sizes=sizes,
        centroids=centroids,
        scheme=cfg.scheme,
        seed=cfg.seed,
    )


def superclass_partition(source: DatasetManifest, cfg: GatingConfig) -> Partition:
    """Partition by k-means over per-class mean features; classes move whole.

    Every item labeled c inherits the cluster of c's mean feature vector, so
    for each class all its items share one expert index.
    """
    if cfg.scheme != "superclass":
        raise ValueError(f"config scheme is {cfg.scheme!r}, expected 'superclass'")
    if any(it.label is None for it in source.items):
        raise MissingLabelsError(
            f"manifest {source.name!r} has unlabeled items; superclass gating needs labels"
        )
    label_order = list(source.label_indices().keys())
    present = [lab for lab in label_order if any(it.label == lab for it in source.items)]
    if cfg.K > len(present):
        raise KTooLargeError(f"K={cfg.K} exceeds the {len(present)} distinct classes")
    class_means = np.stack(
        [
            np.mean([it.features for it in source.items if it.label == lab], axis=0)
            for lab in present
        ]
    )
    class_labels, _ = kmeans(class_means, cfg.K, cfg.seed, cfg.max_iters, cfg.tol)
    cluster_of_class = {lab: int(c) for lab, c in zip(present, class_labels)}
    assignment = {it.id: cluster_of_class[it.label] for it in source.items}
    labels = np.array([assignment[it.id] for it in source.items])
    sizes = tuple(int(c) for c in np.bincount(labels, minlength=cfg.K))
    # item-level centroids of each subset, for the partition record
    points = source.feature_matrix()
    centroids = np.stack(
        [
            points[labels == j].mean(axis=0) if (labels == j).any() else np.zeros(points.shape[1])
            for j in range(cfg.K)
        ]
    )
    return Partition(
        K=cfg.K,
        assignment=assignment,
        sizes=sizes,
        centroids=centroids,
        scheme=cfg.scheme,
        seed=cfg.seed,
    )


def build_partition(source: DatasetManifest, cfg: GatingConfig) -> Partition:
    if cfg.scheme == "superclass":
        return superclass_partition(source, cfg)
    return unsupervised_partition(source, cfg)


def gate(partition: Partition, item_id: str) -> int:
    """Hard gate: index of the one expert whose subset contains the item."""
    return partition.gate(item_id)
