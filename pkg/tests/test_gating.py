import numpy as np
import pytest

from datascout.core import DatasetManifest, Item
from datascout.errors import KTooLargeError, MissingLabelsError, UnknownItemError
from datascout.gating import (
    GatingConfig,
    Partition,
    gate,
    kmeans,
    superclass_partition,
    unsupervised_partition,
    wcss,
)
from conftest import blob_manifest, make_manifest


def test_kmeans_k1_degenerate():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(15, 3))
    labels, centroids = kmeans(pts, 1, seed=0)
    assert np.all(labels == 0)
    assert np.allclose(centroids[0], pts.mean(axis=0))


def test_kmeans_two_separated_blobs_recovered_exactly():
    # oracle: with blobs 100 sigma apart, nearest-blob-mean assignment is truth
    rng = np.random.default_rng(1)
    blob0 = rng.normal(size=(20, 2))
    blob1 = rng.normal(size=(20, 2)) + np.array([100.0, 0.0])
    pts = np.vstack([blob0, blob1])
    truth = np.array([0] * 20 + [1] * 20)
    labels, centroids = kmeans(pts, 2, seed=0)
    brute = np.array(
        [0 if np.sum((p - blob0.mean(0)) ** 2) < np.sum((p - blob1.mean(0)) ** 2) else 1 for p in pts]
    )
    assert np.array_equal(brute, truth)
    # cluster indices are arbitrary; compare as a partition of the points
    assert np.all(labels[:20] == labels[0]) and np.all(labels[20:] == labels[20])
    assert labels[0] != labels[20]


def test_kmeans_identical_points_no_empty_cluster():
    pts = np.ones((3, 2))
    labels, centroids = kmeans(pts, 2, seed=0)
    counts = np.bincount(labels, minlength=2)
    assert np.all(counts >= 1)


def test_kmeans_k_too_large():
    with pytest.raises(KTooLargeError):
        kmeans(np.zeros((2, 2)), 3, seed=0)


def test_kmeans_deterministic_under_seed():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(50, 4))
    a = kmeans(pts, 4, seed=9)
    b = kmeans(pts, 4, seed=9)
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])


def test_kmeans_objective_nonincreasing_across_iterations():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(80, 3))
    # replay the loop with increasing iteration caps; objective must not rise
    values = []
    for iters in range(1, 12):
        labels, centroids = kmeans(pts, 5, seed=4, max_iters=iters)
        values.append(wcss(pts, labels, centroids))
    assert all(a >= b - 1e-9 for a, b in zip(values, values[1:]))


def test_unsupervised_partition_five_blobs():
    manifest, truth = blob_manifest(n_blobs=5, per_blob=20, d=8, separation=100.0, seed=0)
    part = unsupervised_partition(manifest, GatingConfig(K=5, scheme="unsupervised", seed=0))
    assert sorted(part.sizes) == [20, 20, 20, 20, 20]
    # items of one blob share one expert
    for blob in range(5):
        indices = {part.assignment[i] for i, b in truth.items() if b == blob}
        assert len(indices) == 1
    assert sum(part.sizes) == len(manifest.items)


def test_unsupervised_partition_k1_and_k_equals_n():
    manifest = make_manifest(n=6, d=3, seed=1)
    p1 = unsupervised_partition(manifest, GatingConfig(K=1, seed=0))
    assert p1.sizes == (6,)
    pn = unsupervised_partition(manifest, GatingConfig(K=6, seed=0))
    assert pn.sizes == (1, 1, 1, 1, 1, 1)


def test_hard_gating_every_item_assigned_once():
    manifest, _ = blob_manifest(n_blobs=3, per_blob=10, d=4, seed=2)
    part = unsupervised_partition(manifest, GatingConfig(K=3, seed=1))
    assert set(part.assignment) == set(manifest.item_ids())
    assert all(0 <= g < part.K for g in part.assignment.values())
    assert sum(part.sizes) == len(manifest.items)
    assert all(s >= 1 for s in part.sizes)


def test_superclass_partition_pairs_of_classes():
    # 4 classes whose means form 2 separated pairs; oracle = brute force over
    # the 4 class means with K=2
    rng = np.random.default_rng(5)
    classes = {"a": [0.0, 0.0], "b": [1.0, 0.0], "c": [100.0, 0.0], "d": [101.0, 0.0]}
    items = []
    for lab, mean in classes.items():
        for i in range(10):
            items.append(
                Item(
                    id=f"{lab}{i}",
                    url="u",
                    features=np.array(mean) + 0.01 * rng.normal(size=2),
                    label=lab,
                )
            )
    manifest = DatasetManifest(
        name="sc", feature_dim=2, items=tuple(items), label_set=("a", "b", "c", "d")
    )
    part = superclass_partition(manifest, GatingConfig(K=2, scheme="superclass", seed=0))
    g = {lab: part.assignment[f"{lab}0"] for lab in classes}
    assert g["a"] == g["b"] and g["c"] == g["d"] and g["a"] != g["c"]


def test_superclass_purity_and_k_equals_classes():
    manifest = make_manifest(n=30, d=4, seed=7, labels=["x", "y", "z"])
    part = superclass_partition(manifest, GatingConfig(K=3, scheme="superclass", seed=0))
    for lab in ("x", "y", "z"):
        indices = {part.assignment[it.id] for it in manifest.items if it.label == lab}
        assert len(indices) == 1
    assert sorted(part.sizes) == [10, 10, 10]


def test_superclass_requires_labels():
    manifest = make_manifest(n=10, d=4)
    with pytest.raises(MissingLabelsError):
        superclass_partition(manifest, GatingConfig(K=2, scheme="superclass", seed=0))


def test_gate_lookup_and_unknown_item():
    manifest = make_manifest(n=8, d=4, seed=0)
    part = unsupervised_partition(manifest, GatingConfig(K=2, seed=0))
    multiset = sorted(gate(part, i) for i in manifest.item_ids())
    expected = sorted(sum(([j] * s for j, s in enumerate(part.sizes)), []))
    assert multiset == expected
    with pytest.raises(UnknownItemError):
        gate(part, "nope")


def test_partition_fully_deterministic():
    manifest, _ = blob_manifest(n_blobs=2, per_blob=15, d=4, seed=8)
    cfg = GatingConfig(K=2, seed=3)
    a = unsupervised_partition(manifest, cfg)
    b = unsupervised_partition(manifest, cfg)
    assert a.assignment == b.assignment
    assert a.sizes == b.sizes
    assert np.array_equal(a.centroids, b.centroids)


def test_partition_json_roundtrip():
    manifest, _ = blob_manifest(n_blobs=2, per_blob=10, d=3, seed=9)
    part = unsupervised_partition(manifest, GatingConfig(K=2, seed=0))
    again = Partition.from_json(part.to_json())
    assert again.assignment == part.assignment
    assert again.sizes == part.sizes
    assert again.scheme == part.scheme
    assert np.array_equal(again.centroids, part.centroids)
    assert again.to_json() == part.to_json()
