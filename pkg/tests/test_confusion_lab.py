import json

import numpy as np
import pytest

from datascout.errors import DimensionMismatchError
from datascout.experts import TrainConfig
from datascout.gating import GatingConfig
from datascout.lab import cli as lab_cli
from datascout.lab.confusion import (
    build_index_local,
    correlation_experiment,
    proxy_a_distance,
    spearman,
)
from datascout.lab.downstream import (
    downstream_compare,
    incremental_build_check,
    mean_accuracy,
)
from datascout.lab.fixtures import read_fixture, small_source, standard_fixture, write_fixture

FAST = TrainConfig(epochs=8)


@pytest.fixture(scope="module")
def small_fixture():
    return standard_fixture(seed=1, items_per_blob=150, target_size=40, target_val_size=120)


@pytest.fixture(scope="module")
def small_index(small_fixture):
    return build_index_local(
        small_fixture.source, GatingConfig(K=5, scheme="unsupervised", seed=0), FAST
    )


def test_pad_same_distribution_is_near_zero():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(1000, 8))
    b = rng.normal(size=(1000, 8))
    eps, dist = proxy_a_distance(a, b, seed=0)
    assert abs(dist) <= 0.2  # 3-sigma binomial band at 1000 held-out samples
    assert 0.0 <= eps <= 1.0


def test_pad_separated_blobs_is_near_two():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(400, 8))
    b = rng.normal(size=(400, 8)) + 50.0
    eps, dist = proxy_a_distance(a, b, seed=0)
    assert eps <= 0.02
    assert dist >= 1.9


def test_pad_monotone_in_separation():
    rng = np.random.default_rng(2)
    base = rng.normal(size=(600, 8))
    dists = []
    for sep in (0.0, 1.0, 10.0):
        other = rng.normal(size=(600, 8))
        other[:, 0] += sep
        _, dist = proxy_a_distance(base, other, seed=3)
        dists.append(dist)
    assert dists[0] < dists[1] < dists[2]


def test_pad_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        proxy_a_distance(np.zeros((4, 3)), np.zeros((4, 2)))


def test_spearman_known_values():
    assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [5, 0, -5]) == pytest.approx(-1.0)
    assert spearman([1, 1, 1], [1, 2, 3]) is None
    # monotone transform leaves ranks alone
    assert spearman([1, 4, 9], [1, 2, 3]) == pytest.approx(1.0)


def test_correlation_experiment_finds_matching_blob(small_fixture, small_index):
    partition, experts = small_index
    report = correlation_experiment(
        small_fixture.source, partition, experts, small_fixture.target, seed=0
    )
    majority = {}
    for k in range(partition.K):
        blobs = [small_fixture.blob_of_item[m] for m in partition.members(k)]
        majority[k] = max(set(blobs), key=blobs.count)
    matching_cluster = next(
        k for k, blob in majority.items() if blob == small_fixture.matching_blob
    )
    assert report.best_proxy_subset == matching_cluster
    assert report.nearest_subset == matching_cluster
    assert not report.correlation_undefined
    assert report.rank_correlation <= -0.6
    json.loads(report.to_json())  # serializable


def test_correlation_undefined_when_all_subsets_match_target():
    fx = standard_fixture(seed=3, items_per_blob=400, target_size=200, target_val_size=30)
    # keep only the matching blob's items and split them round-robin, so both
    # subsets follow exactly the target distribution (a k-means split would
    # cut the blob spatially and make the halves distinguishable)
    matching = [
        it for it in fx.source.items if fx.blob_of_item[it.id] == fx.matching_blob
    ]
    from datascout.core import DatasetManifest
    from datascout.experts import train_expert_ss
    from datascout.gating import Partition

    source = DatasetManifest(
        name="degenerate",
        feature_dim=fx.source.feature_dim,
        items=tuple(matching),
        image_shape=fx.source.image_shape,
        label_set=fx.source.label_set,
    )
    assignment = {it.id: i % 2 for i, it in enumerate(matching)}
    sizes = (sum(1 for g in assignment.values() if g == 0), sum(1 for g in assignment.values() if g == 1))
    partition = Partition(
        K=2,
        assignment=assignment,
        sizes=sizes,
        centroids=np.zeros((2, source.feature_dim)),
        scheme="unsupervised",
        seed=0,
    )
    by_id = source.by_id()
    experts = [
        train_expert_ss([by_id[m] for m in partition.members(i)], FAST, subset_index=i)
        for i in range(2)
    ]
    report = correlation_experiment(source, partition, experts, fx.target, seed=0)
    # identically-distributed sides: distance is binomial noise around 0, and
    # z carries no signal (both exactly 1.0) so the correlation is undefined
    assert all(abs(s.distance) <= 0.5 for s in report.subsets)
    assert report.correlation_undefined


def test_downstream_compare_structure_and_determinism(small_fixture, small_index):
    partition, experts = small_index
    results = downstream_compare(
        small_fixture.source,
        partition,
        experts,
        small_fixture.target,
        small_fixture.target_val,
        budgets=[0.2],
        seeds=[0, 1],
        train_cfg=TrainConfig(hidden=16, epochs=10),
    )
    b = round(0.2 * len(small_fixture.source.items))
    methods = {r.method for r in results}
    assert methods == {"weighted", "uniform", "full", "none"}
    assert all(0.0 <= r.accuracy <= 1.0 for r in results)
    assert len(results) == 2 * 4  # 2 seeds x 4 methods x 1 budget
    again = downstream_compare(
        small_fixture.source,
        partition,
        experts,
        small_fixture.target,
        small_fixture.target_val,
        budgets=[0.2],
        seeds=[0, 1],
        train_cfg=TrainConfig(hidden=16, epochs=10),
    )
    assert [(r.method, r.seed, r.accuracy) for r in results] == [
        (r.method, r.seed, r.accuracy) for r in again
    ]
    assert mean_accuracy(results, "weighted", b) >= mean_accuracy(results, "none", b) - 0.2


def test_incremental_build_check_isolation(tmp_path):
    a = small_source("inc-a", 80, seed=1)
    a_big = small_source("inc-a", 400, seed=1)
    b = small_source("inc-b", 80, seed=2)
    report = incremental_build_check(
        a, a_big, b, tmp_path, GatingConfig(K=2, seed=0), TrainConfig(epochs=3), repeats=2
    )
    assert report["a_blobs_unchanged"] is True
    assert report["build_b_seconds_small_a"] > 0
    assert report["build_b_seconds_large_a"] > 0


def test_fixture_write_read_roundtrip(tmp_path):
    fx = standard_fixture(seed=5, items_per_blob=30, target_size=10, target_val_size=10)
    write_fixture(fx, tmp_path / "fx")
    again = read_fixture(tmp_path / "fx")
    assert again.source.equals(fx.source)
    assert again.target.equals(fx.target)
    assert again.target_val.equals(fx.target_val)
    assert again.blob_of_item == fx.blob_of_item
    assert again.matching_blob == fx.matching_blob


def test_lab_cli_incremental_and_svg(tmp_path, small_fixture, small_index, capsys):
    rc = lab_cli.main(["incremental", "--out", str(tmp_path / "inc"), "--base-items", "60"])
    assert rc == 0
    report = json.loads((tmp_path / "inc" / "incremental_report.json").read_text())
    assert report["a_blobs_unchanged"] is True

    partition, experts = small_index
    confusion = correlation_experiment(
        small_fixture.source, partition, experts, small_fixture.target, seed=0
    )
    svg = lab_cli.scatter_svg(confusion)
    assert svg.startswith("<svg") and svg.endswith("</svg>")
    assert svg.count("<circle") == 5
