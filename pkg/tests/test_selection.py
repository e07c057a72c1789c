import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from datascout.errors import (
    EmptySourceError,
    InvalidBudgetError,
    LengthMismatchError,
    NonFiniteInputError,
    NonPositiveTemperatureError,
)
from datascout.gating import Partition
from datascout.selection import (
    Recommendation,
    WeightVector,
    item_probabilities,
    normalize_scores,
    sample_budget,
    softmax_weights,
    weight_summary,
    weights_from_scores,
)


def partition_with_sizes(sizes, d=2):
    assignment = {}
    n = 0
    for g, size in enumerate(sizes):
        for _ in range(size):
            assignment[f"i{n:05d}"] = g
            n += 1
    return Partition(
        K=len(sizes),
        assignment=assignment,
        sizes=tuple(sizes),
        centroids=np.zeros((len(sizes), d)),
        scheme="unsupervised",
        seed=0,
    )


def test_normalize_minmax_examples():
    assert np.allclose(normalize_scores([0.2, 0.6, 1.0]), [0.0, 0.5, 1.0])
    assert np.allclose(normalize_scores([0.4, 0.4]), [0.5, 0.5])
    assert np.allclose(normalize_scores([0.9]), [0.5])


def test_normalize_rejects_non_finite():
    with pytest.raises(NonFiniteInputError):
        normalize_scores([0.1, float("nan")])
    with pytest.raises(NonFiniteInputError):
        normalize_scores([0.1, float("inf")])


def test_softmax_anchor_value():
    w = softmax_weights([1.0, 0.0], 0.1).w
    assert abs(w[0] - 0.9999546) <= 1e-6
    assert abs(w[1] - 0.0000454) <= 1e-6


def test_softmax_uniform_input_gives_uniform_weights():
    for k in (1, 2, 5):
        w = softmax_weights([0.5] * k, 0.1).w
        assert all(abs(v - 1.0 / k) <= 1e-12 for v in w)


def test_softmax_preserves_argmax_and_ties():
    z = [0.3, 0.9, 0.9, 0.1]
    w = softmax_weights(z, 0.1).w
    assert np.argmax(w) == np.argmax(z)
    assert w[1] == w[2]


def test_softmax_rejects_non_positive_temperature():
    with pytest.raises(NonPositiveTemperatureError):
        softmax_weights([0.5, 0.5], 0.0)
    with pytest.raises(NonPositiveTemperatureError):
        softmax_weights([0.5, 0.5], -1.0)


def test_softmax_extreme_scores_stay_finite():
    w = softmax_weights([1.0, 0.0], 1e-6).w
    assert abs(sum(w) - 1.0) <= 1e-9
    assert w[0] > 0.999999


def test_weights_from_scores_scale_invariant():
    z = [0.11, 0.47, 0.92]
    a = weights_from_scores(z)
    b = weights_from_scores([v * 7.3 for v in z])
    assert np.allclose(a.w, b.w, atol=1e-12)
    assert a.normalization_record == (0.11, 0.92)


def test_item_probabilities_hand_example():
    part = partition_with_sizes([2, 8])
    pi = item_probabilities(WeightVector(w=(0.5, 0.5)), part)
    for item_id, g in part.assignment.items():
        assert pi[item_id] == (0.25 if g == 0 else 0.0625)
    assert abs(sum(pi.values()) - 1.0) <= 1e-9


def test_item_probabilities_one_hot_weight():
    part = partition_with_sizes([3, 5, 4])
    pi = item_probabilities(WeightVector(w=(0.0, 0.0, 1.0)), part)
    for item_id, g in part.assignment.items():
        assert pi[item_id] == (0.25 if g == 2 else 0.0)


def test_item_probabilities_uniform_case():
    part = partition_with_sizes([4, 4])
    pi = item_probabilities(WeightVector(w=(0.5, 0.5)), part)
    assert all(abs(v - 1.0 / 8) <= 1e-12 for v in pi.values())


def test_item_probabilities_length_mismatch():
    part = partition_with_sizes([2, 2])
    with pytest.raises(LengthMismatchError):
        item_probabilities(WeightVector(w=(1.0,)), part)


@given(
    sizes=st.lists(st.integers(min_value=1, max_value=12), min_size=1, max_size=6),
    seed=st.integers(min_value=0, max_value=1000),
)
@settings(max_examples=60, deadline=None)
def test_probability_chain_sums_to_one(sizes, seed):
    rng = np.random.default_rng(seed)
    part = partition_with_sizes(sizes)
    w = weights_from_scores(rng.random(len(sizes)))
    pi = item_probabilities(w, part)
    assert abs(sum(w.w) - 1.0) <= 1e-9
    assert abs(sum(pi.values()) - 1.0) <= 1e-9


def test_sample_budget_one_hot_support():
    part = partition_with_sizes([5, 10])
    pi = item_probabilities(WeightVector(w=(1.0, 0.0)), part)
    rec = sample_budget(pi, 5, seed=1)
    expected = {i for i, g in part.assignment.items() if g == 0}
    assert set(rec.sampled_ids) == expected
    assert not rec.padded


def test_sample_budget_exhaustion_pads_and_flags():
    part = partition_with_sizes([3, 4])
    pi = item_probabilities(WeightVector(w=(1.0, 0.0)), part)
    rec = sample_budget(pi, 100, seed=0)
    assert len(rec.sampled_ids) == 7  # min(b, |S|)
    assert rec.padded
    # positive-probability items come first, zero-probability pads follow
    first = rec.sampled_ids[:3]
    assert {part.assignment[i] for i in first} == {0}
    assert list(rec.sampled_ids[3:]) == sorted(rec.sampled_ids[3:])


def test_sample_budget_exactness_and_determinism():
    part = partition_with_sizes([6, 6])
    pi = item_probabilities(WeightVector(w=(0.3, 0.7)), part)
    for b in (1, 5, 12):
        rec = sample_budget(pi, b, seed=3)
        assert len(rec.sampled_ids) == min(b, 12)
        assert len(set(rec.sampled_ids)) == len(rec.sampled_ids)
        again = sample_budget(pi, b, seed=3)
        assert again.sampled_ids == rec.sampled_ids


def test_sample_budget_frequency_tracks_probability():
    # lighter version of the pinned acceptance run: 2000 seeds, 3 sigma
    pi = {"a": 0.7, "b": 0.1, "c": 0.1, "d": 0.1}
    hits = sum(sample_budget(pi, 1, seed=s).sampled_ids == ("a",) for s in range(2000))
    freq = hits / 2000
    assert abs(freq - 0.7) <= 3 * np.sqrt(0.7 * 0.3 / 2000)


def test_sample_budget_monotone_dominance():
    part = partition_with_sizes([5, 5])
    pi = item_probabilities(WeightVector(w=(0.8, 0.2)), part)
    heavy = {i for i, g in part.assignment.items() if g == 0}
    counts = [0, 0]
    for seed in range(1000):
        rec = sample_budget(pi, 4, seed=seed)
        picked_heavy = sum(1 for i in rec.sampled_ids if i in heavy)
        counts[0] += picked_heavy
        counts[1] += len(rec.sampled_ids) - picked_heavy
    assert counts[0] > counts[1]


def test_sample_budget_errors():
    with pytest.raises(EmptySourceError):
        sample_budget({}, 1, seed=0)
    with pytest.raises(InvalidBudgetError):
        sample_budget({"a": 1.0}, 0, seed=0)


def test_recommendation_json_and_url_list():
    part = partition_with_sizes([2, 2])
    w = WeightVector(w=(0.5, 0.5))
    pi = item_probabilities(w, part)
    urls = {i: f"https://x/{i}" for i in pi}
    rec = sample_budget(
        pi, 3, seed=5, dataset_ref="ds", url_map=urls, pi_summary=weight_summary(w, part)
    )
    again = Recommendation.from_json(rec.to_json())
    assert again == rec
    lines = rec.url_list().splitlines()
    assert lines == [urls[i] for i in rec.sampled_ids]
    assert len(lines) == 3
