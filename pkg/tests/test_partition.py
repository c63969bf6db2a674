import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import hybrid_matrix_loops, max_min_loops
from n2mmp.dataset import synthesize
from n2mmp.exceptions import UndefinedAngleError
from n2mmp.partition import (
    HybridNorms,
    PartitionResult,
    _zscore_pool,
    cosine_distance,
    hspxy_select,
    hybrid_distance,
    hybrid_distance_matrix,
    hybrid_norms,
    kfold_split,
    max_min_select,
    random_split,
    split,
    train_size,
)


def test_cosine_examples():
    x = np.array([0.3, 1.2, -0.5, 2.0, 7.0])
    assert cosine_distance(x, x) == pytest.approx(1.0, abs=1e-15)
    assert cosine_distance([1, 0, 0, 0, 0], [0, 1, 0, 0, 0]) == 0.0
    assert cosine_distance([1, 2, 0, 0, 0], [2, 1, 0, 0, 0]) == pytest.approx(0.8, abs=1e-15)


def test_cosine_zero_vector():
    with pytest.raises(UndefinedAngleError):
        cosine_distance([0, 0, 0, 0, 0], [1, 0, 0, 0, 0])


def test_hybrid_identical_pair_is_zero():
    norms = HybridNorms(3.0, 1.0, 2.0)
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    assert hybrid_distance(x, 4.0, x, 4.0, norms) == pytest.approx(0.0, abs=1e-15)


def test_hybrid_extremal_pair_is_two():
    # parallel vectors: cosine 1; norms chosen so the distance terms are 1 too
    a = np.array([1.0, 1.0, 0, 0, 0])
    b = np.array([2.0, 2.0, 0, 0, 0])
    norms = HybridNorms(float(np.linalg.norm(a - b)), 1.0, 3.0)
    assert hybrid_distance(a, 0.0, b, 3.0, norms) == pytest.approx(2.0, abs=1e-15)


def test_degenerate_term_contributes_zero():
    X = np.tile([1.0, 2.0, 3.0, 4.0, 5.0], (3, 1)) * np.array([[1], [2], [3]])
    y = np.array([7.0, 7.0, 7.0])
    norms = hybrid_norms(X, y)
    assert norms.max_dy == 0.0
    D = hybrid_distance_matrix(X, y)
    assert np.all(np.isfinite(D))


def test_four_sample_matrix_against_loops():
    X = np.array(
        [[1.0, 0.2, 0.3, 2.0, 1.0], [0.5, 1.5, 0.2, 1.0, 2.0], [2.0, 0.1, 1.1, 0.5, 0.7], [0.3, 0.9, 1.7, 1.2, 0.4]]
    )
    y = np.array([1.0, 3.0, 2.5, 0.2])
    D = hybrid_distance_matrix(X, y)
    ref = hybrid_matrix_loops(X, y)
    norms = hybrid_norms(X, y)
    for i in range(4):
        for j in range(4):
            if i != j:
                assert D[i, j] == pytest.approx(ref[i][j], abs=1e-14)
                assert hybrid_distance(X[i], y[i], X[j], y[j], norms) == pytest.approx(ref[i][j], abs=1e-14)


def _handmade(seed, n=8):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, 5)), rng.normal(size=n)


@pytest.mark.parametrize("seed", range(10))
def test_max_min_against_brute_force(seed):
    X, y = _handmade(seed)
    D = hybrid_distance_matrix(X, y)
    ref = hybrid_matrix_loops(X, y)
    for q in range(2, 9):
        assert max_min_select(D, q) == max_min_loops(ref, q)


def test_q2_is_global_argmax():
    data = synthesize(30, seed=2)
    part = hspxy_select(data, 2)
    Xz, yz = _zscore_pool(data)
    D = hybrid_distance_matrix(Xz, yz)
    i, j = np.unravel_index(np.argmax(np.triu(D, 1)), D.shape)
    assert sorted(part.train_indices) == sorted([int(i), int(j)])


def test_replay_invariant():
    data = synthesize(25, seed=8)
    Xz, yz = _zscore_pool(data)
    D = hybrid_distance_matrix(Xz, yz)
    order = max_min_select(D, 20)
    for step in range(2, 20):
        chosen = order[:step]
        pick = order[step]
        score = lambda u: min(D[u, s] for s in chosen)
        others = [u for u in range(25) if u not in chosen]
        assert all(score(pick) >= score(u) for u in others)


def test_permutation_equivariance():
    data = synthesize(20, seed=12)
    perm = np.random.default_rng(0).permutation(20)
    base = hspxy_select(data, 12)
    moved = hspxy_select(data.subset(perm), 12)
    assert sorted(perm[list(moved.train_indices)].tolist()) == sorted(base.train_indices)


def test_hspxy_contract():
    data = synthesize(40, seed=1)
    part = hspxy_select(data, 32)
    assert len(part.train_indices) == 32
    assert set(part.train_indices).isdisjoint(part.test_indices)
    assert set(part.train_indices) | set(part.test_indices) == set(range(40))
    assert hspxy_select(data, 32) == part
    for q in (1, 41):
        with pytest.raises(ValueError):
            hspxy_select(data, q)


def test_train_size_67():
    assert train_size(84, 0.8) == 67
    assert train_size(10, 0.8) == 8
    assert train_size(200, 0.8) == 160


def test_kfold_examples():
    assert kfold_split(10, 5, 0).sizes() == [2] * 5
    assert sorted(kfold_split(67, 5, 3).sizes(), reverse=True) == [14, 14, 13, 13, 13]
    assert kfold_split(67, 5, 3) == kfold_split(67, 5, 3)
    with pytest.raises(ValueError):
        kfold_split(4, 5, 0)


@given(st.integers(2, 60), st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_kfold_properties(n, k, seed):
    if k > n:
        return
    a = kfold_split(n, k, seed)
    counts = Counter(a.fold_of)
    assert set(counts) == set(range(1, k + 1))
    assert max(counts.values()) - min(counts.values()) <= 1
    seen = np.concatenate([a.validation_rows(f) for f in range(1, k + 1)])
    assert sorted(seen.tolist()) == list(range(n))


def test_random_split_properties():
    data = synthesize(30, seed=0)
    a = random_split(data, 24, 5)
    assert a == random_split(data, 24, 5)
    assert len(a.train_indices) == 24 and len(a.test_indices) == 6
    with pytest.warns(UserWarning):
        full = random_split(data, 30, 5)
    assert full.test_indices == ()


def test_random_split_coverage():
    data = synthesize(30, seed=0)
    covered = set()
    for seed in range(1000):
        covered |= set(split(data, "random", 0.8, seed).test_indices)
    assert covered == set(range(30))


def test_partition_json_round_trip(tmp_path):
    part = split(synthesize(20, seed=3), "random", 0.8, 4)
    path = tmp_path / "p.json"
    part.save(path)
    assert set(json.loads(path.read_text())) == {"method", "seed", "train_indices", "test_indices"}
    assert PartitionResult.load(path) == part


def test_zero_input_vector_rejected():
    X = np.vstack([np.zeros(5), np.ones((3, 5))])
    with pytest.raises(UndefinedAngleError):
        hybrid_distance_matrix(X, np.arange(4.0))


def test_unknown_method():
    with pytest.raises(ValueError):
        split(synthesize(10), "duplex")
