import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subjtransfer.relevance import (
    RelevanceConfig,
    RelevanceError,
    RelevanceSelection,
    build_transfer_pool,
    channel_mean,
    keep_count,
    l1_distance,
    pca_reduce,
    prune_inner,
    prune_target_relevance,
    subject_center,
)

from conftest import make_dataset
from helpers import qr_rank


def _rank2_rows(rng, n=30, p=40):
    basis = np.linalg.qr(rng.normal(size=(p, 2)))[0]
    coeffs = rng.normal(size=(n, 2)) * [5.0, 2.0]
    return coeffs @ basis.T + rng.normal(size=p), basis


def test_pca_recovers_rank2_subspace(rng):
    rows, basis = _rank2_rows(rng)
    assert qr_rank(rows - rows.mean(0)) == 2
    red = pca_reduce(rows, 0.999999)
    assert red.q == 2
    assert np.max(np.abs(red.reconstruct() - rows)) < 1e-6
    # projector onto the recovered span equals the true one
    np.testing.assert_allclose(red.projection @ red.projection.T, basis @ basis.T, atol=1e-9)
    np.testing.assert_allclose(red.projection.T @ red.projection, np.eye(2), atol=1e-12)


def test_pca_fraction_one_ignores_roundoff_directions(rng):
    rows, _ = _rank2_rows(rng)
    assert pca_reduce(rows, 1.0).q == 2


def test_pca_integer_dims_and_errors(rng):
    rows = rng.normal(size=(6, 4))
    assert pca_reduce(rows, 3).y.shape == (6, 3)
    with pytest.raises(RelevanceError):
        pca_reduce(rows, 5)
    with pytest.raises(RelevanceError, match="at least 2 rows"):
        pca_reduce(rows[:1], 1)


def test_pca_deterministic_signs(rng):
    rows = rng.normal(size=(10, 5))
    a, b = pca_reduce(rows, 3), pca_reduce(-(-rows), 3)
    np.testing.assert_array_equal(a.projection, b.projection)


@pytest.mark.parametrize("beta,n,expected", [(0.8, 10, 8), (0.8, 7, 6), (0.3, 10, 3), (1.0, 5, 5), (0.01, 5, 1),
                                             (0.5, 9, 5), (0.7, 10, 7)])
def test_keep_count_is_ceiling(beta, n, expected):
    assert keep_count(beta, n) == expected


@given(st.floats(0.001, 1.0), st.integers(1, 500))
def test_keep_count_property(beta, n):
    k = keep_count(beta, n)
    assert 1 <= k <= n
    assert k == min(n, math.ceil(beta * n - 1e-9))


def test_l1_hand_fixture():
    assert l1_distance([1, -2, 3], [0, 0, 0]) == 6.0
    assert l1_distance([0.5, 0.25], [1.5, -0.75]) == 2.0
    with pytest.raises(RelevanceError, match="length mismatch"):
        l1_distance([1, 2], [1, 2, 3])


def test_center_and_prune_inner_hand_fixture():
    y = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [9.0, 9.0], [3.0, 3.0]])
    np.testing.assert_array_equal(subject_center(y), [3.0, 3.0])
    # distances to (3,3): 6, 4, 2, 12, 0 -> keep ceil(0.6*5)=3 nearest
    assert prune_inner(y, 0.6) == [1, 2, 4]


def test_prune_target_hand_fixture():
    y = {"a": np.array([[0.0], [4.0]]), "b": np.array([[1.0], [10.0], [2.0]])}
    sel = prune_target_relevance(y, np.array([1.5]), 0.6)  # ceil(0.6*5) = 3
    assert sel.kept == {"a": [0], "b": [0, 2]}
    assert sel.distances[("b", 1)] == 8.5


def _brute_force(ys, center, beta1, beta2):
    survivors = []
    for sid, y in ys.items():
        c = y.mean(axis=0)
        d_in = [(float(np.sum(np.abs(row - c))), i) for i, row in enumerate(y)]
        k1 = math.ceil(round(beta1 * len(y), 9))
        for _, i in sorted(d_in)[:k1]:
            survivors.append((float(np.sum(np.abs(y[i] - center))), sid, i))
    k2 = math.ceil(round(beta2 * len(survivors), 9))
    out = {sid: [] for sid in ys}
    for _, sid, i in sorted(survivors)[:k2]:
        out[sid].append(i)
    return {k: sorted(v) for k, v in out.items()}


def test_selection_matches_brute_force_on_random_fixtures():
    rng = np.random.default_rng(7)
    for trial in range(100):
        n_sub = rng.integers(1, 6)
        q = rng.integers(1, 5)
        ys = {f"s{j}": rng.normal(size=(rng.integers(1, 15), q)) for j in range(n_sub)}
        if trial % 10 == 0:  # integer grids force ties
            ys = {k: np.round(v) for k, v in ys.items()}
        center = rng.normal(size=q)
        b1, b2 = rng.uniform(0.05, 1.0, size=2)
        triples = [(sid, y[prune_inner(y, b1)], prune_inner(y, b1)) for sid, y in ys.items()]
        got = prune_target_relevance(triples, center, b2).kept
        assert got == _brute_force(ys, center, b1, b2), trial


def test_empty_pool_and_json_roundtrip():
    with pytest.raises(RelevanceError, match="empty source pool"):
        prune_target_relevance({"a": np.zeros((0, 2))}, np.zeros(2), 0.5)
    sel = prune_target_relevance({"a": np.array([[0.0], [3.0]])}, np.array([1.0]), 0.5)
    back = RelevanceSelection.from_json(json.loads(json.dumps(sel.to_json())))
    assert back.kept == sel.kept and back.distances == sel.distances


def test_build_transfer_pool_counts(rng):
    sources = [make_dataset(rng.normal(size=(10, 3, 20)) + k, subject_id=f"s{k}") for k in range(3)]
    target = make_dataset(rng.normal(size=(6, 3, 20)), subject_id="t")
    sel, pool = build_transfer_pool(sources, target, RelevanceConfig(0.8, 0.5, 0.95))
    # 3 subjects x ceil(0.8*10)=8 survivors -> ceil(0.5*24)=12
    assert sel.n_kept == 12 == len(pool)
    assert all(p == "real" for p in pool.provenance)
    np.testing.assert_array_equal(channel_mean(pool.trials), pool.data.mean(axis=1))
