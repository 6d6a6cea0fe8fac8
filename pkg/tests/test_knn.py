import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from diodeq.errors import DimensionError, InputError
from diodeq.knn import KDTree, KnnConfig, KnnRegressor, minkowski_distance


def test_minkowski_examples():
    assert minkowski_distance([1, 2], [1, 2], 3) == 0.0
    assert minkowski_distance([0, 0], [3, 4], 2) == 5.0
    assert minkowski_distance([0, 0], [3, 4], math.inf) == 4.0
    with pytest.raises(DimensionError):
        minkowski_distance([0, 0], [1, 2, 3])
    with pytest.raises(InputError):
        minkowski_distance([0], [1], 0.5)


@given(arrays(np.float64, 4, elements=st.floats(-100, 100)),
       arrays(np.float64, 4, elements=st.floats(-100, 100)),
       st.floats(1, 50))
def test_minkowski_ordering(x, y, p):
    cheb = minkowski_distance(x, y, math.inf)
    man = minkowski_distance(x, y, 1)
    mid = minkowski_distance(x, y, p)
    assert cheb <= mid * (1 + 1e-12) + 1e-12
    assert mid <= man * (1 + 1e-12) + 1e-12


def test_config_validation_and_json():
    with pytest.raises(InputError):
        KnnConfig(k=0)
    with pytest.raises(InputError):
        KnnConfig(p=0.5)
    with pytest.raises(InputError):
        KnnConfig(weighting="gaussian")
    c = KnnConfig(k=3, p=math.inf, search="kd-tree")
    assert KnnConfig.from_json(c.to_json()) == c


def test_fit_errors_and_size():
    with pytest.raises(InputError):
        KnnRegressor(k=5).fit(np.zeros((3, 2)), np.zeros(3))
    m = KnnRegressor(k=2).fit(np.zeros((7, 2)), np.zeros(7))
    assert m.n_train == 7
    with pytest.raises(DimensionError):
        m.predict(np.zeros((1, 3)))


def test_exact_match_and_training_error_zero(rng):
    X = rng.normal(size=(30, 2))
    y = rng.normal(size=30)
    m = KnnRegressor(k=4, p=4.0).fit(X, y)
    np.testing.assert_array_equal(m.predict(X), y)


def test_duplicate_rows_average():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [9.0, 9.0]])
    y = np.array([1.0, 3.0, 10.0, 20.0])
    assert KnnRegressor(k=3).fit(X, y).predict([[0.0, 0.0]])[0] == 2.0


def test_equidistant_mean():
    X = np.array([[-1.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
    y = np.array([2.0, 4.0, 100.0])
    assert KnnRegressor(k=2, p=2.0).fit(X, y).predict([[0.0, 0.0]])[0] == pytest.approx(3.0)


def _oracle_predict(X, y, Q, k, p):
    out = []
    for q in Q:
        d = [(minkowski_distance(q, x, p), i) for i, x in enumerate(X)]
        d.sort()
        nb = d[:k]
        zero = [y[i] for di, i in nb if di == 0]
        if zero:
            out.append(np.mean(zero))
        else:
            w = [1 / di for di, _ in nb]
            out.append(sum(wi * y[i] for wi, (_, i) in zip(w, nb)) / sum(w))
    return np.array(out)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, 4.0, math.inf])
def test_matches_all_pairs_oracle(rng, p):
    X = rng.normal(size=(20, 2))
    y = rng.normal(size=20)
    Q = rng.normal(size=(5, 2))
    m = KnnRegressor(k=3, p=p).fit(X, y)
    np.testing.assert_allclose(m.predict(Q), _oracle_predict(X, y, Q, 3, p), rtol=1e-12)


@given(st.integers(0, 1000), st.sampled_from([1.0, 2.0, 3.5, 4.0, math.inf]), st.integers(1, 6))
def test_kdtree_equals_brute(seed, p, k):
    rng = np.random.default_rng(seed)
    # integer grid to force many exact ties
    X = rng.integers(0, 5, size=(60, 2)).astype(float)
    Q = rng.integers(0, 5, size=(8, 2)).astype(float) + 0.5 * rng.integers(0, 2, size=(8, 2))
    y = rng.normal(size=60)
    a = KnnRegressor(k=k, p=p).fit(X, y)
    b = KnnRegressor(k=k, p=p, search="kd-tree").fit(X, y)
    ia, da = a.kneighbors(Q)
    ib, db = b.kneighbors(Q)
    np.testing.assert_array_equal(ia, ib)
    np.testing.assert_allclose(da, db, rtol=1e-14)


def test_kdtree_query_direct(rng):
    X = rng.normal(size=(200, 3))
    t = KDTree(X, leaf_size=4)
    q = rng.normal(size=3)
    idx, d = t.query(q, 5, 2.0)
    ref = np.argsort(np.linalg.norm(X - q, axis=1), kind="stable")[:5]
    np.testing.assert_array_equal(idx, ref)


def test_permutation_invariance(rng):
    X = rng.normal(size=(40, 2))
    y = rng.normal(size=40)
    Q = rng.normal(size=(10, 2))
    perm = rng.permutation(40)
    a = KnnRegressor(k=4).fit(X, y).predict(Q)
    b = KnnRegressor(k=4).fit(X[perm], y[perm]).predict(Q)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_refit_determinism_and_json(rng):
    X = rng.normal(size=(25, 2))
    y = rng.normal(size=25)
    Q = rng.normal(size=(6, 2))
    m = KnnRegressor(k=4).fit(X, y)
    assert np.array_equal(m.predict(Q), KnnRegressor(k=4).fit(X, y).predict(Q))
    back = KnnRegressor.from_json(m.to_json())
    assert np.array_equal(back.predict(Q), m.predict(Q))


def test_uniform_weighting():
    X = np.array([[0.0], [1.0], [3.0]])
    y = np.array([0.0, 3.0, 9.0])
    assert KnnRegressor(k=2, weighting="uniform").fit(X, y).predict([[0.4]])[0] == 1.5
