import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import equicorrelation
from ssikit.errors import NotFactorableError, SingularMatrixError, ValidationError
from ssikit.stats import correlation_matrix, kmo, partial_correlations, pearson, summarize


def brute_force_correlation(X):
    n, p = len(X), len(X[0])
    means = [sum(row[j] for row in X) / n for j in range(p)]
    cov = [[sum((row[a] - means[a]) * (row[b] - means[b]) for row in X) for b in range(p)] for a in range(p)]
    return np.array([[cov[a][b] / math.sqrt(cov[a][a] * cov[b][b]) for b in range(p)] for a in range(p)])


def test_identical_columns_correlate_perfectly(rng):
    X = rng.random((50, 4))
    X[:, 2] = X[:, 0]
    assert correlation_matrix(X)[0, 2] == pytest.approx(1.0, abs=1e-15)


def test_independent_columns_near_zero():
    X = np.random.default_rng(2024).random((10000, 4))
    R = correlation_matrix(X)
    off = R[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off) < 0.05)


def test_too_few_rows():
    with pytest.raises(ValidationError):
        correlation_matrix(np.zeros((2, 4)) + [[0, 1, 2, 3], [1, 2, 3, 4]])


def test_zero_variance_column_is_named(rng):
    X = rng.random((10, 4))
    X[:, 1] = 0.3
    with pytest.raises(ValidationError, match="water"):
        correlation_matrix(X)


@given(arrays(float, st.tuples(st.integers(3, 100), st.just(4)), elements=st.floats(0, 1)))
@settings(max_examples=60)
def test_correlation_matches_two_pass(X):
    spread = X.max(axis=0) - X.min(axis=0)
    if np.any(spread < 1e-3):
        return
    R = correlation_matrix(X)
    np.testing.assert_allclose(R, brute_force_correlation(X.tolist()), atol=1e-12)
    assert np.allclose(R, R.T) and np.all(np.diag(R) == 1.0)
    assert np.linalg.eigvalsh(R).min() > -1e-10


def test_partials_of_identity():
    np.testing.assert_array_equal(partial_correlations(np.eye(4)), np.eye(4))


def test_partials_equicorrelation_closed_form():
    R = equicorrelation(0.5)
    # closed-form inverse of (1-r)I + rJ for r=0.5, p=4
    inv = np.full((4, 4), -0.4)
    np.fill_diagonal(inv, 1.6)
    np.testing.assert_allclose(R @ inv, np.eye(4), atol=1e-15)
    expected = 0.4 / math.sqrt(1.6 * 1.6)
    P = partial_correlations(R)
    assert expected == 0.25
    np.testing.assert_allclose(P[~np.eye(4, dtype=bool)], 0.25, atol=1e-12)


def test_rank_deficient_is_singular():
    v = np.array([1.0, 1.0, 0.5, 0.5])
    R = np.outer(v, v) / np.outer(np.sqrt(v * v), np.sqrt(v * v))
    with pytest.raises(SingularMatrixError, match="multicollinearity"):
        partial_correlations(R)


def test_kmo_equicorrelation():
    assert kmo(equicorrelation(0.5)) == pytest.approx(0.25 / (0.25 + 0.0625), abs=1e-10)
    assert abs(kmo(equicorrelation(0.5)) - 0.8) < 1e-10


def test_kmo_identity_undefined():
    with pytest.raises(NotFactorableError, match="undefined"):
        kmo(np.eye(4))


def test_kmo_msa_and_summary(rng):
    f = rng.standard_normal(500)
    X = f[:, None] * [0.8, 0.7, 0.6, 0.5] + rng.standard_normal((500, 4)) * 0.5
    s = summarize(X)
    assert 0 <= s.kmo <= 1 and s.msa.shape == (4,)
    assert s.factorable and s.verdict == "factorable"
    assert s.n_observations == 500


@given(st.integers(0, 10_000), st.permutations(range(4)))
@settings(max_examples=40)
def test_kmo_permutation_invariant(seed, perm):
    g = np.random.default_rng(seed)
    f = g.standard_normal(200)
    X = f[:, None] * g.uniform(0.2, 0.9, 4) + g.standard_normal((200, 4))
    R = correlation_matrix(X)
    perm = list(perm)
    assert kmo(R[np.ix_(perm, perm)]) == pytest.approx(kmo(R), abs=1e-12)


@pytest.mark.parametrize(
    "x, y, expected",
    [((1, 2, 3), (2, 4, 6), 1.0), ((1, 2, 3), (3, 2, 1), -1.0), ((1, 2, 3, 4), (1, 3, 2, 4), 0.8)],
)
def test_pearson_examples(x, y, expected):
    assert pearson(x, y) == pytest.approx(expected, abs=1e-15)


def test_pearson_preconditions():
    with pytest.raises(ValidationError):
        pearson([1, 2], [1, 2])
    with pytest.raises(ValidationError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValidationError):
        pearson([1, 2, 3], [1, 2])


finite = st.floats(-1e3, 1e3)


@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=50),
       st.floats(0.1, 10) | st.floats(-10, -0.1), finite)
def test_pearson_symmetry_and_affine(pairs, a, b):
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    r = pearson(x, y)
    assert pearson(y, x) == pytest.approx(r, abs=1e-12)
    assert pearson(a * x + b, y) == pytest.approx(math.copysign(1, a) * r, abs=1e-9)
