from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipsm.errors import (
    AllZero,
    EmptySet,
    GenerationFailure,
    NegativeEntry,
    NonSquare,
    NotStochastic,
    TooLarge,
    ZeroRow,
)
from ipsm.stochastic import (
    ConstantSequence,
    ExplicitSequence,
    StochasticMatrix,
    backward_product,
    consequent_set,
    is_irreducible,
    is_sarymsakov,
    is_scrambling,
    iter_backward_products,
    min_positive_entry,
    normalize_rows,
    positive_column_index,
    row_spread,
    satisfies_connectivity_condition,
)
from ipsm.topology import MatrixSequence, TopologyConfig, generate_matrix

import oracles

CYCLE4 = [[.5, .5, 0, 0], [0, .5, .5, 0], [0, 0, .5, .5], [.5, 0, 0, .5]]
HALF = [[.5, .5], [.5, .5]]
SWAP = [[0, 1], [1, 0]]


def M(a, **kw):
    return StochasticMatrix(np.array(a, dtype=float), **kw)


@st.composite
def supports(draw, n_min=1, n_max=6):
    n = draw(st.integers(n_min, n_max))
    bits = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    s = np.array(bits, dtype=bool).reshape(n, n)
    s[np.flatnonzero(~s.any(axis=1)), 0] = True  # no empty rows
    w = np.arange(1, n * n + 1, dtype=float).reshape(n, n)
    return normalize_rows(np.where(s, w, 0.0))


# ---- construction


def test_normalize_examples():
    np.testing.assert_allclose(normalize_rows([[2, 2], [1, 3]]).entries, [[.5, .5], [.25, .75]])
    np.testing.assert_array_equal(normalize_rows([[1, 0], [0, 1]]).entries, np.eye(2))
    with pytest.raises(ZeroRow):
        normalize_rows([[0, 0], [1, 1]])
    with pytest.raises(NegativeEntry):
        normalize_rows([[1, -1], [1, 1]])
    with pytest.raises(NonSquare):
        normalize_rows([[1, 1, 1], [1, 1, 1]])


def test_matrix_validation():
    with pytest.raises(NotStochastic):
        M([[.5, .4], [.5, .5]])
    with pytest.raises(NegativeEntry):
        M([[1.5, -.5], [.5, .5]])
    with pytest.raises(NotStochastic):
        M([[np.nan, 1], [.5, .5]])
    with pytest.raises(NonSquare):
        M([[1.0]] * 2)
    A = M(HALF)
    assert A.n == 2 and A.validate()
    with pytest.raises(ValueError):
        A.entries[0, 0] = 1.0  # read-only storage


@given(supports())
def test_normalized_rows_sum_to_one(A):
    assert A.row_sum_error() <= 1e-12
    assert np.all(A.entries >= 0)


# ---- classifiers, spec examples (indices are 0-based)


def test_consequent_examples():
    assert consequent_set(M([[.5, .5], [0, 1]]), {0}) == {0, 1}
    assert consequent_set(StochasticMatrix.identity(3), {1}) == {1}
    assert consequent_set(M(SWAP), {0}) == {1}
    with pytest.raises(EmptySet):
        consequent_set(M(HALF), set())


def test_sarymsakov_examples():
    assert not is_sarymsakov(StochasticMatrix.identity(2))
    assert not is_sarymsakov(M(SWAP))
    assert is_sarymsakov(M(CYCLE4))
    with pytest.raises(TooLarge):
        is_sarymsakov(StochasticMatrix.identity(15))


def test_connectivity_examples():
    assert not satisfies_connectivity_condition(StochasticMatrix.identity(2))
    assert satisfies_connectivity_condition(M(HALF))
    assert satisfies_connectivity_condition(M(CYCLE4))
    assert satisfies_connectivity_condition(StochasticMatrix.identity(1))
    with pytest.raises(TooLarge):
        satisfies_connectivity_condition(StochasticMatrix.identity(15), method="enumerate")
    # the graph path covers large n
    big = np.roll(np.eye(20), 1, axis=1) * 0.5 + np.eye(20) * 0.5
    assert satisfies_connectivity_condition(M(big))


def test_scrambling_examples():
    assert not is_scrambling(StochasticMatrix.identity(2))
    assert is_scrambling(M(HALF))
    assert not is_scrambling(M(CYCLE4))


def test_identity_is_neither_scrambling_nor_sarymsakov():
    for n in range(2, 6):
        I = StochasticMatrix.identity(n)
        assert not is_scrambling(I) and not is_sarymsakov(I)


def test_positive_column_examples():
    assert positive_column_index(M(HALF)) == (0, 0.5)
    assert positive_column_index(StochasticMatrix.identity(2)) is None
    assert positive_column_index(M([[.2, .8], [.6, .4]])) == (0, pytest.approx(0.2))


def test_min_positive_entry_examples():
    assert min_positive_entry(M(HALF)) == 0.5
    assert min_positive_entry(StochasticMatrix.identity(3)) == 1.0
    assert min_positive_entry(M([[.9, .1], [.3, .7]])) == pytest.approx(0.1)
    with pytest.raises(AllZero):
        min_positive_entry(M([[1.0]], zero_tol=2.0))


def test_row_spread_examples():
    assert row_spread(HALF) == 0
    assert row_spread(np.eye(2)) == 1
    assert row_spread([[.75, .25], [.5, .5]]) == pytest.approx(0.25)


def test_zero_tol_controls_structure():
    a = [[1 - 1e-12, 1e-12], [0.5, 0.5]]
    assert consequent_set(M(a), {0}) == {0, 1}
    assert consequent_set(M(a, zero_tol=1e-9), {0}) == {0}


# ---- classifiers against brute force


@settings(max_examples=150, deadline=None)
@given(supports(n_max=6))
def test_classifiers_match_brute_force(A):
    a = A.entries.tolist()
    assert is_sarymsakov(A) == oracles.brute_sarymsakov(a)
    assert satisfies_connectivity_condition(A, method="enumerate") == oracles.brute_connectivity(a)
    assert is_scrambling(A) == oracles.brute_scrambling(a)


@settings(max_examples=150, deadline=None)
@given(supports(n_max=8))
def test_enumeration_agrees_with_graph_path(A):
    # connectivity condition is equivalent to irreducibility
    enum = satisfies_connectivity_condition(A, method="enumerate")
    assert enum == satisfies_connectivity_condition(A, method="graph")
    assert enum == oracles.reachable_all(A.entries.tolist())
    assert enum == is_irreducible(A)


def test_positive_diagonal_and_connectivity_imply_sarymsakov():
    rng = np.random.default_rng(0)
    checked = 0
    for trial in range(500):
        n = int(rng.integers(2, 9))
        A = generate_matrix(TopologyConfig(n, seed=trial, extra_edge_prob=float(rng.uniform(0, .6))), 0)
        assert np.all(np.diag(A.entries) > A.zero_tol)
        if satisfies_connectivity_condition(A):
            assert is_sarymsakov(A)
            checked += 1
    assert checked == 500


# ---- backward products


def test_backward_product_examples():
    seq = ConstantSequence(HALF)
    assert np.array_equal(backward_product(seq, 3, 2).value.entries, np.eye(2))
    np.testing.assert_allclose(backward_product(seq, 0, 1).value.entries, HALF)
    seq = ExplicitSequence([[[1, 0], [.5, .5]], [[.5, .5], [0, 1]]])
    bp = backward_product(seq, 0, 1)
    np.testing.assert_allclose(bp.value.entries, [[.75, .25], [.5, .5]], atol=1e-15)
    np.testing.assert_allclose(bp.value.entries, oracles.backward([seq(0).entries, seq(1).entries]))
    assert bp.beta_product == pytest.approx(0.25)


def test_backward_product_errors():
    seq = ExplicitSequence([HALF])
    with pytest.raises(GenerationFailure):
        backward_product(seq, 0, 1)
    with pytest.raises(ValueError):
        backward_product(seq, 2, 0)
    with pytest.raises(GenerationFailure):
        seq.matrix(-1)


def test_backward_product_matches_naive_multiply():
    seq = MatrixSequence(TopologyConfig(5, seed=11))
    mats = [seq(t).entries.tolist() for t in range(3, 12)]
    np.testing.assert_allclose(backward_product(seq, 3, 11).value.entries, oracles.backward(mats),
                               atol=1e-14)


def test_long_products_stay_stochastic():
    seq = MatrixSequence(TopologyConfig(6, seed=3))
    for t, P in iter_backward_products(seq, 0, 10_000):
        pass
    assert t == 10_000
    assert StochasticMatrix(P).row_sum_error() <= 1e-10


def test_product_entries_above_beta_product():
    for seed in range(20):
        seq = MatrixSequence(TopologyConfig(6, seed=seed))
        beta = 1.0
        for t, P in iter_backward_products(seq, 5, 35):
            beta *= seq.beta(t)
            pos = P[P > seq.zero_tol]
            assert pos.min() >= beta - 1e-12


def test_beta_memo_is_stable():
    seq = MatrixSequence(TopologyConfig(4, seed=2))
    b = seq.beta_trace(20)
    assert np.array_equal(b, seq.beta_trace(20))
    assert np.all((b > 0) & (b <= 1))
