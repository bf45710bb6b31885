"""
Row-stochastic matrices, their structural classifiers, and backward products.

Indices are 0-based throughout. A matrix entry counts as structurally positive
when it exceeds the matrix's ``zero_tol``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    AllZero,
    EmptySet,
    GenerationFailure,
    NegativeEntry,
    NonSquare,
    NotStochastic,
    TooLarge,
    ZeroRow,
)

ZERO_TOL = 1e-15
# Loose enough for products of ~1e4 factors; normalize_rows itself hits ~1e-16.
ROW_SUM_TOL = 1e-10
ENUMERATION_LIMIT = 14


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Square nonnegative matrix with unit row sums.

    The entries are stored as a read-only float64 array.
    """

    entries: np.ndarray
    zero_tol: float = ZERO_TOL

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise NonSquare(f"expected a non-empty square matrix, got shape {a.shape}")
        if self.zero_tol < 0:
            raise ValueError("zero_tol must be nonnegative")
        lo = a.min()
        if lo < 0:
            raise NegativeEntry("matrix has negative entries")
        if not np.isfinite(lo):
            raise NotStochastic("matrix has non-finite entries")
        err = np.abs(a.sum(axis=1) - 1.0).max()
        if not err <= ROW_SUM_TOL:
            raise NotStochastic(f"row sums deviate from 1 by {err:.3e}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def identity(cls, n: int, zero_tol: float = ZERO_TOL) -> "StochasticMatrix":
        return cls(np.eye(n), zero_tol)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def support(self) -> np.ndarray:
        return self.entries > self.zero_tol

    def row_sum_error(self) -> float:
        return float(np.max(np.abs(self.entries.sum(axis=1) - 1.0)))

    def validate(self, tol: float = 1e-12) -> bool:
        return self.row_sum_error() <= tol and bool(np.all(self.entries >= 0))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self):
        return f"StochasticMatrix(n={self.n}, zero_tol={self.zero_tol:g})"


def normalize_rows(raw, zero_tol: float = ZERO_TOL) -> StochasticMatrix:
    """Divide each row by its sum; the zero pattern is preserved."""
    a = np.asarray(raw, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {a.shape}")
    if a.min() < 0:
        raise NegativeEntry("raw matrix has negative entries")
    sums = a.sum(axis=1)
    if np.any(sums <= 0):
        raise ZeroRow(f"rows {np.flatnonzero(sums <= 0).tolist()} sum to zero")
    return StochasticMatrix(a / sums[:, None], zero_tol)


def consequent_set(A: StochasticMatrix, S) -> frozenset[int]:
    """Indices reachable in one step from ``S`` through positive entries."""
    S = frozenset(int(i) for i in S)
    if not S:
        raise EmptySet("consequent set of an empty index set")
    if min(S) < 0 or max(S) >= A.n:
        raise IndexError(f"index set {sorted(S)} not within 0..{A.n - 1}")
    rows = A.support[sorted(S)]
    return frozenset(np.flatnonzero(rows.any(axis=0)).tolist())


def _row_masks(support: np.ndarray) -> list[int]:
    weights = 1 << np.arange(support.shape[1], dtype=np.int64)
    return [int(w) for w in (support.astype(np.int64) * weights).sum(axis=1)]


def _subset_tables(support: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Consequent bitmask and popcount for every subset bitmask of {0..n-1}."""
    n = support.shape[0]
    rows = _row_masks(support)
    F = np.zeros(1 << n, dtype=np.int64)
    pc = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        lo, hi = 1 << i, 1 << (i + 1)
        F[lo:hi] = F[:lo] | rows[i]
        pc[lo:hi] = pc[:lo] + 1
    return F, pc


def _check_limit(n: int, limit: int):
    if n > limit:
        raise TooLarge(f"n={n} exceeds the enumeration limit {limit}")


def is_sarymsakov(A: StochasticMatrix, limit: int = ENUMERATION_LIMIT) -> bool:
    """Exhaustive check of the Sarymsakov condition over disjoint nonempty set pairs.

    For every pair the consequents must intersect or their union must be
    strictly larger than ``|S| + |S'|``.
    """
    n = A.n
    _check_limit(n, limit)
    F, pc = _subset_tables(A.support)
    full = (1 << n) - 1
    for S in range(1, full):
        comp = full ^ S
        # all submasks of comp, built bit by bit
        subs = np.zeros(1, dtype=np.int64)
        for b in range(n):
            if comp >> b & 1:
                subs = np.concatenate([subs, subs | (1 << b)])
        T = subs[subs > S]  # unordered pairs; the condition is symmetric
        if T.size == 0:
            continue
        FS, FT = F[S], F[T]
        ok = ((FS & FT) != 0) | (pc[FS | FT] > pc[S] + pc[T])
        if not ok.all():
            return False
    return True


def is_irreducible(A: StochasticMatrix) -> bool:
    """Strong connectivity of the support digraph (edge i -> j when A_ij > 0)."""
    if A.n == 1:
        return True
    ncomp, _ = connected_components(A.support, directed=True, connection="strong")
    return ncomp == 1


def satisfies_connectivity_condition(
    A: StochasticMatrix, method: str = "auto", limit: int = ENUMERATION_LIMIT
) -> bool:
    """Every proper nonempty S has an edge leaving it.

    ``method`` is "enumerate" (all subsets), "graph" (strong connectivity), or
    "auto", which enumerates up to ``limit`` and falls back to the graph test.
    """
    n = A.n
    if method == "auto":
        method = "enumerate" if n <= limit else "graph"
    if method == "graph":
        return is_irreducible(A)
    if method != "enumerate":
        raise ValueError(f"unknown method {method!r}")
    _check_limit(n, limit)
    if n == 1:
        return True
    F, _ = _subset_tables(A.support)
    full = (1 << n) - 1
    S = np.arange(1, full, dtype=np.int64)
    return bool(np.all((F[S] & ~S & full) != 0))


def is_scrambling(A: StochasticMatrix) -> bool:
    """Every pair of rows shares a column where both are positive."""
    P = A.support.astype(np.int64)
    return bool(np.all(P @ P.T > 0))


def positive_column_index(A: StochasticMatrix) -> tuple[int, float] | None:
    """Smallest column whose entries are all positive, with its minimum."""
    mins = A.entries.min(axis=0)
    cols = np.flatnonzero(mins > A.zero_tol)
    if cols.size == 0:
        return None
    j = int(cols[0])
    return j, float(mins[j])


def min_positive_entry(A: StochasticMatrix) -> float:
    pos = A.entries[A.support]
    if pos.size == 0:
        raise AllZero("no entry exceeds zero_tol")
    return float(pos.min())


def row_spread(A) -> float:
    """Largest column range, max_j (max_i A_ij - min_i A_ij)."""
    a = np.asarray(A, dtype=np.float64)
    return float(np.max(a.max(axis=0) - a.min(axis=0)))


# --------------------------------------------------------------------------
# sequences and backward products


class StochasticSequence:
    """Index-addressed sequence A(0), A(1), ... of stochastic matrices.

    Subclasses implement ``_make(t)``. The per-index empirical lower bound
    (min positive entry) is memoized.
    """

    def __init__(self, n: int, zero_tol: float = ZERO_TOL):
        self.n = n
        self.zero_tol = zero_tol
        self._betas: dict[int, float] = {}
        self._lock = threading.Lock()

    def _make(self, t: int) -> StochasticMatrix:
        raise NotImplementedError

    def matrix(self, t: int) -> StochasticMatrix:
        if t < 0:
            raise GenerationFailure(f"negative index {t}")
        return self._make(t)

    __call__ = matrix

    def beta(self, t: int) -> float:
        with self._lock:
            b = self._betas.get(t)
        if b is None:
            b = min_positive_entry(self.matrix(t))
            with self._lock:
                self._betas[t] = b
        return b

    def beta_trace(self, horizon: int) -> np.ndarray:
        return np.array([self.beta(t) for t in range(horizon)])


class ConstantSequence(StochasticSequence):
    def __init__(self, A):
        A = A if isinstance(A, StochasticMatrix) else StochasticMatrix(A)
        super().__init__(A.n, A.zero_tol)
        self._A = A

    def _make(self, t):
        return self._A


class ExplicitSequence(StochasticSequence):
    """A finite list of matrices; indices past the end raise GenerationFailure."""

    def __init__(self, matrices: Sequence):
        mats = [m if isinstance(m, StochasticMatrix) else StochasticMatrix(m) for m in matrices]
        if not mats:
            raise ValueError("empty sequence")
        if len({m.n for m in mats}) != 1:
            raise NonSquare("matrices of different orders in one sequence")
        super().__init__(mats[0].n, mats[0].zero_tol)
        self._mats = mats

    def __len__(self):
        return len(self._mats)

    def _make(self, t):
        if t >= len(self._mats):
            raise GenerationFailure(f"index {t} beyond the {len(self._mats)} stored matrices")
        return self._mats[t]


@dataclass(frozen=True)
class BackwardProduct:
    """Phi(s, k) = A(k) ... A(s+1) A(s); k == s - 1 encodes the identity."""

    start: int
    end: int
    value: StochasticMatrix
    beta_product: float


def iter_backward_products(seq: StochasticSequence, s: int, k_max: int) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(k, Phi(s, k))`` for k = s, ..., k_max as raw arrays.

    The yielded arrays are fresh; callers may keep them.
    """
    P = np.eye(seq.n)
    for t in range(s, k_max + 1):
        P = seq.matrix(t).entries @ P
        yield t, P


def backward_product(seq: StochasticSequence, s: int, k: int) -> BackwardProduct:
    if s < 0 or k < s - 1:
        raise ValueError(f"need s >= 0 and k >= s - 1, got s={s}, k={k}")
    P = np.eye(seq.n)
    beta = 1.0
    for t in range(s, k + 1):
        P = seq.matrix(t).entries @ P
        beta *= seq.beta(t)
    return BackwardProduct(s, k, StochasticMatrix(P, seq.zero_tol), beta)
