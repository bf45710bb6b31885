"""
Seeded, index-addressed generator of time-varying stochastic matrices.

Each A(t) is drawn from its own PCG64 stream, seeded by
``SeedSequence(seed, spawn_key=(t,))``. Draws are consumed in a fixed order:

1. ``permutation(n)``: the Hamiltonian-cycle skeleton sigma_0 -> sigma_1 -> ... -> sigma_0
2. ``random((n, n))``: coins; off-diagonal (i, j) joins the support when coin < extra_edge_prob
3. ``random((n, n))``: u; the weight of (i, j) is 1 - (1 - floor) u, which lies in (floor, 1]

Self-loops are always present, rows are normalized, and in identity-approaching
mode the result is (1 - eps_t) I + eps_t M(t) with eps_t = min((t+1)**-p, 1/2).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .ergodicity import AssumptionParams, ScheduleReport, schedule_check
from .io import write_matrix
from .stochastic import ZERO_TOL, StochasticMatrix, StochasticSequence, normalize_rows

EPS_CLAMP = 0.5


class Mode(str, Enum):
    STANDARD = "standard"
    IDENTITY_APPROACHING = "identity_approaching"


@dataclass(frozen=True)
class TopologyConfig:
    n: int
    seed: int = 0
    extra_edge_prob: float = 0.3
    mode: Mode = Mode.STANDARD
    epsilon_exponent: float = 1.5
    weight_floor: float = 0.0  # 0 gives raw weights uniform on (0, 1]
    assumption_params: AssumptionParams | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not 0.0 <= self.extra_edge_prob <= 1.0:
            raise ValueError("extra_edge_prob must lie in [0, 1]")
        if not 0.0 <= self.weight_floor < 1.0:
            raise ValueError("weight_floor must lie in [0, 1)")
        if not self.epsilon_exponent > 1.0:
            raise ValueError("epsilon_exponent must exceed 1")
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.assumption_params is None:
            object.__setattr__(self, "assumption_params", AssumptionParams(self.n))
        elif self.assumption_params.n != self.n:
            raise ValueError("assumption_params.n differs from n")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "extra_edge_prob": self.extra_edge_prob,
            "mode": self.mode.value,
            "epsilon_exponent": self.epsilon_exponent,
            "weight_floor": self.weight_floor,
            "assumption_params": self.assumption_params.to_dict(),
        }


def stream(seed: int, t: int) -> np.random.Generator:
    """The generator that supplies every draw for index t."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(t,))))


def cycle_edges(perm) -> list[tuple[int, int]]:
    perm = [int(p) for p in perm]
    n = len(perm)
    return [(perm[i], perm[(i + 1) % n]) for i in range(n)]


def random_strongly_connected_skeleton(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Hamiltonian cycle on a uniformly random ordering of the nodes."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return cycle_edges(rng.permutation(n))


def epsilon(t: int, exponent: float) -> float:
    """Off-diagonal mass (t+1)**-exponent before clamping."""
    return float((t + 1.0) ** -exponent)


def effective_epsilon(t: int, exponent: float) -> float:
    # eps_0 = 1 would wipe out the diagonal
    return min(epsilon(t, exponent), EPS_CLAMP)


def generate_matrix(config: TopologyConfig, t: int) -> StochasticMatrix:
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = config.n
    rng = stream(config.seed, t)
    support = np.eye(n, dtype=bool)
    for i, j in random_strongly_connected_skeleton(n, rng):
        support[i, j] = True
    coins = rng.random((n, n))
    support |= coins < config.extra_edge_prob
    weights = 1.0 - (1.0 - config.weight_floor) * rng.random((n, n))
    M = normalize_rows(np.where(support, weights, 0.0))
    if config.mode is Mode.STANDARD:
        return M
    eps = effective_epsilon(t, config.epsilon_exponent)
    return StochasticMatrix((1.0 - eps) * np.eye(n) + eps * M.entries)


class MatrixSequence(StochasticSequence):
    """The generated sequence {A(t)} for one TopologyConfig.

    Matrices are regenerated on demand (bit-identical for a given (seed, t))
    and kept in a bounded cache.
    """

    def __init__(self, config: TopologyConfig, cache_size: int = 4096):
        super().__init__(config.n, ZERO_TOL)
        self.config = config
        self._cached = functools.lru_cache(maxsize=cache_size)(
            functools.partial(generate_matrix, config))

    def _make(self, t: int) -> StochasticMatrix:
        return self._cached(t)

    @property
    def params(self) -> AssumptionParams:
        return self.config.assumption_params

    def __repr__(self):
        return f"MatrixSequence({self.config!r})"


def beta_schedule_check(seq: StochasticSequence, horizon: int,
                        params: AssumptionParams | None = None) -> ScheduleReport:
    """Per-block minima of the realized beta trace against the configured schedule."""
    if params is None:
        params = seq.config.assumption_params
    return schedule_check(seq, params, horizon)


def export_snapshot(seq: StochasticSequence, directory, horizon: int) -> list[Path]:
    """Write A(0), ..., A(horizon-1) as ``A_<t>.csv`` files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(horizon):
        p = directory / f"A_{t}.csv"
        write_matrix(p, seq.matrix(t).entries)
        paths.append(p)
    return paths
