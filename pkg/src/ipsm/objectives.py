"""
Per-agent objective families with value and subgradient oracles.

Every family is written once in batched form: ``a`` has shape (m, p), ``b``
shape (m,), ``x`` shape (m, d), and the oracles return shape (m,) values and
(m, d) subgradients. A single agent is the m = 1 case.

At kinks the zero element of the subdifferential is returned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import lsq_linear

from .errors import DimensionMismatch, UnknownFamily


@dataclass(frozen=True)
class Family:
    name: str
    value: Callable
    grad: Callable
    lipschitz: Callable  # bound on |g| over [-r, r]^d
    kink_distance: Callable | None = None
    convex: bool = False
    smooth: bool = True
    pl: bool = False
    fixed_dim: int | None = None
    vector_a: bool = True  # a has length d; otherwise a is a scalar weight


def _sq_value(a, b, x):
    r = np.einsum("mp,mp->m", a, x) - b
    return r * r


def _sq_grad(a, b, x):
    r = np.einsum("mp,mp->m", a, x) - b
    return 2.0 * r[:, None] * a


def _sq_lip(a, b, r):
    return 2.0 * (np.abs(a).sum(axis=1) * r + np.abs(b)) * np.linalg.norm(a, axis=1)


def _lse(x):
    m = x.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=1, keepdims=True)))[:, 0]


def _softmax_value(a, b, x):
    return a[:, 0] * _lse(x)


def _softmax_grad(a, b, x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return a[:, :1] * e / e.sum(axis=1, keepdims=True)


def _abs_value(a, b, x):
    return np.abs(np.einsum("mp,mp->m", a, x) - b)


def _abs_grad(a, b, x):
    r = np.einsum("mp,mp->m", a, x) - b
    return np.sign(r)[:, None] * a


def _abs_kink(a, b, x):
    return np.abs(np.einsum("mp,mp->m", a, x) - b) / np.linalg.norm(a, axis=1)


def _invex_value(a, b, x):
    u, v = x[:, 0], x[:, 1]
    return np.abs(a[:, 0] * v) * (b * u * u - 1.0) ** 2


def _invex_grad(a, b, x):
    a = a[:, 0]
    u, v = x[:, 0], x[:, 1]
    c = b * u * u - 1.0
    gu = np.abs(a * v) * 2.0 * c * 2.0 * b * u
    gv = np.abs(a) * np.sign(v) * c * c
    return np.stack([gu, gv], axis=1)


def _invex_lip(a, b, r):
    a = np.abs(a[:, 0])
    c = np.abs(b) * r * r + 1.0
    return np.hypot(a * r * 4.0 * c * np.abs(b) * r, a * c * c)


def _log_sin_value(a, b, x):
    u, v = x[:, 0], x[:, 1]
    return a[:, 0] * np.log1p(u * u + v * v) + np.sin(u + b) ** 2


def _log_sin_grad(a, b, x):
    a = a[:, 0]
    u, v = x[:, 0], x[:, 1]
    q = 1.0 + u * u + v * v
    gu = 2.0 * a * u / q + 2.0 * np.sin(u + b) * np.cos(u + b)
    gv = 2.0 * a * v / q
    return np.stack([gu, gv], axis=1)


def _log_sin_lip(a, b, r):
    # 2|u| / (1 + u^2 + v^2) <= 1
    a = np.abs(a[:, 0])
    return np.hypot(a + 1.0, a)


def _linexp_value(a, b, x):
    u, v = x[:, 0], x[:, 1]
    return (a[:, 0] * v - 0.5) ** 2 * np.exp((u - b) ** 2)


def _linexp_grad(a, b, x):
    a = a[:, 0]
    u, v = x[:, 0], x[:, 1]
    w = a * v - 0.5
    e = np.exp((u - b) ** 2)
    return np.stack([w * w * e * 2.0 * (u - b), 2.0 * a * w * e], axis=1)


def _linexp_lip(a, b, r):
    a = np.abs(a[:, 0])
    s = r + np.abs(b)
    w = a * r + 0.5
    e = np.exp(s * s)
    return np.hypot(w * w * e * 2.0 * s, 2.0 * a * w * e)


FAMILIES: dict[str, Family] = {
    f.name: f
    for f in [
        Family("squared_error", _sq_value, _sq_grad, _sq_lip, convex=True, pl=True),
        Family("softmax", _softmax_value, _softmax_grad, lambda a, b, r: np.abs(a[:, 0]),
               convex=True, vector_a=False),
        Family("absolute_error", _abs_value, _abs_grad, lambda a, b, r: np.linalg.norm(a, axis=1),
               kink_distance=_abs_kink, convex=True, smooth=False),
        Family("invex", _invex_value, _invex_grad, _invex_lip,
               kink_distance=lambda a, b, x: np.abs(x[:, 1]), smooth=False, fixed_dim=2, vector_a=False),
        Family("log_sin", _log_sin_value, _log_sin_grad, _log_sin_lip, fixed_dim=2, vector_a=False),
        Family("linear_exp", _linexp_value, _linexp_grad, _linexp_lip, fixed_dim=2, vector_a=False),
    ]
}

CONVEX_FAMILIES = ("squared_error", "softmax", "absolute_error")
NONCONVEX_FAMILIES = ("invex", "log_sin", "linear_exp")


def get_family(name: str) -> Family:
    try:
        return FAMILIES[name]
    except KeyError:
        raise UnknownFamily(f"unknown objective family {name!r}") from None


# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Objective:
    """One agent's local function f_i with its data (a_i, b_i)."""

    family: str
    a: np.ndarray
    b: float
    dim: int
    lipschitz: float  # bound on |g| over the box [-1, 1]^dim
    mu: float | None = None  # PL constant, PL-flagged families only
    known_minimum: float | None = None

    @property
    def spec(self) -> Family:
        return FAMILIES[self.family]

    @property
    def convex(self) -> bool:
        return self.spec.convex

    @property
    def smooth(self) -> bool:
        return self.spec.smooth

    @property
    def pl(self) -> bool:
        return self.spec.pl

    def _x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.dim:
            raise DimensionMismatch(f"point has length {x.size}, objective has dim {self.dim}")
        return x[None, :]

    def value(self, x) -> float:
        return float(self.spec.value(self.a[None, :], np.array([self.b]), self._x(x))[0])

    __call__ = value

    def subgradient(self, x) -> np.ndarray:
        return self.spec.grad(self.a[None, :], np.array([self.b]), self._x(x))[0]

    def kink_distance(self, x) -> float:
        if self.spec.kink_distance is None:
            return np.inf
        return float(self.spec.kink_distance(self.a[None, :], np.array([self.b]), self._x(x))[0])


def make_objective(family: str, a, b: float, dim: int) -> Objective:
    spec = get_family(family)
    if spec.fixed_dim is not None and dim != spec.fixed_dim:
        raise DimensionMismatch(f"{family} is defined on dimension {spec.fixed_dim}, got {dim}")
    a = np.atleast_1d(np.asarray(a, dtype=np.float64)).copy()
    want = dim if spec.vector_a else 1
    if a.shape != (want,):
        raise DimensionMismatch(f"{family} expects a of length {want}, got shape {a.shape}")
    a.setflags(write=False)
    b = float(b)
    lip = float(spec.lipschitz(a[None, :], np.array([b]), 1.0)[0])
    mu = None
    known = None
    if family == "squared_error":
        mu = 2.0 * float(a @ a)
        known = 0.0
    elif family in ("absolute_error", "invex"):
        known = 0.0
    return Objective(family, a, b, dim, lip, mu, known)


def subgradient(obj, x) -> np.ndarray:
    return obj.subgradient(x)


# --------------------------------------------------------------------------
# datasets


@dataclass(frozen=True, eq=False)
class Dataset:
    """Per-agent pairs (a_i, b_i); ``a`` has shape (n, p)."""

    family: str
    dim: int
    a: np.ndarray
    b: np.ndarray
    seed: int | None = None

    def __len__(self):
        return self.b.size

    def objectives(self) -> list[Objective]:
        return [make_objective(self.family, self.a[i], self.b[i], self.dim) for i in range(len(self))]

    def to_dict(self) -> dict:
        return {"family": self.family, "dim": self.dim, "seed": self.seed,
                "a": self.a.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        return cls(d["family"], int(d["dim"]), np.asarray(d["a"], dtype=np.float64),
                   np.asarray(d["b"], dtype=np.float64), d.get("seed"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")


def _sample_a(rng: np.random.Generator, shape, signed: bool) -> np.ndarray:
    mag = rng.uniform(0.1, 1.0, size=shape)
    if not signed:
        return mag
    return np.where(rng.random(shape) < 0.5, -mag, mag)


def make_dataset(family: str, n_agents: int, dim: int = 2, seed: int = 0,
                 realizable: bool = False) -> Dataset:
    """Sample per-agent data: |a| uniform on [0.1, 1] with random sign, b uniform on [-1, 1].

    Softmax weights are kept positive so that every local function is convex.
    With ``realizable`` (linear families only) b_i = <a_i, x_true> for a hidden
    x_true in [-0.5, 0.5]^dim, so all local minimizers coincide.
    """
    spec = get_family(family)
    if spec.fixed_dim is not None:
        if dim != spec.fixed_dim:
            raise DimensionMismatch(f"{family} is defined on dimension {spec.fixed_dim}, got {dim}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    p = dim if spec.vector_a else 1
    a = _sample_a(rng, (n_agents, p), signed=family != "softmax")
    b = rng.uniform(-1.0, 1.0, size=n_agents)
    if realizable:
        if family not in ("squared_error", "absolute_error"):
            raise ValueError(f"realizable data is defined for linear families, not {family}")
        x_true = rng.uniform(-0.5, 0.5, size=dim)
        b = a @ x_true
    return Dataset(family, dim, a, b, seed)


# --------------------------------------------------------------------------
# aggregation


@dataclass(eq=False)
class GlobalObjective:
    """f(x) = sum_i f_i(x) over the agents' local objectives."""

    objectives: list[Objective]
    known_minimum: float | None = None
    minimizer: np.ndarray | None = None
    minimizer_in_box: bool | None = None
    mu: float | None = None
    _stack: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        fams = {o.family for o in self.objectives}
        if len(fams) == 1:
            self._stack = (FAMILIES[fams.pop()],
                           np.stack([o.a for o in self.objectives]),
                           np.array([o.b for o in self.objectives]))

    @property
    def n(self) -> int:
        return len(self.objectives)

    @property
    def dim(self) -> int:
        return self.objectives[0].dim

    @property
    def lipschitz(self) -> float:
        return max(o.lipschitz for o in self.objectives)

    def local_values(self, X) -> np.ndarray:
        """f_i evaluated at row i of X."""
        X = np.asarray(X, dtype=np.float64)
        if self._stack is not None:
            spec, a, b = self._stack
            return spec.value(a, b, X)
        return np.array([o.value(x) for o, x in zip(self.objectives, X)])

    def local_subgradients(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self._stack is not None:
            spec, a, b = self._stack
            return spec.grad(a, b, X)
        return np.stack([o.subgradient(x) for o, x in zip(self.objectives, X)])

    def value(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        return float(self.local_values(np.repeat(x, self.n, axis=0)).sum())

    __call__ = value

    def subgradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        return self.local_subgradients(np.repeat(x, self.n, axis=0)).sum(axis=0)

    def kink_distance(self, x) -> float:
        return min(o.kink_distance(x) for o in self.objectives)

    def values(self, points) -> np.ndarray:
        """f at each row of ``points``."""
        P = np.atleast_2d(np.asarray(points, dtype=np.float64))
        m = P.shape[0]
        total = np.zeros(m)
        for o in self.objectives:
            total += o.spec.value(np.broadcast_to(o.a, (m, o.a.size)), np.full(m, o.b), P)
        return total


def pl_constant(design: np.ndarray) -> float:
    """Smallest positive eigenvalue of the Hessian 2 A^T A of ||Ax - b||^2."""
    sv = np.linalg.svd(np.asarray(design, dtype=np.float64), compute_uv=False)
    pos = sv[sv > sv.max() * 1e-12]
    return 2.0 * float(pos.min() ** 2)


def aggregate(objectives, box=None) -> GlobalObjective:
    """Sum local objectives; attach a known minimum where an oracle exists.

    Squared error uses least squares; when a box is given and the unconstrained
    minimizer leaves it, a bounded least-squares solve gives the box minimum.
    Invex data has minimum 0 on the line y = 0.
    """
    objectives = list(objectives)
    if not objectives:
        raise ValueError("no objectives to aggregate")
    if len({o.dim for o in objectives}) != 1:
        raise DimensionMismatch("agents have different dimensions")
    g = GlobalObjective(objectives)
    fams = {o.family for o in objectives}
    if fams == {"squared_error"}:
        A = np.stack([o.a for o in objectives])
        b = np.array([o.b for o in objectives])
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
        in_box = True if box is None else bool(box.contains(x))
        if not in_box:
            res = lsq_linear(A, b, bounds=(box.lower, box.upper), tol=1e-14, method="bvls")
            x = res.x
        g.minimizer = x
        g.minimizer_in_box = in_box
        g.known_minimum = g.value(x)
        g.mu = pl_constant(A)
    elif fams == {"invex"}:
        g.minimizer = np.zeros(2)
        g.minimizer_in_box = True
        g.known_minimum = 0.0
    elif len(objectives) == 1 and objectives[0].known_minimum is not None:
        g.known_minimum = objectives[0].known_minimum
    return g


# --------------------------------------------------------------------------


def finite_difference_check(obj, points, h: float = 1e-6) -> float:
    """max over points of |g - g_fd| / (1 + |g|) with central differences.

    Points within 10 h of a declared nonsmooth locus are skipped; if every
    point is skipped the result is nan.
    """
    worst = np.nan
    for x in np.atleast_2d(np.asarray(points, dtype=np.float64)):
        if obj.kink_distance(x) <= 10 * h:
            continue
        g = obj.subgradient(x)
        fd = np.empty_like(x)
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = h
            fd[j] = (obj.value(x + e) - obj.value(x - e)) / (2 * h)
        err = float(np.linalg.norm(g - fd) / (1.0 + np.linalg.norm(g)))
        worst = err if np.isnan(worst) else max(worst, err)
    return worst
