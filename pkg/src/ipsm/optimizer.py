"""
Decentralized subgradient methods over a time-varying stochastic sequence.

Four update rules share one loop:

* UDPSG: mix, stretch the local subgradient by 1/A_ii(k), step, project
* UDSG:  as UDPSG without the projection
* SPSG:  mix, step with the plain subgradient, project
* SDSG:  as SPSG without the projection

Step sizes are alpha_k = c / k with k = 1 on the first step, so the move
from x_k to x_{k+1} uses A(k) and alpha_{k+1}.

The auxiliary point follows y_{k+1} = y_k + pi_hat(k+1) (X_{k+1} - A(k) X_k)
with y_0 = pi_hat(0) X_0. pi_hat(t) is the row average of Phi(t, K + 40B), so
every estimate sees at least 40B further factors and pi_hat(t) = pi_hat(t+1) A(t)
holds exactly; y_k then equals pi_hat(k) X_k up to rounding, and ``y_drift``
records the gap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .ergodicity import communication_interval
from .errors import InfeasibleIterate, ZeroDiagonal
from .io import format_float
from .objectives import GlobalObjective
from .stochastic import StochasticSequence

PI_LOOKAHEAD_BLOCKS = 40
TRAJECTORY_HEADER = ("k", "consensus_error", "f_mean", "f_y", "method", "seed")


class Method(str, Enum):
    UDPSG = "UDPSG"
    UDSG = "UDSG"
    SDSG = "SDSG"
    SPSG = "SPSG"

    @property
    def projected(self) -> bool:
        return self in (Method.UDPSG, Method.SPSG)

    @property
    def stretched(self) -> bool:
        return self in (Method.UDPSG, Method.UDSG)


@dataclass(frozen=True)
class FeasibleBox:
    dim: int
    lower: np.ndarray | float = -1.0
    upper: np.ndarray | float = 1.0

    def __post_init__(self):
        lo = np.broadcast_to(np.asarray(self.lower, dtype=np.float64), (self.dim,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=np.float64), (self.dim,)).copy()
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not np.all(lo < hi):
            raise ValueError("lower must be strictly below upper in every coordinate")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))


def project_box(box: FeasibleBox, x) -> np.ndarray:
    """Componentwise clamp; works row-wise on a stack of points."""
    return np.clip(np.asarray(x, dtype=np.float64), box.lower, box.upper)


@dataclass(frozen=True)
class OptimizerConfig:
    method: Method = Method.UDPSG
    iterations: int = 20000
    step_scale: float = 1.0  # c in alpha_k = c / k
    seed: int = 0  # initial states
    noise_std: float = 0.0  # optional additive subgradient noise, off by default
    state_every: int = 0  # keep every m-th joint state; 0 keeps none

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if not self.step_scale > 0:
            raise ValueError("step_scale must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.state_every < 0:
            raise ValueError("state_every must be nonnegative")

    def alpha(self, k: int) -> float:
        return self.step_scale / k

    def to_dict(self) -> dict:
        return {"method": self.method.value, "iterations": self.iterations,
                "step_scale": self.step_scale, "seed": self.seed,
                "noise_std": self.noise_std, "state_every": self.state_every}


@dataclass
class AgentState:
    x: np.ndarray  # (n, d), row i is agent i
    k: int = 0


@dataclass(frozen=True)
class StepResult:
    x_next: np.ndarray
    v: np.ndarray  # pre-projection points
    xi: np.ndarray  # projection errors x_next - v
    g: np.ndarray  # local subgradients at the current states
    mixed: np.ndarray  # A(k) X_k


def step(method, X, A, objective: GlobalObjective, alpha: float, box: FeasibleBox | None,
         zero_tol: float = 1e-15, noise=None) -> StepResult:
    method = Method(method)
    A = np.asarray(A, dtype=np.float64)
    mixed = A @ X
    g = objective.local_subgradients(X)
    if noise is not None:
        g = g + noise
    if method.stretched:
        diag = np.diag(A)
        if np.any(diag <= zero_tol):
            raise ZeroDiagonal(f"zero diagonal at agents {np.flatnonzero(diag <= zero_tol).tolist()}")
        v = mixed - alpha * g / diag[:, None]
    else:
        v = mixed - alpha * g
    x_next = project_box(box, v) if method.projected else v
    return StepResult(x_next, v, x_next - v, g, mixed)


def auxiliary_update(y, pi_next, u) -> np.ndarray:
    """y + sum_i pi_i u_i, where row i of u is agent i's increment."""
    return np.asarray(y, dtype=np.float64) + np.asarray(pi_next) @ np.asarray(u, dtype=np.float64)


def consensus_error(X) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return float(np.linalg.norm(X - X.mean(axis=0), axis=1).mean())


def absolute_probability_path(mats: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    """pi_hat(t) and its error bar for t = 0..K from stacked A(0), ..., A(T).

    pi_hat(t) is the row average of Phi(t, T), built backwards through
    Phi(t, T) = Phi(t+1, T) A(t); the error bar is the row spread of Phi(t, T).
    """
    T = mats.shape[0] - 1
    if T < K:
        raise ValueError("need matrices up to at least index K")
    n = mats.shape[1]
    pis = np.empty((K + 1, n))
    spreads = np.empty(K + 1)
    P = mats[T]
    for t in range(T, -1, -1):
        if t < T:
            P = P @ mats[t]
        if t <= K:
            pi = P.mean(axis=0)
            pis[t] = pi / pi.sum()
            spreads[t] = np.max(P.max(axis=0) - P.min(axis=0))
    return pis, spreads


@dataclass
class Trajectory:
    method: Method
    seed: int
    k: np.ndarray
    consensus_error: np.ndarray
    f_mean: np.ndarray  # f at the agents' arithmetic mean
    f_y: np.ndarray  # f at the auxiliary point
    y: np.ndarray  # (K+1, d)
    movement: np.ndarray  # mean_i |x_{i,k} - x_{i,k-1}|, 0 at k = 0
    y_distance: np.ndarray  # max_i |x_{i,k} - y_k|
    y_drift: np.ndarray  # |y_k - pi_hat(k) X_k|
    pi_spread: np.ndarray
    final_states: np.ndarray
    final_local_values: np.ndarray
    xi_excess: float  # max over steps of |xi| - alpha |g| / A_ii; <= 0 up to rounding
    alpha_sum: np.ndarray
    alpha_sq_sum: np.ndarray
    states: list[tuple[int, np.ndarray]] = field(default_factory=list)
    known_minimum: float | None = None

    def __len__(self):
        return self.k.size

    @property
    def diverged(self) -> bool:
        """Unprojected methods can overflow on steep objectives."""
        return not bool(np.all(np.isfinite(self.final_states)))

    def summary(self) -> dict:
        return {
            "method": self.method.value,
            "seed": self.seed,
            "iterations": int(self.k[-1]),
            "consensus_error": float(self.consensus_error[-1]),
            "f_mean": float(self.f_mean[-1]),
            "f_y": float(self.f_y[-1]),
            "max_agent_y_distance": float(self.y_distance[-1]),
            "y_drift_max": float(np.nanmax(self.y_drift)),
            "pi_spread_max": float(np.nanmax(self.pi_spread)) if np.any(np.isfinite(self.pi_spread)) else None,
            "xi_excess": self.xi_excess,
            "diverged": self.diverged,
        }


def initial_states(box: FeasibleBox, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return box.sample(rng, n)


def run(config: OptimizerConfig, seq: StochasticSequence, objective: GlobalObjective,
        box: FeasibleBox, x0: np.ndarray | None = None) -> Trajectory:
    """Iterate ``config.iterations`` steps and collect per-k metrics.

    Overflow in unprojected methods is not an error; see ``Trajectory.diverged``.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _run(config, seq, objective, box, x0)


def _run(config, seq, objective, box, x0) -> Trajectory:
    n, d, K = seq.n, box.dim, config.iterations
    if objective.n != n:
        raise ValueError(f"{objective.n} objectives for {n} agents")
    if objective.dim != d:
        raise ValueError(f"objective dim {objective.dim} differs from box dim {d}")
    method = config.method
    X = initial_states(box, n, config.seed) if x0 is None else np.array(x0, dtype=np.float64)
    noise_rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1,)))
    horizon = K + PI_LOOKAHEAD_BLOCKS * communication_interval(n)
    mats = np.stack([seq.matrix(t).entries for t in range(horizon + 1)])
    pis, spread = absolute_probability_path(mats, K)

    Xs = np.empty((K + 1, n, d))
    ys = np.empty((K + 1, d))
    xi_excess = -np.inf

    X = Xs[0] = X
    y = ys[0] = pis[0] @ X
    for k in range(K):
        A = mats[k]
        alpha = config.alpha(k + 1)
        noise = noise_rng.normal(0.0, config.noise_std, size=X.shape) if config.noise_std else None
        res = step(method, X, A, objective, alpha, box, seq.zero_tol, noise)
        if method.projected:
            if not box.contains(res.x_next):
                raise InfeasibleIterate(f"iterate left the box at k={k + 1}")
            scale = 1.0 / np.diag(A) if method.stretched else 1.0
            bound = alpha * np.sqrt((res.g * res.g).sum(axis=1)) * scale
            excess = np.sqrt((res.xi * res.xi).sum(axis=1)) - bound
            xi_excess = max(xi_excess, excess.max())
        y = auxiliary_update(y, pis[k + 1], res.x_next - res.mixed)
        X = Xs[k + 1] = res.x_next
        ys[k + 1] = y

    # metrics in one vectorized pass
    xbar = Xs.mean(axis=1)
    cons = np.linalg.norm(Xs - xbar[:, None, :], axis=2).mean(axis=1)
    f_mean = objective.values(xbar)
    f_y = objective.values(ys)
    move = np.zeros(K + 1)
    move[1:] = np.linalg.norm(np.diff(Xs, axis=0), axis=2).mean(axis=1)
    ydist = np.linalg.norm(Xs - ys[:, None, :], axis=2).max(axis=1)
    drift = np.linalg.norm(ys - np.einsum("kn,knd->kd", pis, Xs), axis=1)
    states = []
    if config.state_every:
        states = [(k, Xs[k].copy()) for k in range(0, K + 1, config.state_every)]

    ks = np.arange(K + 1)
    alphas = np.concatenate([[0.0], config.step_scale / np.arange(1, K + 1)])
    return Trajectory(
        method=method, seed=config.seed, k=ks, consensus_error=cons, f_mean=f_mean, f_y=f_y,
        y=ys, movement=move, y_distance=ydist, y_drift=drift, pi_spread=spread,
        final_states=X, final_local_values=objective.local_values(X),
        xi_excess=float(xi_excess) if K and method.projected else 0.0,
        alpha_sum=np.cumsum(alphas), alpha_sq_sum=np.cumsum(alphas**2), states=states,
        known_minimum=objective.known_minimum,
    )


# --------------------------------------------------------------------------
# persistence


def trajectory_csv(traj: Trajectory, seed_label: int | None = None) -> str:
    seed = traj.seed if seed_label is None else seed_label
    lines = [",".join(TRAJECTORY_HEADER)]
    m = traj.method.value
    for k, c, fm, fy in zip(traj.k, traj.consensus_error, traj.f_mean, traj.f_y):
        lines.append(f"{k},{format_float(c)},{format_float(fm)},{format_float(fy)},{m},{seed}")
    return "\n".join(lines) + "\n"


def write_trajectory_csv(traj: Trajectory, path, seed_label: int | None = None) -> Path:
    path = Path(path)
    path.write_text(trajectory_csv(traj, seed_label), encoding="utf-8")
    return path


def write_states_jsonl(traj: Trajectory, path) -> Path:
    """One JSON object per kept state: k, per-agent x, and the auxiliary point y."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for k, X in traj.states:
            fh.write(json.dumps({"k": k, "x": X.tolist(), "y": traj.y[k].tolist()}) + "\n")
    return path


def read_trajectory_csv(path) -> dict:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if tuple(lines[0].split(",")) != TRAJECTORY_HEADER:
        raise ValueError(f"unexpected header in {path}")
    rows = [ln.split(",") for ln in lines[1:]]
    return {
        "k": np.array([int(r[0]) for r in rows]),
        "consensus_error": np.array([float(r[1]) for r in rows]),
        "f_mean": np.array([float(r[2]) for r in rows]),
        "f_y": np.array([float(r[3]) for r in rows]),
        "method": [r[4] for r in rows],
        "seed": [int(r[5]) for r in rows],
    }
