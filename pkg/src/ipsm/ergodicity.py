"""
Convergence machinery for backward products: the gamma_t^s schedule, the
Gamma(s, k) bound with a certified truncation tail, absolute-probability
estimates, and numeric series diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import AssumptionViolated, DomainError, NonConvergent
from .stochastic import (
    StochasticSequence,
    iter_backward_products,
    row_spread,
)

DEFAULT_TOL = 1e-10
MAX_TERMS = 10**7
_CHUNK = 4096


def communication_interval(n: int) -> int:
    """B = (n - 1) * ceil(log2 n)."""
    return (n - 1) * (n - 1).bit_length() if n > 1 else 0


@dataclass(frozen=True)
class AssumptionParams:
    """Constants of the lower-bound schedule on the matrix entries.

    ``log10_delta`` overrides ``delta`` for values below the float range
    (e.g. 10**(-64 n log2 n)).
    """

    n: int
    delta: float = 0.5
    lam: float = 0.5
    log10_delta: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 < self.lam < 1:
            raise ValueError("lam must lie in (0, 1)")
        if self.log10_delta is None:
            if not 0 < self.delta <= 1:
                raise ValueError("delta must lie in (0, 1]")
        elif self.log10_delta > 0:
            raise ValueError("log10_delta must be <= 0")

    @property
    def B(self) -> int:
        return communication_interval(self.n)

    @property
    def ln_delta(self) -> float:
        if self.log10_delta is not None:
            return self.log10_delta * math.log(10.0)
        return math.log(self.delta)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["B"] = self.B
        return d


def gamma_ts(params: AssumptionParams, s: int, t: int) -> float:
    """delta / (floor(s/B) + t + 1)**lam."""
    if s < 0 or t < 0:
        raise ValueError("s and t must be nonnegative")
    c = s // params.B
    return math.exp(params.ln_delta - params.lam * math.log(c + t + 1))


def _gammas(params: AssumptionParams, c: int, t0: int, t1: int) -> np.ndarray:
    t = np.arange(t0, t1, dtype=np.float64)
    return np.exp(params.ln_delta - params.lam * np.log(c + t + 1.0))


def _log_tail_bound(params: AssumptionParams, c: int, T: np.ndarray, log_PT: np.ndarray) -> np.ndarray:
    """log of an upper bound on sum_{t > T} prod_{r <= t} (1 - gamma_r).

    Uses 1 - g <= exp(-g), the integral lower bound on partial sums of the
    decreasing gamma_r, and the incomplete-gamma estimate
    Gamma(a, x) <= x**(a-1) e**-x * x / (x - a + 1), valid for x > a - 1.
    Entries where that estimate is not yet valid are +inf.
    """
    lam = params.lam
    q = 1.0 - lam
    a = 1.0 / q
    log_U = np.log(c + T + 2.0)
    log_x = params.ln_delta + q * log_U - math.log(q)
    x = np.exp(log_x)
    valid = x > a - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = log_PT + lam * log_U - params.ln_delta + log_x - np.log(np.where(valid, x - a + 1.0, 1.0))
    out = np.where(valid, out, math.inf)
    return np.where(log_PT == -math.inf, -math.inf, out)


@dataclass(frozen=True)
class ConvergenceBound:
    """Truncated Gamma(s, k); the exact value lies in [value, value + tail_error]."""

    s: int
    k: int
    value: float
    tail_error: float
    terms_used: int

    @property
    def upper(self) -> float:
        return self.value + self.tail_error

    def to_dict(self) -> dict:
        d = asdict(self)
        if not math.isfinite(self.tail_error):
            d["tail_error"] = None
        return d


def gamma_bound(
    params: AssumptionParams,
    s: int,
    k: int,
    tol: float = DEFAULT_TOL,
    max_terms: int = MAX_TERMS,
) -> ConvergenceBound:
    """Gamma(s, k) = P_m + sum_{t >= m} P_t with P_t = prod_{r<=t}(1 - gamma_r^s), m = floor((k-s)/B).

    Terms are summed until the certified remainder is at most ``tol``.
    For s > k the convention Gamma(s, k) = Gamma(k, k) applies.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    s_eff = min(s, k)
    if s_eff < 0:
        raise ValueError("k must be nonnegative")
    m = (k - s_eff) // params.B
    c = s_eff // params.B

    head = None
    total = 0.0
    log_P = 0.0  # log P_{t0 - 1}
    log_tol = math.log(tol)
    t0 = 0
    with np.errstate(divide="ignore"):
        while t0 < max_terms:
            t1 = min(t0 + _CHUNK, max_terms)
            logs = log_P + np.cumsum(np.log1p(-_gammas(params, c, t0, t1)))
            log_P = float(logs[-1])
            if m >= t1:
                t0 = t1
                continue
            lo = max(m - t0, 0)
            P = np.exp(logs[lo:])
            if head is None:
                head = float(P[0])
            T = np.arange(t0 + lo, t1)
            log_tail = _log_tail_bound(params, c, T, logs[lo:])
            hit = np.flatnonzero(log_tail <= log_tol)
            if hit.size:
                i = int(hit[0])
                total += float(np.sum(P[: i + 1]))
                tail = float(np.exp(log_tail[i]))
                return ConvergenceBound(s, k, head + total, tail, int(T[i]) + 1)
            total += float(np.sum(P))
            t0 = t1
    partial = (head if head is not None else 0.0) + total
    raise NonConvergent(f"Gamma({s},{k}) tail above {tol:g} after {max_terms} terms",
                        partial=partial, terms=max_terms)


# --------------------------------------------------------------------------
# absolute probability estimates


@dataclass(frozen=True)
class AbsoluteProbabilityEstimate:
    s: int
    pi_hat: np.ndarray
    horizon: int
    spread_at_K: float

    @property
    def n(self) -> int:
        return self.pi_hat.size

    def to_dict(self) -> dict:
        return {"s": self.s, "pi_hat": self.pi_hat.tolist(), "horizon": self.horizon,
                "spread_at_K": self.spread_at_K}


def _estimate_from_product(s: int, K: int, P: np.ndarray) -> AbsoluteProbabilityEstimate:
    pi = P.mean(axis=0)
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    pi.setflags(write=False)
    return AbsoluteProbabilityEstimate(s, pi, K, row_spread(P))


def estimate_pi(seq: StochasticSequence, s: int, K: int) -> AbsoluteProbabilityEstimate:
    """Average the rows of Phi(s, K); its row spread bounds each component's error."""
    if s < 0 or K < s:
        raise ValueError(f"horizon K={K} must be >= s={s}")
    P = np.eye(seq.n)
    for _, P in iter_backward_products(seq, s, K):
        pass
    return _estimate_from_product(s, K, P)


def pi_uniform_gap(est: AbsoluteProbabilityEstimate) -> float:
    return float(np.max(np.abs(est.pi_hat - 1.0 / est.n)))


# --------------------------------------------------------------------------
# lower-bound schedule on the realized entries


def schedule_floor_log(params: AssumptionParams, block: int) -> float:
    """log of (delta / (block + 1)**lam)**(1/B) for block = 1, 2, ..."""
    return (params.ln_delta - params.lam * math.log(block + 1)) / params.B


@dataclass
class ScheduleReport:
    horizon: int
    B: int
    blocks_checked: int
    block_min_beta: list[float]
    block_floor: list[float]
    first_beta_violation: int | None
    first_connectivity_violation: int | None

    @property
    def first_violation(self) -> int | None:
        v = [b for b in (self.first_beta_violation, self.first_connectivity_violation) if b is not None]
        return min(v) if v else None

    @property
    def satisfied(self) -> bool:
        return self.first_violation is None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["first_violation"] = self.first_violation
        d["satisfied"] = self.satisfied
        return d


def schedule_check(seq: StochasticSequence, params: AssumptionParams, horizon: int,
                   check_connectivity: bool = True) -> ScheduleReport:
    """Compare per-block minima of the realized beta trace with the schedule.

    Block s (1-based) covers indices (s-1)B <= t < sB. Connectivity failures are
    reported separately from beta failures.
    """
    from .stochastic import satisfies_connectivity_condition

    B = params.B
    if horizon < B:
        raise ValueError(f"horizon {horizon} below B={B}")
    blocks = horizon // B
    mins, floors = [], []
    beta_bad = conn_bad = None
    for blk in range(1, blocks + 1):
        ts = range((blk - 1) * B, blk * B)
        bmin = min(seq.beta(t) for t in ts)
        log_floor = schedule_floor_log(params, blk)
        mins.append(bmin)
        floors.append(math.exp(log_floor))
        if beta_bad is None and math.log(bmin) < log_floor:
            beta_bad = blk
        if check_connectivity and conn_bad is None:
            if not all(satisfies_connectivity_condition(seq.matrix(t)) for t in ts):
                conn_bad = blk
    return ScheduleReport(horizon, B, blocks, mins, floors, beta_bad, conn_bad)


# --------------------------------------------------------------------------
# Gamma dominance of realized products


@dataclass
class Prop1Report:
    s: int
    k: int
    K: int
    deviation: float
    gamma: ConvergenceBound
    spread_at_K: float
    holds: bool
    assumption_satisfied: bool
    first_violation_block: int | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma"] = self.gamma.to_dict()
        up = self.gamma.upper
        d["gamma_upper"] = up if math.isfinite(up) else None
        return d


def gamma_bound_or_vacuous(params: AssumptionParams, s: int, k: int, **kw) -> ConvergenceBound:
    """gamma_bound, but an unresolvable sum yields its partial value and an infinite tail.

    This happens for tiny delta, where Gamma is astronomically large.
    """
    try:
        return gamma_bound(params, s, k, **kw)
    except NonConvergent as exc:
        return ConvergenceBound(s, k, exc.partial or 0.0, math.inf, exc.terms)


def verify_prop1(
    seq: StochasticSequence,
    params: AssumptionParams,
    s: int,
    k: int,
    K: int,
    strict: bool = False,
    slack: float = 1e-9,
) -> Prop1Report:
    """Check max_ij |Phi_ij(s,k) - pi_hat_j(s)| <= Gamma(s,k) + spread(Phi(s,K)) + slack.

    A realized beta trace below the schedule makes the bound vacuous; the report
    is flagged, and with ``strict`` AssumptionViolated is raised instead.
    """
    if not (s <= k <= K):
        raise ValueError(f"need s <= k <= K, got {s}, {k}, {K}")
    sched = schedule_check(seq, params, max(K + 1, params.B), check_connectivity=False)
    if strict and not sched.satisfied:
        raise AssumptionViolated(
            f"beta trace below the schedule at block {sched.first_violation}")
    Pk = None
    P = None
    for t, P in iter_backward_products(seq, s, K):
        if t == k:
            Pk = P
    est = _estimate_from_product(s, K, P)
    deviation = float(np.max(np.abs(Pk - est.pi_hat[None, :])))
    g = gamma_bound_or_vacuous(params, s, k)
    holds = deviation <= g.upper + est.spread_at_K + slack
    return Prop1Report(s, k, K, deviation, g, est.spread_at_K, bool(holds),
                       sched.satisfied, sched.first_violation)


def spread_decay(seq: StochasticSequence, s: int, B: int, m_max: int) -> np.ndarray:
    """row_spread(Phi(s, s + m B)) for m = 0..m_max."""
    out = np.empty(m_max + 1)
    targets = {s + m * B: m for m in range(m_max + 1)}
    for t, P in iter_backward_products(seq, s, s + m_max * B):
        m = targets.get(t)
        if m is not None:
            out[m] = row_spread(P)
    return out


# --------------------------------------------------------------------------
# series diagnostics


def decade_ratio(partial: np.ndarray) -> float | None:
    """Growth over the last decade of k divided by growth over the one before.

    ``partial[k-1]`` is the partial sum up to k. Returns None below k = 100.
    """
    K = partial.size
    if K < 100:
        return None
    last = partial[K - 1] - partial[K // 10 - 1]
    prev = partial[K // 10 - 1] - partial[K // 100 - 1]
    if prev <= 0:
        return 0.0 if last <= 0 else math.inf
    return float(last / prev)


def decade_verdict(partial: np.ndarray, threshold: float = 0.5) -> str:
    """Heuristic label from the decade growth ratio (never a proof)."""
    r = decade_ratio(partial)
    if r is None:
        return "undetermined"
    return "summable" if r < threshold else "divergent"


@dataclass
class SeriesDiagnostics:
    """Partial products prod_{t<=k}(1 - x_t) and derived sums, k = 1..horizon."""

    horizon: int
    partial_products: np.ndarray
    partial_sums: np.ndarray
    tail_probe: dict[float, list[tuple[int, float]]]
    corollary_partial: np.ndarray | None
    verdicts: dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def pairs(a):
            return [[k, float(v)] for k, v in enumerate(a, start=1)]
        return {
            "horizon": self.horizon,
            "partial_products": pairs(self.partial_products),
            "partial_sums": pairs(self.partial_sums),
            "tail_probe": {str(mu): [[k, v] for k, v in vals] for mu, vals in self.tail_probe.items()},
            "corollary_partial": None if self.corollary_partial is None else pairs(self.corollary_partial),
            "verdicts": self.verdicts,
        }


def _as_terms(x, k: np.ndarray) -> np.ndarray:
    if callable(x):
        v = np.asarray(x(k), dtype=np.float64)
        return np.broadcast_to(v, k.shape).astype(np.float64)
    v = np.asarray(x, dtype=np.float64)
    if v.size < k.size:
        raise ValueError(f"sequence has {v.size} terms, need {k.size}")
    return v[: k.size]


def series_diagnostics(
    x: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    horizon: int,
    y: Callable[[np.ndarray], np.ndarray] | np.ndarray | None = None,
    mus: tuple[float, ...] = (1.0, 2.0),
    sample_points: list[int] | None = None,
) -> SeriesDiagnostics:
    """Numeric probes of prod (1 - x_t) type series, with x indexed from k = 1.

    ``x`` (and ``y``) are either vectorized callables of k or arrays of terms.
    The tail probe k**mu * sum_{r>=k} P_r is truncated at the horizon; the
    corollary partials are cumulative in the outer index with inner sums
    truncated at the horizon.
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    need = 2 * horizon if y is not None else horizon
    k = np.arange(1, need + 1, dtype=np.float64)
    xs = _as_terms(x, k)
    if np.any(~((xs > 0) & (xs < 1))):
        bad = int(np.flatnonzero(~((xs > 0) & (xs < 1)))[0]) + 1
        raise DomainError(f"x_{bad} = {xs[bad - 1]!r} outside (0, 1)")
    logP = np.cumsum(np.log1p(-xs))
    P_all = np.exp(logP)
    P = P_all[:horizon]
    sums = np.cumsum(P)
    # tail sums accumulated from the small end
    tail = np.cumsum(P[::-1])[::-1]
    if sample_points is None:
        sample_points = [10**e for e in range(1, 12) if 10**e <= horizon // 10]
    probe = {float(mu): [(int(kk), float(kk**mu * tail[kk - 1])) for kk in sample_points] for mu in mus}

    corollary = None
    if y is not None:
        ys = _as_terms(y, k)[:horizon]
        if np.any(ys < 0):
            raise DomainError("y must be nonnegative")
        # inner_k = sum_{r=k}^{K} prod_{t=1}^{r} (1 - x_{t+k}) = sum_{j=2k}^{K+k} P_j / P_k
        tail_all = np.cumsum(P_all[::-1])[::-1]
        tail_all = np.append(tail_all, 0.0)
        kk = np.arange(1, horizon + 1)
        num = tail_all[2 * kk - 1] - tail_all[horizon + kk]
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = np.where(P > 0, num / P, 0.0)
        corollary = np.cumsum(inner * ys)

    verdicts = {
        "product_final": float(P[-1]),
        "products_nonincreasing": bool(np.all(np.diff(P) <= 0)),
        "partial_sums_verdict": decade_verdict(sums),
        "partial_sums_decade_ratio": decade_ratio(sums),
    }
    for mu, vals in probe.items():
        v = [val for _, val in vals]
        verdicts[f"tail_probe_decreasing_mu{mu:g}"] = bool(all(b < a for a, b in zip(v, v[1:])))
    if corollary is not None:
        verdicts["corollary_verdict"] = decade_verdict(corollary)
    return SeriesDiagnostics(horizon, P, sums, probe, corollary, verdicts)


# --------------------------------------------------------------------------
# identity-approaching diagnostics


@dataclass
class Assumption2Report:
    N: int
    horizon: int
    norm_partial: np.ndarray  # sum_{j<=k} (1/j) max|I - A(j)|
    omega: np.ndarray  # max_i (1 - Phi_ii(k, k+N-1))
    omega_log_partial: np.ndarray  # sum_{j<=k} omega_j ln j
    chi: float  # sup_k sum_i 1 / A_ii(k)
    verdicts: dict[str, object]

    def to_dict(self) -> dict:
        def pairs(a):
            return [[k, float(v)] for k, v in enumerate(a, start=1)]
        return {"N": self.N, "horizon": self.horizon, "norm_partial": pairs(self.norm_partial),
                "omega": pairs(self.omega), "omega_log_partial": pairs(self.omega_log_partial),
                "chi": self.chi, "verdicts": self.verdicts}


def assumption2_diagnostics(seq: StochasticSequence, N: int, horizon: int) -> Assumption2Report:
    """Report the identity-approach quantities for k = 1..horizon; never raises on bad data."""
    if N < 2 or horizon < N:
        raise ValueError("need N >= 2 and horizon >= N")
    n = seq.n
    I = np.eye(n)
    norm_terms = np.empty(horizon)
    omega = np.empty(horizon)
    chi = 0.0
    window = [seq.matrix(t).entries for t in range(1, N)]
    for k in range(1, horizon + 1):
        A = window[0]
        window.append(seq.matrix(k + N - 1).entries)
        norm_terms[k - 1] = np.max(np.abs(I - A)) / k
        with np.errstate(divide="ignore"):
            chi = max(chi, float(np.sum(1.0 / np.diag(A))))
        P = window[0]
        for M in window[1:]:
            P = M @ P
        omega[k - 1] = float(np.max(1.0 - np.diag(P)))
        window.pop(0)
    ks = np.arange(1, horizon + 1, dtype=np.float64)
    norm_partial = np.cumsum(norm_terms)
    omega_log = np.cumsum(omega * np.log(ks))
    verdicts = {
        "norm_series": decade_verdict(norm_partial),
        "norm_series_decade_ratio": decade_ratio(norm_partial),
        "omega_log_series": decade_verdict(omega_log),
        "omega_log_series_decade_ratio": decade_ratio(omega_log),
        "heuristic": True,
    }
    return Assumption2Report(N, horizon, norm_partial, omega, omega_log, chi, verdicts)
