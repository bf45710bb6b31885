"""
Experiment configuration, the ``ipsm`` command line, and result files.

Configs are JSON. Every key is materialized at load time and the full config
is written next to the results, so a run is reproducible from its output
directory alone. Outputs carry no timestamps or timings.

Exit codes: 0 success, 2 config or input error, 3 assumption violation at run
time, 1 when ``--validate`` finds a malformed output file.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .ergodicity import (
    AssumptionParams,
    assumption2_diagnostics,
    communication_interval,
    estimate_pi,
    gamma_bound_or_vacuous,
    pi_uniform_gap,
    schedule_check,
    spread_decay,
    verify_prop1,
)
from .errors import (
    AssumptionViolated,
    ConfigError,
    DimensionMismatch,
    GenerationFailure,
    InfeasibleIterate,
    NonConvergent,
    NonSquare,
    ParseError,
    UnknownFamily,
    ZeroDiagonal,
)
from .io import read_matrix
from .objectives import FAMILIES, aggregate, make_dataset
from .optimizer import (
    TRAJECTORY_HEADER,
    FeasibleBox,
    Method,
    OptimizerConfig,
    Trajectory,
    run,
    write_states_jsonl,
    write_trajectory_csv,
)
from .stochastic import (
    ENUMERATION_LIMIT,
    ROW_SUM_TOL,
    StochasticMatrix,
    is_sarymsakov,
    is_scrambling,
    normalize_rows,
    positive_column_index,
    satisfies_connectivity_condition,
)
from .topology import Mode, MatrixSequence, TopologyConfig

EXIT_OK, EXIT_INVALID_OUTPUT, EXIT_CONFIG, EXIT_ASSUMPTION = 0, 1, 2, 3

DEFAULTS: dict = {
    "name": "experiment",
    "seeds": [0],
    "out": None,
    "topology": {
        "n": 6,
        "extra_edge_prob": 0.3,
        "mode": "standard",
        "epsilon_exponent": 1.5,
        "weight_floor": 0.0,
        "delta": 0.5,
        "lam": 0.5,
        "log10_delta": None,
    },
    "optimizer": {
        "methods": ["UDPSG"],
        "iterations": 20000,
        "step_scale": 1.0,
        "noise_std": 0.0,
        "state_every": 0,
    },
    "objective": {
        "families": ["squared_error"],
        "dim": 2,
        "dataset_seed": None,  # None: use the run seed
        "realizable": False,
        "lower": -1.0,
        "upper": 1.0,
    },
    "ergodicity": {
        "s": [0],
        "k": [150],
        "K": [900],
        "horizon": 3000,
        "spread_blocks": 200,
        "pi_points": [100, 1000, 10000],
        "pi_lookahead_blocks": 40,
        "N": None,  # None: use B
        "strict": False,
    },
}


def _merge(defaults: dict, given: dict, where: str) -> dict:
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}.{key} must be an object")
            out[key] = _merge(defaults[key], val, f"{where}.{key}")
        else:
            out[key] = val
    return out


def _int_list(v, what: str) -> list[int]:
    if not isinstance(v, list) or not v or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{what} must be a non-empty list of integers")
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully materialized experiment description."""

    data: dict

    @classmethod
    def from_dict(cls, given: dict | None = None) -> "ExperimentConfig":
        d = _merge(DEFAULTS, given or {}, "config")
        cfg = cls(d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            given = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(given, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(given)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def replace(self, **sections) -> "ExperimentConfig":
        """New config with top-level keys or section entries overridden."""
        d = self.to_dict()
        for key, val in sections.items():
            if isinstance(val, dict):
                d[key].update(val)
            else:
                d[key] = val
        return ExperimentConfig.from_dict(d)

    # ---- validation

    def validate(self):
        d = self.data
        for s in _int_list(d["seeds"], "seeds"):
            if s < 0:
                raise ConfigError("seeds must be nonnegative")
        t = d["topology"]
        try:
            self.assumption_params()
            self.topology(0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"topology: {exc}") from exc
        o = d["optimizer"]
        if not isinstance(o["methods"], list) or not o["methods"]:
            raise ConfigError("optimizer.methods must be a non-empty list")
        for m in o["methods"]:
            try:
                Method(m)
            except ValueError:
                raise ConfigError(f"unknown method {m!r}; choose from {[x.value for x in Method]}") from None
        if len(set(o["methods"])) != len(o["methods"]):
            raise ConfigError("optimizer.methods has duplicates")
        try:
            self.optimizer(o["methods"][0], 0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"optimizer: {exc}") from exc
        ob = d["objective"]
        if not isinstance(ob["families"], list) or not ob["families"]:
            raise ConfigError("objective.families must be a non-empty list")
        for f in ob["families"]:
            if f not in FAMILIES:
                raise ConfigError(f"unknown objective family {f!r}; choose from {sorted(FAMILIES)}")
            fixed = FAMILIES[f].fixed_dim
            if fixed is not None and ob["dim"] != fixed:
                raise ConfigError(f"{f} needs objective.dim = {fixed}, got {ob['dim']}")
        if not isinstance(ob["dim"], int) or ob["dim"] < 1:
            raise ConfigError("objective.dim must be a positive integer")
        try:
            self.box()
        except ValueError as exc:
            raise ConfigError(f"objective box: {exc}") from exc
        e = d["ergodicity"]
        B = communication_interval(t["n"])
        if not isinstance(e["horizon"], int) or e["horizon"] < B:
            raise ConfigError(
                f"ergodicity.horizon {e['horizon']} is below the communication interval "
                f"B={B} for n={t['n']}")
        for key in ("s", "k", "K", "pi_points"):
            for v in _int_list(e[key], f"ergodicity.{key}"):
                if v < 0:
                    raise ConfigError(f"ergodicity.{key} entries must be nonnegative")
        if not self.prop1_triples():
            raise ConfigError("ergodicity grid has no (s, k, K) with s <= k <= K")
        if e["N"] is not None and (not isinstance(e["N"], int) or e["N"] < 2):
            raise ConfigError("ergodicity.N must be an integer >= 2")

    def require_methods(self, at_least: int):
        if len(self.data["optimizer"]["methods"]) < at_least:
            raise ConfigError(f"this command needs at least {at_least} methods in optimizer.methods")

    # ---- typed views

    @property
    def seeds(self) -> list[int]:
        return list(self.data["seeds"])

    def assumption_params(self) -> AssumptionParams:
        t = self.data["topology"]
        return AssumptionParams(t["n"], delta=t["delta"], lam=t["lam"], log10_delta=t["log10_delta"])

    def topology(self, seed: int) -> TopologyConfig:
        t = self.data["topology"]
        return TopologyConfig(
            n=t["n"], seed=seed, extra_edge_prob=t["extra_edge_prob"], mode=Mode(t["mode"]),
            epsilon_exponent=t["epsilon_exponent"], weight_floor=t["weight_floor"],
            assumption_params=self.assumption_params())

    def optimizer(self, method: str, seed: int) -> OptimizerConfig:
        o = self.data["optimizer"]
        return OptimizerConfig(method=Method(method), iterations=o["iterations"],
                               step_scale=o["step_scale"], seed=seed, noise_std=o["noise_std"],
                               state_every=o["state_every"])

    def box(self) -> FeasibleBox:
        ob = self.data["objective"]
        return FeasibleBox(ob["dim"], ob["lower"], ob["upper"])

    def dataset_seed(self, seed: int) -> int:
        ds = self.data["objective"]["dataset_seed"]
        return seed if ds is None else ds

    def prop1_triples(self) -> list[tuple[int, int, int]]:
        e = self.data["ergodicity"]
        return [(s, k, K) for s in e["s"] for k in e["k"] for K in e["K"] if s <= k <= K]


def apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    topo = {}
    for flag, key in (("n", "n"), ("mode", "mode"), ("extra_edge_prob", "extra_edge_prob"),
                      ("epsilon_exponent", "epsilon_exponent")):
        val = getattr(args, flag, None)
        if val is not None:
            topo[key] = val
    d = cfg.to_dict()
    d["topology"].update(topo)
    if getattr(args, "topology_seed", None) is not None:
        d["seeds"] = [args.topology_seed]
    if getattr(args, "out", None) is not None:
        d["out"] = str(args.out)
    return ExperimentConfig.from_dict(d)


# --------------------------------------------------------------------------
# file helpers


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite(obj):
    """Replace non-finite floats by None; diverged runs are flagged separately."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj) -> Path:
    obj = _finite(obj)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_jsonable, allow_nan=False) + "\n",
                    encoding="utf-8")
    return path


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = cfg.data["out"]
    if out is None:
        raise ConfigError("no output directory: pass --out or set \"out\" in the config")
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return path


def _write_config(cfg: ExperimentConfig, out: Path, source: Path | None) -> list[Path]:
    d = cfg.to_dict()
    d["out"] = None  # keeps results identical across output locations
    paths = [write_json(out / "config.json", d)]
    if source is not None:
        p = out / "config.source.json"
        p.write_bytes(Path(source).read_bytes())
        paths.append(p)
    return paths


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# check


def classify(a: np.ndarray) -> dict:
    """Structural report for a square matrix read from a file."""
    a = np.asarray(a, dtype=np.float64)
    finite = bool(np.all(np.isfinite(a)))
    nonneg = finite and bool(np.all(a >= 0))
    stochastic = nonneg and float(np.max(np.abs(a.sum(axis=1) - 1.0))) <= ROW_SUM_TOL
    report = {
        "n": int(a.shape[0]),
        "stochastic": stochastic,
        "positive_diagonal": nonneg and bool(np.all(np.diag(a) > 0)),
        "connectivity": None,
        "sarymsakov": None,
        "scrambling": None,
        "positive_column": None,
        "min_positive_entry": None,
    }
    if not nonneg or np.any(a.sum(axis=1) <= 0):
        return report
    # the classifiers depend on the support only, so rescale rows when needed
    A = StochasticMatrix(a) if stochastic else normalize_rows(a)
    report["connectivity"] = satisfies_connectivity_condition(A)
    report["sarymsakov"] = is_sarymsakov(A) if A.n <= ENUMERATION_LIMIT else None
    report["scrambling"] = is_scrambling(A)
    pc = positive_column_index(A)
    report["positive_column"] = None if pc is None else [pc[0], float(a[:, pc[0]].min())]
    report["min_positive_entry"] = float(a[a > A.zero_tol].min()) if np.any(a > A.zero_tol) else None
    return report


def cmd_check(matrix_path, out: Path | None = None) -> tuple[dict, list[Path]]:
    report = classify(read_matrix(matrix_path))
    paths = [write_json(Path(out) / "check.json", report)] if out is not None else []
    return report, paths


# --------------------------------------------------------------------------
# ergodicity


def ergodicity_report(cfg: ExperimentConfig, seed: int) -> dict:
    e = cfg.data["ergodicity"]
    topo = cfg.topology(seed)
    seq = MatrixSequence(topo)
    params = topo.assumption_params
    B = params.B
    gammas = []
    for s in e["s"]:
        for k in e["k"]:
            if k >= s:
                g = gamma_bound_or_vacuous(params, s, k)
                up = g.upper if math.isfinite(g.upper) else None
                gammas.append({**g.to_dict(), "upper": up})
    prop1 = [verify_prop1(seq, params, s, k, K, strict=e["strict"]).to_dict()
             for s, k, K in cfg.prop1_triples()]
    s0 = e["s"][0]
    spreads = spread_decay(seq, s0, B, e["spread_blocks"])
    pis = []
    for s in e["pi_points"]:
        est = estimate_pi(seq, s, s + e["pi_lookahead_blocks"] * B)
        pis.append({**est.to_dict(), "uniform_gap": pi_uniform_gap(est)})
    N = e["N"] or B
    return {
        "seed": seed,
        "topology": topo.to_dict(),
        "B": B,
        "gamma_grid": gammas,
        "prop1": prop1,
        "verify_prop1": all(p["holds"] for p in prop1),
        "spread_decay": {"s": s0, "m": list(range(e["spread_blocks"] + 1)), "spread": spreads},
        "pi_series": pis,
        "schedule": schedule_check(seq, params, e["horizon"]).to_dict(),
        "assumption2": assumption2_diagnostics(seq, N, e["horizon"]).to_dict(),
    }


def cmd_ergodicity(cfg: ExperimentConfig, threads: int = 1, source=None) -> list[Path]:
    out = _out_dir(cfg)
    paths = _write_config(cfg, out, source)
    reports = _pmap(lambda s: ergodicity_report(cfg, s), cfg.seeds, threads)
    summary = []
    for rep in reports:
        paths.append(write_json(out / f"ergodicity_seed{rep['seed']}.json", rep))
        summary.append({
            "seed": rep["seed"],
            "verify_prop1": rep["verify_prop1"],
            "assumption_satisfied": rep["schedule"]["satisfied"],
            "final_spread": rep["spread_decay"]["spread"][-1],
            "uniform_gap": {str(p["s"]): p["uniform_gap"] for p in rep["pi_series"]},
        })
    paths.append(write_json(out / "summary.json", {"command": "ergodicity", "runs": summary}))
    return paths


# --------------------------------------------------------------------------
# optimize / compare


def run_cell(cfg: ExperimentConfig, family: str, method: str, seed: int) -> Trajectory:
    ob = cfg.data["objective"]
    box = cfg.box()
    ds = make_dataset(family, cfg.data["topology"]["n"], ob["dim"], cfg.dataset_seed(seed),
                      realizable=ob["realizable"])
    objective = aggregate(ds.objectives(), box)
    seq = MatrixSequence(cfg.topology(seed))
    return run(cfg.optimizer(method, seed), seq, objective, box)


def _cell_summary(family: str, traj: Trajectory) -> dict:
    d = {"family": family, **traj.summary()}
    fstar = traj.known_minimum
    d["known_minimum"] = fstar
    d["f_y_gap"] = None if fstar is None else d["f_y"] - fstar
    d["consensus_error_k10"] = float(traj.consensus_error[min(10, len(traj) - 1)])
    return d


def _run_grid(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[list[Path], list[dict]]:
    cells = [(f, m, s) for f in cfg.data["objective"]["families"]
             for m in cfg.data["optimizer"]["methods"] for s in cfg.seeds]
    tdir = out / "trajectories"
    tdir.mkdir(parents=True, exist_ok=True)

    def work(cell):
        f, m, s = cell
        traj = run_cell(cfg, f, m, s)
        paths = [write_trajectory_csv(traj, tdir / f"{f}_{m}_seed{s}.csv")]
        if cfg.data["optimizer"]["state_every"]:
            paths.append(write_states_jsonl(traj, tdir / f"{f}_{m}_seed{s}.states.jsonl"))
        return paths, _cell_summary(f, traj)

    results = _pmap(work, cells, threads)
    paths = [p for ps, _ in results for p in ps]
    return paths, [r for _, r in results]


def cmd_optimize(cfg: ExperimentConfig, threads: int = 1, source=None) -> list[Path]:
    out = _out_dir(cfg)
    paths = _write_config(cfg, out, source)
    grid_paths, runs = _run_grid(cfg, out, threads)
    paths += grid_paths
    paths.append(write_json(out / "summary.json", {"command": "optimize", "runs": runs}))
    return paths


def _finite_or_none(v: float) -> float | None:
    # an exactly converged run divides by zero; JSON has no infinity
    return float(v) if math.isfinite(v) else None


def compare_summary(runs: list[dict]) -> dict:
    """Per (family, method) medians of terminal metrics, ranked by terminal f at the mean."""
    groups: dict[tuple[str, str], list[dict]] = {}
    for r in runs:
        groups.setdefault((r["family"], r["method"]), []).append(r)
    table = []
    for (fam, m), rs in groups.items():
        table.append({
            "family": fam,
            "method": m,
            "seeds": [r["seed"] for r in rs],
            "median_consensus_error": float(np.median([r["consensus_error"] for r in rs])),
            "median_f_mean": float(np.median([r["f_mean"] for r in rs])),
            "median_f_y": float(np.median([r["f_y"] for r in rs])),
            "min_consensus_decrease": _finite_or_none(min(
                r["consensus_error_k10"] / r["consensus_error"] if r["consensus_error"] > 0 else math.inf
                for r in rs)),
        })
    ranking = {}
    for fam in sorted({t["family"] for t in table}):
        rows = sorted((t for t in table if t["family"] == fam),
                      key=lambda t: (not math.isfinite(t["median_f_mean"]), t["median_f_mean"]))
        ranking[fam] = [t["method"] for t in rows]
    checks = {}
    for fam in ranking:
        med = {t["method"]: t["median_consensus_error"] for t in table if t["family"] == fam}
        if "UDPSG" in med and "SPSG" in med:
            checks[fam] = {"udpsg_consensus_le_spsg": med["UDPSG"] <= med["SPSG"]}
    return {"table": table, "ranking_by_terminal_f": ranking, "expected_outcome": checks}


def cmd_compare(cfg: ExperimentConfig, threads: int = 1, source=None) -> list[Path]:
    cfg.require_methods(2)
    out = _out_dir(cfg)
    paths = _write_config(cfg, out, source)
    grid_paths, runs = _run_grid(cfg, out, threads)
    paths += grid_paths
    paths.append(write_json(out / "summary.json",
                            {"command": "compare", "runs": runs, **compare_summary(runs)}))
    return paths


# --------------------------------------------------------------------------
# output validation

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}

SCHEMAS = {
    "check": {
        "type": "object",
        "required": ["n", "stochastic", "positive_diagonal", "connectivity", "sarymsakov",
                     "scrambling", "positive_column", "min_positive_entry"],
        "properties": {
            "n": {"type": "integer", "minimum": 1},
            "stochastic": {"type": "boolean"},
            "positive_diagonal": {"type": "boolean"},
            "connectivity": {"type": ["boolean", "null"]},
            "sarymsakov": {"type": ["boolean", "null"]},
            "scrambling": {"type": ["boolean", "null"]},
            "positive_column": {"type": ["array", "null"], "items": _NUM, "minItems": 2, "maxItems": 2},
            "min_positive_entry": _NUM_OR_NULL,
        },
    },
    "config": {"type": "object", "required": list(DEFAULTS)},
    "ergodicity": {
        "type": "object",
        "required": ["seed", "B", "gamma_grid", "prop1", "verify_prop1", "spread_decay",
                     "pi_series", "schedule", "assumption2"],
        "properties": {
            "verify_prop1": {"type": "boolean"},
            "gamma_grid": {"type": "array", "items": {
                "type": "object", "required": ["s", "k", "value", "tail_error", "upper"]}},
            "prop1": {"type": "array", "items": {
                "type": "object", "required": ["s", "k", "K", "deviation", "holds", "spread_at_K"]}},
            "pi_series": {"type": "array", "items": {
                "type": "object", "required": ["s", "pi_hat", "spread_at_K", "uniform_gap"]}},
        },
    },
    "summary": {
        "type": "object",
        "required": ["command", "runs"],
        "properties": {"command": {"enum": ["ergodicity", "optimize", "compare"]},
                       "runs": {"type": "array"}},
    },
}


def _check_csv(path: Path):
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split(",")) != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: bad header")
    for i, ln in enumerate(lines[1:]):
        f = ln.split(",")
        if len(f) != len(TRAJECTORY_HEADER) or int(f[0]) != i:
            raise ValueError(f"{path}: malformed row {i + 2}")
        for x in f[1:4]:
            float(x)
        Method(f[4])
        int(f[5])


def validate_outputs(paths) -> list[str]:
    """Re-read every emitted file; return a list of problems (empty when all good)."""
    problems = []
    for p in map(Path, paths):
        try:
            if p.suffix == ".csv":
                _check_csv(p)
            elif p.name.endswith(".jsonl"):
                for ln in p.read_text(encoding="utf-8").splitlines():
                    rec = json.loads(ln)
                    if not {"k", "x", "y"} <= set(rec):
                        raise ValueError(f"{p}: state record lacks k, x or y")
            elif p.suffix == ".json":
                obj = json.loads(p.read_text(encoding="utf-8"))
                if p.name == "check.json":
                    jsonschema.validate(obj, SCHEMAS["check"])
                elif p.name == "config.json":
                    jsonschema.validate(obj, SCHEMAS["config"])
                    ExperimentConfig.from_dict(obj)
                elif p.name.startswith("ergodicity_seed"):
                    jsonschema.validate(obj, SCHEMAS["ergodicity"])
                elif p.name == "summary.json":
                    jsonschema.validate(obj, SCHEMAS["summary"])
        except (ValueError, KeyError, jsonschema.ValidationError, ConfigError) as exc:
            problems.append(f"{p}: {exc}")
    return problems


# --------------------------------------------------------------------------
# command line


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--threads", type=int, default=1, help="parallel cells (default 1)")
    common.add_argument("--validate", action="store_true", help="re-read and check every emitted file")
    topo = argparse.ArgumentParser(add_help=False)
    topo.add_argument("--topology-seed", type=int, help="run a single seed")
    topo.add_argument("--n", type=int, help="number of agents")
    topo.add_argument("--mode", choices=[m.value for m in Mode])
    topo.add_argument("--extra-edge-prob", type=float)
    topo.add_argument("--epsilon-exponent", type=float)

    p = argparse.ArgumentParser(prog="ipsm", description="Stochastic-matrix products and decentralized subgradient experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", parents=[common], help="classify a matrix file (CSV or JSON)")
    c.add_argument("matrix", type=Path)
    sub.add_parser("ergodicity", parents=[common, topo], help="product convergence reports")
    sub.add_parser("optimize", parents=[common, topo], help="run the configured methods")
    sub.add_parser("compare", parents=[common, topo], help="run two or more methods on paired seeds")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "check":
            report, paths = cmd_check(args.matrix, args.out)
            print(json.dumps(report, indent=1, sort_keys=True))
        else:
            cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict()
            cfg = apply_overrides(cfg, args)
            cmd = {"ergodicity": cmd_ergodicity, "optimize": cmd_optimize, "compare": cmd_compare}[args.command]
            paths = cmd(cfg, threads=args.threads, source=args.config)
            for path in paths:
                print(path)
    except (ConfigError, ParseError, NonSquare, UnknownFamily, DimensionMismatch, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AssumptionViolated, ZeroDiagonal, InfeasibleIterate, NonConvergent, GenerationFailure) as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    if args.validate:
        problems = validate_outputs(paths)
        for msg in problems:
            print(f"invalid output: {msg}", file=sys.stderr)
        if problems:
            return EXIT_INVALID_OUTPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
