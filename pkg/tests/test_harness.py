from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from ipsm.errors import ConfigError
from ipsm.harness import (
    DEFAULTS,
    EXIT_ASSUMPTION,
    EXIT_CONFIG,
    EXIT_INVALID_OUTPUT,
    EXIT_OK,
    ExperimentConfig,
    classify,
    compare_summary,
    main,
    validate_outputs,
)
from ipsm.optimizer import read_trajectory_csv

SMALL = {
    "seeds": [0, 1],
    "optimizer": {"iterations": 200},
    "ergodicity": {"k": [30], "K": [150], "horizon": 150, "spread_blocks": 20,
                   "pi_points": [10, 100]},
}


def write_cfg(tmp_path: Path, d: dict, name="cfg.json") -> Path:
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# ---- config


def test_defaults_materialized():
    cfg = ExperimentConfig.from_dict()
    assert cfg.to_dict() == DEFAULTS
    assert cfg.topology(3).seed == 3 and cfg.topology(3).n == 6


@pytest.mark.parametrize("bad,msg", [
    ({"bogus": 1}, "bogus"),
    ({"topology": {"n": 1}}, "topology"),
    ({"optimizer": {"methods": ["ADAM"]}}, "ADAM"),
    ({"optimizer": {"methods": []}}, "methods"),
    ({"optimizer": {"iterations": -1}}, "iterations"),
    ({"objective": {"families": ["hinge"]}}, "hinge"),
    ({"objective": {"families": ["invex"], "dim": 3}}, "dim"),
    ({"objective": {"lower": 1, "upper": 0}}, "box"),
    ({"ergodicity": {"horizon": 10}}, "B=15 for n=6"),
    ({"ergodicity": {"k": [5], "K": [3]}}, "s <= k <= K"),
    ({"seeds": [-1]}, "seeds"),
    ({"ergodicity": {"N": 1}}, "N"),
])
def test_config_rejections(bad, msg):
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict(bad)


def test_horizon_message_names_B():
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict({"ergodicity": {"horizon": 14}})
    assert "ergodicity.horizon 14 is below the communication interval B=15 for n=6" in str(exc.value)


# ---- check


def test_check_identity(tmp_path):
    p = tmp_path / "i.csv"
    p.write_text("1,0,0\n0,1,0\n0,0,1\n")
    rep = classify(np.eye(3))
    assert rep["stochastic"] and rep["positive_diagonal"]
    assert not rep["connectivity"] and not rep["sarymsakov"] and not rep["scrambling"]
    assert rep["positive_column"] is None and rep["min_positive_entry"] == 1.0
    assert main(["check", str(p), "--out", str(tmp_path / "o"), "--validate"]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "check.json").read_text()) == rep


def test_check_half(capsys, tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("0.5,0.5\n0.5,0.5\n")
    assert main(["check", str(p)]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["connectivity"] and rep["sarymsakov"] and rep["scrambling"]
    # 0-based column index
    assert rep["positive_column"] == [0, 0.5]


def test_check_ragged(capsys, tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("0.5,0.5\n1\n")
    assert main(["check", str(p)]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_check_missing_file(tmp_path):
    assert main(["check", str(tmp_path / "nope.csv")]) == EXIT_CONFIG


# ---- ergodicity


def test_ergodicity_reports(tmp_path):
    out = tmp_path / "e"
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["ergodicity", "--config", str(cfg), "--out", str(out), "--validate"]) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["config.json", "config.source.json", "ergodicity_seed0.json",
                     "ergodicity_seed1.json", "summary.json"]
    assert (out / "config.source.json").read_bytes() == cfg.read_bytes()
    rep = json.loads((out / "ergodicity_seed0.json").read_text())
    assert rep["verify_prop1"] is True and rep["B"] == 15
    assert [p["s"] for p in rep["pi_series"]] == [10, 100]


def test_ergodicity_identity_mode_reports_uniform_gap(tmp_path):
    d = {**SMALL, "seeds": [0], "topology": {"mode": "identity_approaching"},
         "ergodicity": {**SMALL["ergodicity"], "pi_points": [100, 1000, 10000]}}
    out = tmp_path / "e"
    assert main(["ergodicity", "--config", str(write_cfg(tmp_path, d)), "--out", str(out)]) == EXIT_OK
    summ = json.loads((out / "summary.json").read_text())
    assert set(summ["runs"][0]["uniform_gap"]) == {"100", "1000", "10000"}


def test_ergodicity_strict_exit_code(tmp_path):
    d = {**SMALL, "seeds": [0], "ergodicity": {**SMALL["ergodicity"], "strict": True}}
    rc = main(["ergodicity", "--config", str(write_cfg(tmp_path, d)), "--out", str(tmp_path / "e")])
    assert rc == EXIT_ASSUMPTION


def test_horizon_below_B_exit(capsys, tmp_path):
    d = {"ergodicity": {"horizon": 10}}
    rc = main(["ergodicity", "--config", str(write_cfg(tmp_path, d)), "--out", str(tmp_path / "e")])
    assert rc == EXIT_CONFIG
    assert "B=15 for n=6" in capsys.readouterr().err


def test_no_output_directory():
    assert main(["optimize"]) == EXIT_CONFIG


# ---- optimize / compare


def test_optimize_convex_trio(tmp_path):
    d = {"seeds": [0], "optimizer": {"iterations": 2000},
         "objective": {"families": ["squared_error", "softmax", "absolute_error"]}}
    out = tmp_path / "o"
    assert main(["optimize", "--config", str(write_cfg(tmp_path, d)), "--out", str(out),
                 "--validate", "--threads", "3"]) == EXIT_OK
    csvs = sorted((out / "trajectories").glob("*.csv"))
    assert len(csvs) == 3
    for p in csvs:
        t = read_trajectory_csv(p)
        assert len(t["k"]) == 2001
        assert t["consensus_error"][-1] <= t["consensus_error"][10] / 10  # softmax pins all agents to a corner
    summ = json.loads((out / "summary.json").read_text())
    assert {r["family"] for r in summ["runs"]} == {"squared_error", "softmax", "absolute_error"}


def test_optimize_zero_iterations(tmp_path):
    d = {"seeds": [0], "optimizer": {"iterations": 0, "state_every": 1}}
    out = tmp_path / "o"
    assert main(["optimize", "--config", str(write_cfg(tmp_path, d)), "--out", str(out), "--validate"]) == 0
    lines = (out / "trajectories" / "squared_error_UDPSG_seed0.csv").read_text().splitlines()
    assert len(lines) == 2
    assert len((out / "trajectories" / "squared_error_UDPSG_seed0.states.jsonl").read_text().splitlines()) == 1


def test_compare_file_count_contract(tmp_path):
    d = {"seeds": list(range(10)),
         "optimizer": {"methods": ["UDPSG", "UDSG", "SDSG", "SPSG"], "iterations": 50}}
    out = tmp_path / "c"
    assert main(["compare", "--config", str(write_cfg(tmp_path, d)), "--out", str(out),
                 "--threads", "4", "--validate"]) == EXIT_OK
    assert len(list((out / "trajectories").glob("*.csv"))) == 40
    summ = json.loads((out / "summary.json").read_text())
    assert set(summ["ranking_by_terminal_f"]["squared_error"]) == {"UDPSG", "UDSG", "SDSG", "SPSG"}
    assert "udpsg_consensus_le_spsg" in summ["expected_outcome"]["squared_error"]


def test_compare_single_method_rejected(tmp_path, capsys):
    assert main(["compare", "--out", str(tmp_path / "c")]) == EXIT_CONFIG
    assert "at least 2 methods" in capsys.readouterr().err


def test_compare_summary_medians():
    runs = [
        {"family": "f", "method": m, "seed": s, "consensus_error": c, "f_mean": c, "f_y": c,
         "consensus_error_k10": 1.0}
        for m, cs in (("UDPSG", [1e-3, 2e-3, 3e-3]), ("SPSG", [1e-4, 5e-4, 9e-3]))
        for s, c in enumerate(cs)
    ]
    out = compare_summary(runs)
    med = {t["method"]: t["median_consensus_error"] for t in out["table"]}
    assert med == {"UDPSG": 2e-3, "SPSG": 5e-4}
    assert out["ranking_by_terminal_f"]["f"] == ["SPSG", "UDPSG"]
    assert out["expected_outcome"]["f"]["udpsg_consensus_le_spsg"] is False


def test_overrides(tmp_path):
    out = tmp_path / "o"
    rc = main(["optimize", "--out", str(out), "--n", "4", "--topology-seed", "7",
               "--mode", "identity_approaching"])
    assert rc == EXIT_OK
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["topology"]["n"] == 4 and cfg["seeds"] == [7]
    assert (out / "trajectories" / "squared_error_UDPSG_seed7.csv").exists()


def test_validate_flags_corrupt_files(tmp_path):
    out = tmp_path / "o"
    main(["optimize", "--out", str(out), "--topology-seed", "0"])
    csv = out / "trajectories" / "squared_error_UDPSG_seed0.csv"
    csv.write_text("k,wrong\n0,1\n")
    (out / "summary.json").write_text(json.dumps({"command": "nope", "runs": []}))
    problems = validate_outputs([csv, out / "summary.json", out / "config.json"])
    assert len(problems) == 2


def test_bad_threads():
    assert main(["optimize", "--threads", "0"]) == EXIT_CONFIG


# ---- determinism


def test_reruns_are_byte_identical(tmp_path):
    d = {**SMALL, "optimizer": {"methods": ["UDPSG", "SPSG"], "iterations": 300, "state_every": 50},
         "objective": {"families": ["squared_error", "invex"]}}
    cfg = write_cfg(tmp_path, d)
    trees = []
    for run in ("a", "b"):
        root = tmp_path / run
        for cmd in ("ergodicity", "optimize", "compare"):
            assert main([cmd, "--config", str(cfg), "--out", str(root / cmd), "--threads", "2"]) == 0
        trees.append(tree_bytes(root))
    assert trees[0].keys() == trees[1].keys() and len(trees[0]) > 10
    for name in trees[0]:
        assert trees[0][name] == trees[1][name], name


def test_diverged_runs_serialize_as_strict_json(tmp_path):
    d = {"seeds": [0], "optimizer": {"methods": ["UDSG", "UDPSG"], "iterations": 500},
         "objective": {"families": ["invex"]}}
    out = tmp_path / "c"
    assert main(["compare", "--config", str(write_cfg(tmp_path, d)), "--out", str(out), "--validate"]) == 0
    text = (out / "summary.json").read_text()
    assert "NaN" not in text and "Infinity" not in text
    runs = {r["method"]: r for r in json.loads(text)["runs"]}
    assert runs["UDSG"]["diverged"] and not runs["UDPSG"]["diverged"]
    assert json.loads(text)["ranking_by_terminal_f"]["invex"][-1] == "UDSG"
