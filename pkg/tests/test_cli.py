import json
from pathlib import Path

import pytest

from stableop.cli import (EXIT_CHECK_FAILED, EXIT_OK, EXIT_SCHEMA,
                          SchemaError, _config_hash, load_config, main,
                          validate_config)

ANCHOR_CFG = Path(__file__).resolve().parents[1] / "configs" / "anchor_psi.json"


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_anchor_config_passes(tmp_path, capsys):
    rc = main(["operator", "eval", "--config", str(ANCHOR_CFG),
               "--out", str(tmp_path / "out")])
    assert rc == EXIT_OK
    assert (tmp_path / "out" / "anchor.csv").exists()
    rep = json.loads((tmp_path / "out" / "report_anchor_psi.json").read_text())
    assert rep["checks"]["anchor"]["status"] == "pass"


def test_bad_config_schema_exit(tmp_path):
    bad = _write(tmp_path, "bad.json", {"operator": {"s": 1.5},
                                        "checks": ["anchor"]})
    assert main(["run", "--config", bad, "--out", str(tmp_path / "o")]) \
        == EXIT_SCHEMA
    unk = _write(tmp_path, "unk.json", {"checks": ["astrology"]})
    assert main(["run", "--config", unk, "--out", str(tmp_path / "o")]) \
        == EXIT_SCHEMA
    assert main(["run", "--config", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "o")]) == EXIT_SCHEMA


def test_missing_config_flag(tmp_path):
    assert main(["solve", "--out", str(tmp_path / "o")]) == EXIT_SCHEMA


def test_tolerance_override_can_fail(tmp_path):
    # an absurdly tight tolerance flips the anchor check to a failure
    rc = main(["operator", "eval", "--config", str(ANCHOR_CFG),
               "--out", str(tmp_path / "o"),
               "--tolerance", "anchor_rel=1e-15"])
    assert rc == EXIT_CHECK_FAILED


def test_validate_config_rejects_bad_measure():
    with pytest.raises(SchemaError):
        validate_config({"operator": {"measure": {"variant": "nope"}}})


def test_config_hash_stable_and_order_free():
    a = {"x": 1, "y": [1, 2]}
    b = {"y": [1, 2], "x": 1}
    assert _config_hash(a) == _config_hash(b)
    assert len(_config_hash(a)) == 16


def test_load_config_overrides(tmp_path):
    p = _write(tmp_path, "c.json", {"operator": {"s": 0.5}, "checks": []})

    class Args:
        s = 0.7
        h = 0.01
        tolerance = ["rate_window=0.1"]

    cfg = load_config(p, Args())
    assert cfg["operator"]["s"] == 0.7
    assert cfg["h"] == 0.01
    assert cfg["tolerances"]["rate_window"] == 0.1


def test_solve_run_and_determinism(tmp_path):
    cfg = _write(tmp_path, "solve.json", {
        "name": "mini",
        "operator": {"s": 0.5,
                     "measure": {"variant": "uniform", "d": 1, "mass": 1.0}},
        "domain": {"type": "interval"},
        "f": 1.0,
        "h": 2.0 / 128,
        "checks": ["solve", "rate", "hopf"],
    })
    o1, o2 = str(tmp_path / "o1"), str(tmp_path / "o2")
    assert main(["run", "--config", cfg, "--out", o1]) == EXIT_OK
    assert main(["run", "--config", cfg, "--out", o2]) == EXIT_OK
    for name in ("solution.csv", "rate.csv", "hopf.csv"):
        b1 = (Path(o1) / name).read_bytes()
        assert b1 == (Path(o2) / name).read_bytes()
    assert (Path(o1) / "solution.svg").exists()


def test_report_aggregation(tmp_path):
    cfg = _write(tmp_path, "solve.json", {
        "name": "mini",
        "operator": {"s": 0.5,
                     "measure": {"variant": "uniform", "d": 1, "mass": 1.0}},
        "domain": {"type": "interval"},
        "h": 2.0 / 128,
        "checks": ["rate"],
    })
    out = str(tmp_path / "o")
    assert main(["run", "--config", cfg, "--out", out]) == EXIT_OK
    assert main(["report", "--out", out]) == EXIT_OK
    lines = (Path(out) / "summary.csv").read_text().strip().splitlines()
    assert lines[0] == "run,check,status,wall_time"
    assert any(row.startswith("mini,rate,pass") for row in lines[1:])
