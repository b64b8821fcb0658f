import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import pytest

from airhighway.cli import main
from airhighway.highways import HighwayGraph

DATA = Path(str(resources.files("airhighway").joinpath("data")))


def _place(out, mapname="uniform_map", dest="1800,1800,1800,200", extra=()):
    return main(["highways", "place", "--costmap", str(DATA / f"{mapname}.csv"), "--origin", "200,400",
                 "--dest", dest, "--out", str(out), *extra])


def test_highways_place_uniform(tmp_path, capsys):
    assert _place(tmp_path / "a") == 0
    g = HighwayGraph.load(tmp_path / "a" / "graph.json")
    assert len(g.sequences) == 2
    assert g.check_chain(0, (200, 400), (1800, 1800), tol=1e-9)
    resolved = json.loads((tmp_path / "a" / "resolved_config.json").read_text())
    assert resolved["origin"] == [200.0, 400.0] and resolved["command"] == "highways place"
    assert json.loads(capsys.readouterr().out) == resolved
    # idempotent
    assert _place(tmp_path / "b") == 0
    for name in ("graph.json", "paths.json", "value.hjvf"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"highways_place": {"theta_c": 30.0, "v_hw": 7.0}}))
    assert _place(tmp_path / "o", extra=("--config", str(cfg), "--theta-c", "5")) == 0
    resolved = json.loads((tmp_path / "o" / "resolved_config.json").read_text())
    assert resolved["theta_c"] == 5.0 and resolved["v_hw"] == 7.0
    g = HighwayGraph.load(tmp_path / "o" / "graph.json")
    assert all(e[2] == 7.0 for e in g.edges)


def test_usage_errors(tmp_path, capsys):
    assert _place(tmp_path, extra=("--bogus",)) == 2
    assert "usage" in capsys.readouterr().err
    assert main(["sim"]) == 2
    assert main(["highways", "place", "--costmap", "x.csv", "--origin", "1,2,3", "--dest", "1,1"]) == 2


def test_domain_errors(tmp_path, capsys):
    assert _place(tmp_path, mapname="missing") == 1
    assert "error:" in capsys.readouterr().err
    assert main(["sim", "run", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "r")]) == 1


def _target(tmp_path, ndim, **kw):
    spec = dict(type="box", center=[0.0] * ndim, radii=[0.5] * ndim,
                grid=dict(mins=[-2.0] * ndim, maxs=[2.0] * ndim, counts=[21] * ndim), **kw)
    path = tmp_path / f"t{ndim}.json"
    path.write_text(json.dumps(spec))
    return path


def test_brs_compute(tmp_path, capsys):
    from airhighway.reachability import load_brs

    out = tmp_path / "d2.hjbs"
    assert main(["brs", "compute", "--dynamics", "double2d", "--target", str(_target(tmp_path, 2)),
                 "--horizon", "0.5", "--u-max", "1", "--out", str(out)]) == 0
    brs = load_brs(out)
    assert brs.horizon == 0.5 and brs.value_at(-0.5, (0, 0)) <= 0
    assert Path(str(out) + ".config.json").exists()
    assert main(["brs", "compute", "--dynamics", "single4d", "--target", str(_target(tmp_path, 2)),
                 "--horizon", "0.5", "--out", str(tmp_path / "x.hjbs")]) == 1
    assert "GridMismatch" in capsys.readouterr().err


def test_place_then_simulate(tmp_path):
    """Placement on the synthetic map feeds a merge-and-join scenario end to end."""
    assert _place(tmp_path / "hw", mapname="synthetic_map", dest="1800,400,1800,1700") == 0
    run = tmp_path / "run"
    assert main(["sim", "run", "--scenario", str(DATA / "graph_merge.json"), "--graph",
                 str(tmp_path / "hw" / "graph.json"), "--out", str(run)]) == 0
    for name in ("trajectories.csv", "events.jsonl", "separation.json", "polylines.json", "scenario.json",
                 "resolved_config.json"):
        assert (run / name).exists()
    assert main(["report", str(run)]) == 0
    report = json.loads((run / "report.json").read_text())
    assert report["violations"] == 0
    assert report["events"].get("ArrivedAtTarget", 0) == 2


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "airhighway", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.1.0"
    res = subprocess.run([sys.executable, "-m", "airhighway", "brs", "compute"], capture_output=True, text=True)
    assert res.returncode == 2
