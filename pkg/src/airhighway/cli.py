"""Command-line entry point: ``airhighway {highways place | brs compute | sim run | report}``.

Exit codes: 0 on success, 1 on a domain or I/O error, 2 on a usage error.
Flags override values from ``--config``; the resolved settings are printed
and saved next to the outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .costmap import load_costmap
from .eikonal import extract_path, path_cost, solve_fmm
from .errors import AirHighwayError, ConfigInvalid, GridMismatch
from .files import atomic_write_bytes, atomic_write_text
from .grid import Grid
from .highways import DEFAULT_THETA_C, build_graph, cluster_paths, polyline_deviation, sparsify_by_heading
from .reachability import (BoxTarget, DynamicsSpec, SafetyTarget, decompose_solve_single4d, implicit_surface,
                           save_brs, solve_hji)

log = logging.getLogger("airhighway")

DEFAULTS = {
    "highways place": dict(meta=None, theta_c=math.degrees(DEFAULT_THETA_C), cluster_radius=None, v_hw=10.0,
                           out="out"),
    "brs compute": dict(store_interval=None, u_max=None, u_max_j=None, v_max=None, decompose=False, out="brs.hjbs"),
    "sim run": dict(graph=None, duration=None, dt=None, out="out"),
    "report": dict(out=None),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _pair_list(text):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or len(vals) % 2:
        raise argparse.ArgumentTypeError(f"expected x,y pairs, got {text!r}")
    return [vals[k:k + 2] for k in range(0, len(vals), 2)]


def _point(text):
    pts = _pair_list(text)
    if len(pts) != 1:
        raise argparse.ArgumentTypeError(f"expected a single x,y point, got {text!r}")
    return pts[0]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default option values")
    common.add_argument("--out", default=None, help="output directory (file for brs compute)")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    p = _Parser(prog="airhighway", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    groups = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    hw = groups.add_parser("highways").add_subparsers(dest="command", required=True, parser_class=_Parser)
    place = hw.add_parser("place", parents=[common], help="place highways over a cost map")
    place.add_argument("--costmap", required=True, help="CSV raster; the JSON sidecar defaults to the same stem")
    place.add_argument("--meta", default=None, help="JSON sidecar of the cost map")
    place.add_argument("--origin", required=True, type=_point)
    place.add_argument("--dest", required=True, type=_pair_list, help="x,y[,x,y...]")
    place.add_argument("--theta-c", type=float, default=None, help="heading threshold in degrees")
    place.add_argument("--cluster-radius", type=float, default=None, help="meters (default: 2 grid spacings)")
    place.add_argument("--v-hw", type=float, default=None)

    brs = groups.add_parser("brs").add_subparsers(dest="command", required=True, parser_class=_Parser)
    comp = brs.add_parser("compute", parents=[common], help="compute a backward reachable set")
    comp.add_argument("--dynamics", required=True, choices=["double2d", "single4d", "relative4d", "augrel6d"])
    comp.add_argument("--target", required=True, help="JSON target spec with grid")
    comp.add_argument("--horizon", required=True, type=float)
    comp.add_argument("--store-interval", type=float, default=None)
    comp.add_argument("--u-max", type=float, default=None)
    comp.add_argument("--u-max-j", type=float, default=None)
    comp.add_argument("--v-max", type=float, default=None)
    comp.add_argument("--decompose", action="store_true", default=None)

    sim = groups.add_parser("sim").add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sim.add_parser("run", parents=[common], help="run a scenario")
    run.add_argument("--scenario", required=True, help="scenario JSON file or bundled name")
    run.add_argument("--graph", default=None, help="highway graph JSON replacing the scenario's highways")
    run.add_argument("--duration", type=float, default=None)
    run.add_argument("--dt", type=float, default=None)

    rep = groups.add_parser("report", parents=[common], help="summarize a sim output directory")
    rep.add_argument("run_dir")
    return p


def _resolve(args, name):
    """Merge defaults < config file < explicit flags."""
    settings = dict(DEFAULTS[name])
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigInvalid("config must be a JSON object")
        section = doc.get(name.replace(" ", "_"), doc)
        for k, v in section.items():
            if isinstance(v, dict):
                continue
            settings[k.replace("-", "_")] = v
    for k, v in vars(args).items():
        if k in ("group", "command", "config", "log_level"):
            continue
        if v is not None:
            settings[k] = v
    return settings


def _echo(settings, path):
    text = json.dumps(settings, indent=2, sort_keys=True, default=str) + "\n"
    sys.stdout.write(text)
    atomic_write_text(path, text)


# ---------------------------------------------------------------- commands


def cmd_highways_place(s):
    raster = Path(s["costmap"])
    meta = Path(s["meta"]) if s.get("meta") else raster.with_suffix(".json")
    cmap = load_costmap(raster, meta)
    out = Path(s["out"])
    origin = np.asarray(s["origin"], dtype=float)
    sol = solve_fmm(cmap, origin)
    radius = s["cluster_radius"]
    if radius is None:
        radius = 2 * max(cmap.grid.spacing)
    theta = math.radians(float(s["theta_c"]))
    paths, wps = [], []
    for k, dest in enumerate(s["dest"]):
        path = extract_path(sol, dest)
        paths.append(path)
        wps.append(sparsify_by_heading(path, theta, path_index=k))
    clustered = cluster_paths(wps, radius)
    graph = build_graph(clustered, float(s["v_hw"]))
    out.mkdir(parents=True, exist_ok=True)
    graph.save(out / "graph.json")
    summary = []
    for k, (dest, path) in enumerate(zip(s["dest"], paths)):
        summary.append(dict(dest=list(map(float, dest)), value=sol.value_at(dest), path_cost=path_cost(cmap, path),
                            length=path.length(), waypoints=[list(p) for p in clustered[k]],
                            deviation=polyline_deviation(path.points, clustered[k]),
                            points=np.round(path.points, 6).tolist()))
    atomic_write_text(out / "paths.json", json.dumps(summary, indent=1) + "\n")
    atomic_write_bytes(out / "value.hjvf", sol.to_field().to_bytes())
    log.info("placed %d highways for %d destinations", len(graph.edges), len(paths))
    return [out / "graph.json", out / "paths.json", out / "value.hjvf"]


def _target_from_spec(spec):
    kind = spec.get("type")
    if kind == "box":
        target = BoxTarget(tuple(spec["center"]), tuple(spec["radii"]))
    elif kind == "safety":
        target = SafetyTarget(float(spec["d"]), float(spec.get("v_max", math.inf)))
    else:
        raise ConfigInvalid(f"unknown target type {kind!r}")
    return target


def cmd_brs_compute(s):
    spec = json.loads(Path(s["target"]).read_text())
    if not isinstance(spec, dict) or "grid" not in spec:
        raise ConfigInvalid("target spec needs a grid {mins, maxs, counts}")
    g = spec["grid"]
    grid = Grid(tuple(g["mins"]), tuple(g["maxs"]), tuple(g["counts"]))
    pick = lambda key, spec_key, default: s[key] if s.get(key) is not None else spec.get(spec_key, default)
    dyn = DynamicsSpec(s["dynamics"], float(pick("u_max", "u_max_i", 3.0)), float(pick("u_max_j", "u_max_j", 0.0)),
                       float(pick("v_max", "v_max", math.inf)))
    if grid.ndim != dyn.ndim:
        raise GridMismatch(f"{dyn.kind} needs a {dyn.ndim}-D grid, target grid has {grid.ndim} axes")
    target = _target_from_spec(spec)
    T = float(s["horizon"])
    if not T > 0:
        raise ConfigInvalid("horizon must be positive")
    store = s.get("store_interval") or spec.get("store_interval")
    if s.get("decompose") or spec.get("decompose"):
        brs = decompose_solve_single4d(dyn, target, T, store, grid=grid)
    else:
        l = implicit_surface(target, grid, dyn)
        brs = solve_hji(dyn, l, T, store, mode=spec.get("mode"),
                         experimental=bool(spec.get("experimental", False)))
    save_brs(s["out"], brs)
    return [Path(s["out"])]


def cmd_sim_run(s):
    from .sim import ScenarioConfig, emit_outputs, load_scenario_doc, run_scenario

    doc, base = load_scenario_doc(s["scenario"])
    if s.get("graph"):
        doc.pop("highways", None)
        doc["graph"] = os.path.abspath(s["graph"])
    for key in ("duration", "dt"):
        if s.get(key) is not None:
            doc.setdefault("params", {})[key] = float(s[key])
    cfg = ScenarioConfig.from_dict(doc, base_dir=base)
    result = run_scenario(cfg)
    out = Path(s["out"])
    paths = emit_outputs(result, out)
    atomic_write_text(out / "scenario.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return [Path(p) for p in paths] + [out / "scenario.json"]


def summarize_run(run_dir):
    run_dir = Path(run_dir)
    events = [json.loads(line) for line in (run_dir / "events.jsonl").read_text().splitlines() if line.strip()]
    sep = json.loads((run_dir / "separation.json").read_text())
    counts = {}
    for e in events:
        counts[e["kind"]] = counts.get(e["kind"], 0) + 1
    with open(run_dir / "trajectories.csv") as fh:
        rows = sum(1 for _ in fh) - 1
    closest = min(sep["pairs"], key=lambda p: p["min_sep"]) if sep["pairs"] else None
    return dict(rows=rows, events=counts, violations=len(sep["violations"]), closest_pair=closest,
                mode_changes=[e for e in events if e["kind"] == "ModeChange"])


def cmd_report(s):
    summary = summarize_run(s["run_dir"])
    out = Path(s["out"] or s["run_dir"])
    atomic_write_text(out / "report.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(json.dumps({k: v for k, v in summary.items() if k != "mode_changes"}, sort_keys=True) + "\n")
    return [out / "report.json"]


COMMANDS = {
    "highways place": cmd_highways_place,
    "brs compute": cmd_brs_compute,
    "sim run": cmd_sim_run,
    "report": cmd_report,
}


def _config_path(name, s):
    if name == "brs compute":
        return Path(str(s["out"]) + ".config.json")
    return Path(s["out"] or s.get("run_dir")) / "resolved_config.json"


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    name = args.group if args.group == "report" else f"{args.group} {args.command}"
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = _resolve(args, name)
        settings["command"] = name
        _echo(settings, _config_path(name, settings))
        written = COMMANDS[name](settings)
    except (AirHighwayError, OSError, KeyError, ValueError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1
    for path in written:
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
