"""Deterministic fixed-step scenario engine for platoons on air highways."""

from __future__ import annotations

import copy
import json
import logging
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .controllers import (ControllerContext, Phase, follower_control, join_platoon, merge_to_highway,
                          mpc_track_highway, safety_supervisor)
from .errors import BRSMissing, ConfigInvalid, DimensionMismatch
from .files import atomic_write_text
from .grid import Grid
from .highways import Highway, HighwayGraph
from .reachability import (BoxTarget, DynamicsSpec, SafetyTarget, decompose_solve_single4d, implicit_surface,
                           load_brs, solve_hji)
from .vehicles import Event, Follower, Free, Leader, Vehicle, VehicleState, World, safety_check_set, step_dynamics

log = logging.getLogger(__name__)

DEFAULT_PARAMS = dict(
    dt=0.05, duration=40.0, u_max=3.0, v_max=20.0, d=5.0, d_sep=10.0, t_d=2.0, v_hw=10.0,
    detection_radius=30.0,
)
DEFAULT_CONTROLLER = dict(
    T=4.0, k_p=1.0, k_v=2.0, k_pursuit=1.0, pursuit_speed=10.0, join_pursuit_speed=4.0, hold_gain=1.0,
    safety_margin=0.5, mpc=dict(horizon=4.0, dt=0.1, iters=200),
)
DEFAULT_BRS = dict(
    goal=dict(radii=[1.0, 0.5, 1.0, 0.5], counts=201, store_interval=0.1),
    safety=dict(bounds=[30.0, 30.0, 20.0, 20.0], counts=41, store_interval=0.5),
)
BUNDLED = ("form_platoon", "intruder", "change_highways")


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


# ---------------------------------------------------------------- config


@dataclass
class ScenarioConfig:
    """Vehicle roster, highways, parameters and BRS settings of one run.

    ``vehicles`` entries hold ``id``, ``p``, ``v`` and a ``task``: ``merge``
    (enter highway ``highway`` at parameter ``entry``), ``join`` (take a slot
    in the first platoon on ``highway`` once one exists), ``platoon`` (start
    as a member of a listed platoon) or ``scripted`` (constant control
    ``u``, no controllers). ``maneuvers`` are timed platoon changes.
    """

    name: str
    highways: list
    vehicles: list
    platoons: list = field(default_factory=list)
    maneuvers: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    controller: dict = field(default_factory=dict)
    brs: dict = field(default_factory=dict)
    seed: int = 0
    base_dir: str = "."

    def __post_init__(self):
        self.params = _merge(DEFAULT_PARAMS, self.params)
        self.controller = _merge(DEFAULT_CONTROLLER, self.controller)
        self.brs = _merge(DEFAULT_BRS, self.brs)
        self.validate()

    def validate(self):
        p = self.params
        for key in ("dt", "duration", "u_max", "v_max", "d", "d_sep", "t_d", "v_hw"):
            if not (isinstance(p[key], (int, float)) and math.isfinite(p[key]) and p[key] > 0):
                raise ConfigInvalid(f"params.{key} must be a positive number")
        if not self.highways:
            raise ConfigInvalid("at least one highway is required")
        ids = [v.get("id") for v in self.vehicles]
        if len(set(ids)) != len(ids) or any(not isinstance(i, int) for i in ids):
            raise ConfigInvalid("vehicle ids must be unique integers")
        for v in self.vehicles:
            if v.get("task") not in ("merge", "join", "platoon", "scripted"):
                raise ConfigInvalid(f"vehicle {v.get('id')}: unknown task {v.get('task')!r}")
            for key in ("p", "v"):
                if len(v.get(key, ())) != 2:
                    raise ConfigInvalid(f"vehicle {v['id']}: {key} needs two components")
            if v["task"] in ("merge", "join") and not 0 <= v.get("highway", 0) < len(self.highways):
                raise ConfigInvalid(f"vehicle {v['id']}: unknown highway")
        placed = [m for pl in self.platoons for m in pl["members"]]
        if len(set(placed)) != len(placed) or not set(placed) <= set(ids):
            raise ConfigInvalid("platoon members must be distinct known vehicles")
        for pl in self.platoons:
            if not 0 <= pl.get("highway", -1) < len(self.highways):
                raise ConfigInvalid("platoon references an unknown highway")
        for m in self.maneuvers:
            if m.get("action") != "change_platoon" or m.get("vehicle") not in ids or m.get("to_leader") not in ids:
                raise ConfigInvalid(f"bad maneuver {m}")
        if self.brs["goal"].get("file") is None and len(self.brs["goal"]["radii"]) != 4:
            raise ConfigInvalid("brs.goal.radii needs four entries")

    def highway_objects(self):
        out = []
        for h in self.highways:
            out.append(Highway(tuple(h["start"]), tuple(h["end"]), float(h.get("speed", self.params["v_hw"]))))
        return out

    def to_dict(self):
        return dict(name=self.name, highways=self.highways, vehicles=self.vehicles, platoons=self.platoons,
                    maneuvers=self.maneuvers, params=self.params, controller=self.controller, brs=self.brs,
                    seed=self.seed)

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        if not isinstance(doc, dict):
            raise ConfigInvalid("scenario document must be an object")
        known = {"name", "highways", "graph", "vehicles", "platoons", "maneuvers", "params", "controller", "brs",
                 "seed"}
        extra = set(doc) - known
        if extra:
            raise ConfigInvalid(f"unknown scenario keys: {sorted(extra)}")
        highways = doc.get("highways")
        if highways is None and "graph" in doc:
            g = doc["graph"]
            path = g["file"] if isinstance(g, dict) else g
            graph = HighwayGraph.load(os.path.join(base_dir, path))
            highways = [dict(start=list(h.start), end=list(h.end), speed=h.speed) for h in graph.highways()]
        try:
            return cls(name=doc.get("name", "scenario"), highways=highways or [], vehicles=doc.get("vehicles", []),
                       platoons=doc.get("platoons", []), maneuvers=doc.get("maneuvers", []),
                       params=doc.get("params", {}), controller=doc.get("controller", {}), brs=doc.get("brs", {}),
                       seed=int(doc.get("seed", 0)), base_dir=base_dir)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"invalid scenario: {exc}") from exc


def load_scenario_doc(path_or_name):
    """Raw scenario document and the directory relative paths resolve against."""
    if path_or_name in BUNDLED:
        text = resources.files("airhighway").joinpath("data", f"{path_or_name}.json").read_text()
        base = str(resources.files("airhighway").joinpath("data"))
    else:
        with open(path_or_name) as f:
            text = f.read()
        base = os.path.dirname(os.path.abspath(path_or_name))
    try:
        return json.loads(text), base
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"scenario is not valid JSON: {exc}") from exc


def load_scenario(path_or_name):
    """Load a scenario file, or a bundled scenario by name."""
    doc, base = load_scenario_doc(path_or_name)
    return ScenarioConfig.from_dict(doc, base_dir=base)


# ---------------------------------------------------------------- BRS setup


@lru_cache(maxsize=8)
def _goal_brs(u_max, T, radii, counts, store_interval):
    dyn = DynamicsSpec("single4d", u_max)
    return decompose_solve_single4d(dyn, BoxTarget((0.0,) * 4, radii), T, store_interval, counts=counts)


@lru_cache(maxsize=8)
def _safety_brs(u_max, d, t_d, bounds, counts, store_interval):
    dyn = DynamicsSpec("relative4d", u_max, u_max)
    b = np.asarray(bounds, dtype=float)
    g = Grid(-b, b, (counts,) * 4)
    return solve_hji(dyn, implicit_surface(SafetyTarget(d), g, dyn), t_d, store_interval)


def _load(spec, base_dir):
    return load_brs(os.path.join(base_dir, spec["file"]))


def build_context(cfg):
    """Controller context with V_H, V_P (shared relative goal solve) and V_S for ``cfg``."""
    p, c, b = cfg.params, cfg.controller, cfg.brs
    if b["goal"].get("file"):
        goal = _load(b["goal"], cfg.base_dir)
    else:
        goal = _goal_brs(float(p["u_max"]), float(c["T"]), tuple(map(float, b["goal"]["radii"])),
                         int(b["goal"]["counts"]), float(b["goal"]["store_interval"]))
    if b["safety"].get("file"):
        safety = _load(b["safety"], cfg.base_dir)
    else:
        safety = _safety_brs(float(p["u_max"]), float(p["d"]), float(p["t_d"]),
                             tuple(map(float, b["safety"]["bounds"])), int(b["safety"]["counts"]),
                             float(b["safety"]["store_interval"]))
    if goal is None or safety is None:
        raise BRSMissing("scenario needs goal and safety BRS")
    if goal.dynamics.kind != "single4d" or safety.dynamics.kind != "relative4d":
        raise DimensionMismatch("goal BRS must be single4d and safety BRS relative4d")
    if not math.isclose(goal.dynamics.u_max_i, p["u_max"]) or not math.isclose(safety.dynamics.u_max_i, p["u_max"]):
        raise ConfigInvalid("BRS control bound does not match params.u_max")
    if safety.horizon < p["t_d"] - 1e-9 or goal.horizon < c["T"] - 1e-9:
        raise ConfigInvalid("BRS horizon shorter than the configured T or t_d")
    return ControllerContext(V_H=goal, V_P=goal, V_S=safety, T=c["T"], t_d=p["t_d"], k_p=c["k_p"], k_v=c["k_v"],
                             k_pursuit=c["k_pursuit"], pursuit_speed=c["pursuit_speed"],
                             join_pursuit_speed=c["join_pursuit_speed"], u_max=p["u_max"], v_max=p["v_max"],
                             safety_margin=c["safety_margin"], mpc=dict(c["mpc"]))


# ---------------------------------------------------------------- records


@dataclass
class SimEvent:
    t: float
    kind: str  # ModeChange, SafetyBreachStart, SafetyBreachEnd, SlotReserved, FaultDescent, ArrivedAtTarget
    data: dict

    def to_json(self):
        return json.dumps(dict(t=round(self.t, 6), kind=self.kind, **self.data), sort_keys=True)


@dataclass
class TrajectoryRecord:
    """One row per live vehicle per step: state at ``t`` and the control applied over [t, t + dt)."""

    t: np.ndarray
    vid: np.ndarray
    mode: list
    p: np.ndarray  # (rows, 2)
    v: np.ndarray
    u: np.ndarray

    def __len__(self):
        return len(self.t)

    def vehicle(self, vid):
        m = self.vid == vid
        return self.t[m], self.p[m], self.v[m]


@dataclass
class SimResult:
    config: ScenarioConfig
    trajectory: TrajectoryRecord
    events: list
    world: World
    max_concurrent_breaches: dict  # vehicle id -> largest simultaneous breach count seen

    def final_platoons(self):
        return {pid: list(pl.members) for pid, pl in sorted(self.world.platoons.items())}

    def mode_changes(self):
        return [e for e in self.events if e.kind == "ModeChange"]


# ---------------------------------------------------------------- engine


class _Engine:
    def __init__(self, cfg, ctx):
        self.cfg = cfg
        self.ctx = ctx
        p = cfg.params
        self.dt = float(p["dt"])
        self.highways = cfg.highway_objects()
        vehicles = [Vehicle(v["id"], VehicleState(v["p"], v["v"]), Free(), scripted=v["task"] == "scripted")
                    for v in cfg.vehicles]
        self.world = World(vehicles, t_d=p["t_d"], detection_radius=p["detection_radius"])
        self.spec = {v["id"]: v for v in cfg.vehicles}
        self.events = []
        self.breaches = set()
        self.max_breaches = {v["id"]: 0 for v in cfg.vehicles}
        self.maneuvers = sorted(cfg.maneuvers, key=lambda m: (m["t"], m["vehicle"]))
        self.u_prev = {v["id"]: np.zeros(2) for v in cfg.vehicles}
        self._log_pos = 0
        self.merged = set()
        self.t = 0.0
        for pl_spec in cfg.platoons:
            self._place_platoon(pl_spec)

    # -- setup and bookkeeping

    def _place_platoon(self, spec):
        w = self.world
        lead, *rest = spec["members"]
        w.merge_complete(lead, spec["highway"], spec.get("d_sep", self.cfg.params["d_sep"]))
        pid = w.platoon_of(lead).id
        for m in rest:
            w.join_complete(m, pid)
        w.log.clear()

    def emit(self, kind, **data):
        self.events.append(SimEvent(self.t, kind, data))

    def _flush_mode_log(self):
        for vid, old, new, ev in self.world.log[self._log_pos:]:
            self.emit("ModeChange", vehicle=vid, old=old, new=new, event=ev)
        self._log_pos = len(self.world.log)

    def _highway_of(self, pl):
        return self.highways[pl.highway]

    def _reserve_joiners(self):
        w = self.world
        waiting = [vid for vid, s in self.spec.items()
                   if s["task"] == "join" and isinstance(w.vehicles[vid].mode, Free) and w.vehicles[vid].live
                   and w.platoon_of(vid) is None]
        if not waiting:
            return
        by_platoon = {}
        for vid in waiting:
            pls = sorted((pl for pl in w.platoons.values() if pl.highway == self.spec[vid]["highway"]),
                         key=lambda pl: pl.id)
            if pls:
                by_platoon.setdefault(pls[0].id, []).append(vid)
        for pid, vids in sorted(by_platoon.items()):
            pl = w.platoons[pid]
            lead_p = w.vehicles[pl.leader].state.p
            for vid in sorted(vids, key=lambda v: (float(np.linalg.norm(w.vehicles[v].state.p - lead_p)), v)):
                index = w.reserve_slot(vid, pid)
                self.emit("SlotReserved", vehicle=vid, platoon=pid, index=index)

    def _run_maneuvers(self):
        w = self.world
        while self.maneuvers and self.maneuvers[0]["t"] <= self.t + 1e-9:
            m = self.maneuvers.pop(0)
            vid = m["vehicle"]
            target = w.platoon_of(m["to_leader"])
            if target is None or not w.vehicles[vid].live:
                log.warning("maneuver %s skipped: target platoon or vehicle missing", m)
                continue
            index = w.reserve_slot(vid, target.id)
            self.emit("SlotReserved", vehicle=vid, platoon=target.id, index=index)
            w.join_complete(vid, target.id, in_slot=False)
            self._flush_mode_log()

    # -- controllers

    def _mpc(self, veh, pl):
        h = self._highway_of(pl)
        c = self.ctx.mpc
        s0 = h.project(veh.state.p)
        res = mpc_track_highway(veh.state, h, s0, h.speed, c["horizon"], c["dt"], self.ctx.u_max,
                                self.ctx.v_max, c["iters"])
        return res.u[0]

    def _nominal(self, vid, applied):
        """Nominal control for ``vid``; may trigger MergeComplete / JoinComplete / arrival."""
        w = self.world
        veh = w.vehicles[vid]
        spec = self.spec[vid]
        mode = veh.mode
        if veh.scripted:
            return np.asarray(spec.get("u", (0.0, 0.0)), dtype=float)
        if isinstance(mode, Leader):
            return self._mpc(veh, w.platoons[mode.platoon])
        pl = w.platoon_of(vid)
        if pl is not None and vid in pl.joining:
            lead = w.vehicles[pl.leader]
            h = self._highway_of(pl)
            index = pl.index_of(vid)
            u, phase = join_platoon(veh.state, lead.state, index, h.direction, pl.d_sep, self.ctx)
            if phase is not Phase.ARRIVED:
                return u
            if isinstance(mode, Free):
                w.join_complete(vid, pl.id, in_slot=True)
            else:
                w.arrived(vid)
            self.emit("ArrivedAtTarget", vehicle=vid, target="slot", platoon=pl.id, index=index)
            self._flush_mode_log()
            mode = veh.mode
        if isinstance(mode, Follower):
            pl = w.platoons[mode.platoon]
            lead = w.vehicles[pl.leader]
            u_lead = applied.get(lead.id, self.u_prev[lead.id])
            return follower_control(lead.state.p, lead.state.v, u_lead, veh.state, mode.index, pl.d_sep,
                                    self._highway_of(pl).direction, self.ctx.k_p, self.ctx.k_v, self.ctx.u_max)
        if isinstance(mode, Free) and spec["task"] == "merge" and vid not in self.merged:
            h = self.highways[spec["highway"]]
            entry = h.point(float(spec.get("entry", 0.0)))
            vbar = h.speed * h.direction
            u, phase = merge_to_highway(veh.state, (entry[0], vbar[0], entry[1], vbar[1]), self.ctx)
            if phase is not Phase.ARRIVED:
                return u
            self.merged.add(vid)
            pl = w.merge_complete(vid, spec["highway"], self.cfg.params["d_sep"])
            self.emit("ArrivedAtTarget", vehicle=vid, target="highway", platoon=pl.id)
            self._flush_mode_log()
            return self._mpc(veh, pl)
        # nothing to do yet (or Faulty): hold position by damping velocity
        if isinstance(mode, Free):
            return np.clip(-self.cfg.controller["hold_gain"] * veh.state.v, -self.ctx.u_max, self.ctx.u_max)
        return np.zeros(2)

    def _order(self):
        """Leaders first so followers can feed forward the leader's applied control."""
        w = self.world
        live = sorted(w.live_ids())
        return sorted(live, key=lambda v: (not isinstance(w.vehicles[v].mode, Leader), v))

    # -- main loop

    def step(self):
        w = self.world
        self._run_maneuvers()
        self._reserve_joiners()
        Q = safety_check_set(w)
        applied = {}
        breach_now = {}
        for vid in self._order():
            veh = w.vehicles[vid]
            if not veh.live:
                continue
            u = self._nominal(vid, applied)
            if not veh.scripted and not _is_faulty(veh):
                u, breached = safety_supervisor(vid, w, self.ctx, u, Q)
                breach_now[vid] = breached
            applied[vid] = np.asarray(u, dtype=float)
        self._update_breaches(breach_now)
        rows = []
        for vid in sorted(applied):
            veh = w.vehicles[vid]
            if not veh.live:
                continue
            u = np.clip(applied[vid], -self.ctx.u_max, self.ctx.u_max)
            rows.append((self.t, vid, _mode_tag(veh.mode), veh.state.p.copy(), veh.state.v.copy(), u))
            veh.state = step_dynamics(veh.state, u, self.dt, self.ctx.u_max, self.ctx.v_max)
            self.u_prev[vid] = u
        return rows

    def _update_breaches(self, breach_now):
        w = self.world
        current = set()
        for vid, ids in breach_now.items():
            self.max_breaches[vid] = max(self.max_breaches[vid], len(ids))
            for j in ids:
                current.add((vid, j))
            if len(ids) > 1:
                # the vehicle evades the most threatening neighbour; the others causing breaches leave the level
                for j in ids[1:]:
                    if w.vehicles[j].live and not _is_faulty(w.vehicles[j]):
                        w.fault(j)
                self._flush_mode_log()
        for pair in sorted(current - self.breaches):
            self.emit("SafetyBreachStart", vehicle=pair[0], other=pair[1])
        for pair in sorted(self.breaches - current):
            self.emit("SafetyBreachEnd", vehicle=pair[0], other=pair[1])
        self.breaches = current

    def advance(self, k):
        self.t = k * self.dt
        for vid in self.world.advance_faults(self.dt):
            self.emit("FaultDescent", vehicle=vid)
            self.breaches = {b for b in self.breaches if vid not in b}


def _is_faulty(veh):
    return not isinstance(veh.mode, (Free, Leader, Follower))


def _mode_tag(mode):
    return str(mode)


def run_scenario(cfg, ctx=None):
    """Run ``cfg`` to its duration; returns a :class:`SimResult`."""
    ctx = build_context(cfg) if ctx is None else ctx
    cfg = copy.deepcopy(cfg)
    eng = _Engine(cfg, ctx)
    steps = int(round(cfg.params["duration"] / eng.dt))
    rows = []
    for k in range(steps):
        eng.t = k * eng.dt
        rows.extend(eng.step())
        eng.advance(k + 1)
    eng.t = steps * eng.dt
    for pair in sorted(eng.breaches):
        eng.emit("SafetyBreachEnd", vehicle=pair[0], other=pair[1])
    eng.world.check_consistency()
    traj = _rows_to_record(rows)
    return SimResult(cfg, traj, eng.events, eng.world, eng.max_breaches)


def _rows_to_record(rows):
    if not rows:
        z = np.zeros((0, 2))
        return TrajectoryRecord(np.zeros(0), np.zeros(0, dtype=int), [], z, z.copy(), z.copy())
    t, vid, mode, p, v, u = zip(*rows)
    return TrajectoryRecord(np.array(t), np.array(vid), list(mode), np.array(p), np.array(v), np.array(u))


# ---------------------------------------------------------------- analysis and output


def check_separation(traj, d):
    """Pairwise conjunction test |dx| <= d and |dy| <= d at every recorded time.

    Returns a dict with, per pair, the minimum of max(|dx|, |dy|) and when it
    occurred, plus the list of violations.
    """
    pairs = {}
    violations = []
    order = np.lexsort((traj.vid, traj.t))
    t, vid, p = traj.t[order], traj.vid[order], traj.p[order]
    bounds = np.flatnonzero(np.diff(t)) + 1
    for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, len(t)]):
        ids, P = vid[lo:hi], p[lo:hi]
        if len(ids) < 2:
            continue
        D = np.abs(P[:, None, :] - P[None, :, :])
        sep = D.max(axis=2)
        a, b = np.triu_indices(len(ids), 1)
        for i, j, s in zip(ids[a], ids[b], sep[a, b]):
            key = (int(i), int(j))
            if key not in pairs or s < pairs[key][0]:
                pairs[key] = (float(s), float(t[lo]))
            if s <= d:
                violations.append(dict(t=float(t[lo]), i=int(i), j=int(j), sep=float(s)))
    return dict(d=float(d),
                pairs=[dict(i=i, j=j, min_sep=s, t=tt) for (i, j), (s, tt) in sorted(pairs.items())],
                violations=violations)


def spacing_error(result, tail=0.2):
    """Largest follower slot error |p_i - p_leader - r_i| over the last ``tail`` of the run, per platoon."""
    tr = result.trajectory
    t_end = result.config.params["duration"]
    out = {}
    for pid, members in result.final_platoons().items():
        pl = result.world.platoons[pid]
        h = result.config.highway_objects()[pl.highway]
        t_lead, p_lead, _ = tr.vehicle(members[0])
        keep = t_lead >= (1 - tail) * t_end - 1e-9
        worst = 0.0
        for k, m in enumerate(members[1:], start=2):
            t_m, p_m, _ = tr.vehicle(m)
            idx = np.searchsorted(t_m, t_lead[keep])
            r = -(k - 1) * pl.d_sep * h.direction
            err = np.linalg.norm(p_m[idx] - p_lead[keep] - r, axis=1)
            worst = max(worst, float(err.max(initial=0.0)))
        out[pid] = worst
    return out


def _fmt(x):
    return f"{x:.6f}"


def trajectory_csv(traj):
    lines = ["t,vehicle_id,mode,px,py,vx,vy,ux,uy"]
    for k in range(len(traj)):
        vals = [traj.p[k, 0], traj.p[k, 1], traj.v[k, 0], traj.v[k, 1], traj.u[k, 0], traj.u[k, 1]]
        lines.append(",".join([_fmt(traj.t[k]), str(int(traj.vid[k])), traj.mode[k]] + [_fmt(x) for x in vals]))
    return "\n".join(lines) + "\n"


def polylines(traj):
    out = {}
    for vid in sorted(set(int(v) for v in traj.vid)):
        _, p, _ = traj.vehicle(vid)
        out[str(vid)] = [[round(float(x), 6), round(float(y), 6)] for x, y in p]
    return out


def emit_outputs(result, out_dir):
    """Write trajectories.csv, events.jsonl, separation.json and polylines.json into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    traj = result.trajectory
    files = {
        "trajectories.csv": trajectory_csv(traj),
        "events.jsonl": "".join(e.to_json() + "\n" for e in result.events),
        "separation.json": json.dumps(check_separation(traj, result.config.params["d"]), indent=1,
                                      sort_keys=True) + "\n" if len(traj) else json.dumps(
            dict(d=result.config.params["d"], pairs=[], violations=[])) + "\n",
        "polylines.json": json.dumps(polylines(traj), sort_keys=True) + "\n",
    }
    paths = []
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        atomic_write_text(path, text)
        paths.append(path)
    return paths
