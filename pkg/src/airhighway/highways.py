"""From cost-minimizing paths to waypoints and a directed highway graph."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateEdge, DegeneratePath, SOutOfRange
from .files import atomic_write_text

MERGE_TOL = 1e-6
DEFAULT_THETA_C = math.radians(10.0)


@dataclass
class Waypoint:
    id: int
    position: tuple
    provenance: object = None  # (path i, point j), "origin", "destination" or "centroid"

    @property
    def pinned(self):
        return self.provenance in ("origin", "destination")


@dataclass(frozen=True)
class Highway:
    start: tuple
    end: tuple
    speed: float

    def __post_init__(self):
        start = tuple(float(v) for v in self.start)
        end = tuple(float(v) for v in self.end)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        if math.hypot(end[0] - start[0], end[1] - start[1]) == 0.0:
            raise DegenerateEdge("highway start and end coincide")
        if not self.speed > 0:
            raise ValueError("highway speed must be positive")

    @property
    def length(self):
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def direction(self):
        d = np.subtract(self.end, self.start)
        return d / np.linalg.norm(d)

    def point(self, s):
        return np.asarray(self.start) + s * np.subtract(self.end, self.start)

    def reversed(self):
        return Highway(self.end, self.start, self.speed)

    def project(self, p):
        """Path parameter of the closest point to ``p``, clipped to [0, 1]."""
        d = np.subtract(self.end, self.start)
        s = float(np.dot(np.subtract(p, self.start), d) / np.dot(d, d))
        return min(max(s, 0.0), 1.0)

    def lateral_offset(self, p):
        """Signed distance of ``p`` from the highway's supporting line (left positive)."""
        dh = self.direction
        r = np.subtract(p, self.start)
        return float(dh[0] * r[1] - dh[1] * r[0])


def highway_state(h, s):
    """Position and nominal velocity at path parameter ``s``."""
    if not 0.0 <= s <= 1.0:
        raise SOutOfRange(f"s={s} outside [0, 1]")
    return h.point(s), h.speed * h.direction


def _headings(points):
    seg = np.diff(points, axis=0)
    keep = np.hypot(seg[:, 0], seg[:, 1]) > 0
    return np.arctan2(seg[:, 1], seg[:, 0]), keep


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def sparsify_by_heading(points, theta_c=DEFAULT_THETA_C, path_index=0):
    """Waypoints where the heading has turned by more than ``theta_c``.

    The walk starts at the destination end, as the heading is first noted
    there, and the reference heading resets at every emitted point. The
    result is returned origin-first and always contains both endpoints.
    """
    pts = np.asarray(getattr(points, "points", points), dtype=float)
    if len(pts) < 2 or len(np.unique(pts, axis=0)) < 2:
        raise DegeneratePath("path needs at least two distinct points")
    if not 0 < theta_c < math.pi:
        raise ValueError("theta_c must lie in (0, pi)")
    n = len(pts)
    rev = pts[::-1]
    heading, keep = _headings(rev)
    emitted = [0]
    ref = None
    for k in range(len(heading)):
        if not keep[k]:
            continue
        if ref is None:
            ref = heading[k]
            continue
        if abs(_wrap(heading[k] - ref)) > theta_c:
            if k != emitted[-1]:
                emitted.append(k)
            ref = heading[k]
    if emitted[-1] != n - 1:
        emitted.append(n - 1)
    # indices into the origin-first path
    idx = sorted(n - 1 - k for k in emitted)
    out = []
    for j in idx:
        if j == 0:
            prov = "origin"
        elif j == n - 1:
            prov = "destination"
        else:
            prov = (path_index, j)
        out.append(Waypoint(len(out), tuple(pts[j]), prov))
    return out


def cluster_waypoints(points, radius):
    """Greedy radius clustering in input order; pinned points are left alone.

    Each unclustered point seeds a cluster that absorbs every later unclustered,
    unpinned point within ``radius``; the cluster is replaced by
    its centroid.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    pos = np.array([w.position for w in points], dtype=float).reshape(-1, 2)
    taken = np.zeros(len(points), dtype=bool)
    out = []
    for i, w in enumerate(points):
        if taken[i]:
            continue
        taken[i] = True
        if w.pinned or radius == 0:
            out.append(Waypoint(len(out), tuple(w.position), w.provenance))
            continue
        d = np.hypot(*(pos - pos[i]).T)
        members = [i] + [k for k in range(len(points))
                         if not taken[k] and not points[k].pinned and d[k] <= radius]
        taken[members] = True
        if len(members) == 1:
            out.append(Waypoint(len(out), tuple(w.position), w.provenance))
        else:
            out.append(Waypoint(len(out), tuple(pos[members].mean(axis=0)), "centroid"))
    return out


def cluster_paths(waypoint_lists, radius):
    """Cluster interior waypoints of all paths together and rewrite each path.

    Returns one position list per path; consecutive duplicates are dropped.
    """
    flat, owner = [], []
    for p, wps in enumerate(waypoint_lists):
        for k, w in enumerate(wps):
            flat.append(w)
            owner.append((p, k))
    pos = np.array([w.position for w in flat], dtype=float)
    rep = pos.copy()
    taken = np.zeros(len(flat), dtype=bool)
    for i, w in enumerate(flat):
        if taken[i]:
            continue
        taken[i] = True
        if w.pinned or radius == 0:
            continue
        d = np.hypot(*(pos - pos[i]).T)
        members = [i] + [k for k in range(len(flat)) if not taken[k] and not flat[k].pinned and d[k] <= radius]
        taken[members] = True
        rep[members] = pos[members].mean(axis=0)
    out = [[] for _ in waypoint_lists]
    for (p, _), r in zip(owner, rep):
        if out[p] and np.hypot(*(np.subtract(out[p][-1], r))) <= MERGE_TOL:
            continue
        out[p].append(tuple(r))
    return out


@dataclass
class HighwayGraph:
    waypoints: list = field(default_factory=list)  # list of (x, y)
    edges: list = field(default_factory=list)  # list of (from_id, to_id, speed)
    sequences: list = field(default_factory=list)  # per path: list of edge indices

    def highway(self, e):
        a, b, speed = self.edges[e]
        return Highway(self.waypoints[a], self.waypoints[b], speed)

    def highways(self):
        return [self.highway(e) for e in range(len(self.edges))]

    def sequence(self, path):
        return [self.highway(e) for e in self.sequences[path]]

    def check_chain(self, path, origin, dest, tol=0.0):
        """Assert the chain conditions: starts at origin, links up, ends at dest."""
        seq = self.sequence(path)
        ok = np.allclose(seq[0].start, origin, atol=tol, rtol=0) and np.allclose(seq[-1].end, dest, atol=tol, rtol=0)
        for h0, h1 in zip(seq, seq[1:]):
            ok = ok and h0.end == h1.start
        return bool(ok)

    def to_dict(self):
        return {
            "waypoints": [{"id": i, "x": p[0], "y": p[1]} for i, p in enumerate(self.waypoints)],
            "edges": [{"id": e, "from": a, "to": b, "speed": s} for e, (a, b, s) in enumerate(self.edges)],
            "paths": [list(seq) for seq in self.sequences],
        }

    @classmethod
    def from_dict(cls, doc):
        wps = [None] * len(doc["waypoints"])
        for w in doc["waypoints"]:
            wps[int(w["id"])] = (float(w["x"]), float(w["y"]))
        edges = [None] * len(doc["edges"])
        for k, e in enumerate(doc["edges"]):
            edges[int(e.get("id", k))] = (int(e["from"]), int(e["to"]), float(e["speed"]))
        return cls(wps, edges, [list(map(int, s)) for s in doc.get("paths", [])])

    def save(self, path):
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_graph(waypoint_lists, v_hw):
    """Directed highways between consecutive waypoints of each path.

    Waypoints closer than ``MERGE_TOL`` share one id and repeated edges are
    stored once, so overlapping paths share their trunk.
    """
    g = HighwayGraph()
    edge_ids = {}

    def wp_id(p):
        for i, q in enumerate(g.waypoints):
            if math.hypot(p[0] - q[0], p[1] - q[1]) <= MERGE_TOL:
                return i
        g.waypoints.append((float(p[0]), float(p[1])))
        return len(g.waypoints) - 1

    for wps in waypoint_lists:
        pts = [tuple(getattr(w, "position", w)) for w in wps]
        if len(pts) < 2:
            raise DegeneratePath("each path needs at least two waypoints")
        ids = [wp_id(p) for p in pts]
        seq = []
        for a, b in zip(ids, ids[1:]):
            if a == b:
                raise DegenerateEdge(f"consecutive waypoints coincide at {g.waypoints[a]}")
            if (a, b) not in edge_ids:
                edge_ids[(a, b)] = len(g.edges)
                g.edges.append((a, b, float(v_hw)))
            seq.append(edge_ids[(a, b)])
        g.sequences.append(seq)
    return g


def _point_segment_dist(p, a, b):
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0:
        return np.hypot(*(p - a).T)
    t = np.clip(((p - a) @ ab) / L2, 0, 1)
    return np.hypot(*(p - (a + t[:, None] * ab)).T)


def polyline_deviation(path_points, waypoints):
    """Hausdorff distance between a dense path and the polyline through its waypoints."""
    P = np.asarray(path_points, dtype=float)
    W = np.asarray(waypoints, dtype=float)
    d_pw = np.min([_point_segment_dist(P, W[k], W[k + 1]) for k in range(len(W) - 1)], axis=0)
    d_wp = max(float(np.min(np.hypot(*(P - w).T))) for w in W)
    return float(max(d_pw.max(), d_wp))
