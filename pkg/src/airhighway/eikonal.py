"""Minimum cumulative cost from an origin: fast marching and path extraction.

The solver computes V with |grad V| = c(p), i.e. the cost map is treated as a
slowness, so V(p) is the smallest integral of c along any path from the
origin to p (arc-length parametrized).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _fmm
from ._accel import maybe_njit
from .costmap import CostMap, sample_cost
from .errors import MaxStepsExceeded, NoDescent, OriginOutOfBounds, OutOfBounds
from .grid import ScalarFieldND

EPS_GRAD = 1e-9
DEFAULT_INIT_RADIUS = 10  # grid cells seeded with straight-ray costs around the origin


@dataclass(eq=False)
class EikonalSolution:
    costmap: CostMap
    origin: np.ndarray
    values: np.ndarray  # (nx, ny), cost x metres
    flags: np.ndarray  # _fmm.FAR / TRIAL / ACCEPTED per node
    accept_order: np.ndarray  # values in the order nodes were accepted

    @property
    def grid(self):
        return self.costmap.grid

    def value_at(self, p):
        p = np.asarray(p, dtype=float)
        if not self.grid.contains(p):
            raise OutOfBounds(f"position {p.tolist()} outside the grid")
        return float(_bilinear(self.values, np.asarray(self.grid.mins), np.asarray(self.grid.spacing), p[0], p[1]))

    def to_field(self):
        return ScalarFieldND(self.grid, self.values, 0.0)

    def gradient(self):
        hx, hy = self.grid.spacing
        return np.gradient(self.values, hx, hy, edge_order=1)


@dataclass(eq=False)
class PathPolyline:
    points: np.ndarray  # (n, 2), origin -> destination
    step: float

    def __len__(self):
        return len(self.points)

    def length(self):
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())


def _ray_cost(cmap, origin, p, spacing):
    """Midpoint-rule cost of the straight segment origin -> p."""
    dist = float(np.hypot(*(p - origin)))
    if dist == 0.0:
        return 0.0
    m = max(1, int(math.ceil(dist / (0.5 * spacing))))
    t = (np.arange(m) + 0.5) / m
    pts = origin[None, :] + t[:, None] * (p - origin)[None, :]
    return dist * float(np.mean(sample_cost(cmap, pts)))


def solve_fmm(cmap, origin, init_radius=DEFAULT_INIT_RADIUS):
    """Fast-marching solution of |grad V| = c with V(origin) = 0.

    Nodes within ``init_radius`` cells of the origin are seeded as tentative
    values with the cost of the straight segment to the origin; marching can
    still lower them. This removes most of the first-order point-source error.
    """
    grid = cmap.grid
    origin = np.asarray(origin, dtype=float)
    if origin.shape != (2,) or not grid.contains(origin):
        raise OriginOutOfBounds(f"origin {origin.tolist()} outside the cost map")
    hx, hy = grid.spacing
    hmin = min(hx, hy)
    X, Y = np.meshgrid(*grid.axes, indexing="ij")
    dist = np.hypot(X - origin[0], Y - origin[1])

    V = np.full(grid.shape, np.inf)
    state = np.zeros(grid.shape, dtype=np.int8)
    ball = dist <= max(init_radius, 0) * hmin + 1e-12
    ball[grid.nearest_index(origin)] = True
    for idx in zip(*np.nonzero(ball)):
        V[idx] = _ray_cost(cmap, origin, np.array([X[idx], Y[idx]]), hmin)
        state[idx] = _fmm.TRIAL
    order = _fmm.march(np.asarray(cmap.values, dtype=np.float64), hx, hy, V, state)
    return EikonalSolution(cmap, origin, V, state, order)


@maybe_njit
def _bilinear(F, mins, h, x, y):
    nx, ny = F.shape
    u = (x - mins[0]) / h[0]
    w = (y - mins[1]) / h[1]
    i = min(max(int(math.floor(u)), 0), nx - 2)
    j = min(max(int(math.floor(w)), 0), ny - 2)
    tu = min(max(u - i, 0.0), 1.0)
    tw = min(max(w - j, 0.0), 1.0)
    return ((1 - tu) * (1 - tw) * F[i, j] + tu * (1 - tw) * F[i + 1, j]
            + (1 - tu) * tw * F[i, j + 1] + tu * tw * F[i + 1, j + 1])


@maybe_njit
def _descend(gx, gy, mins, maxs, h, start, origin, step, capture, eps, max_steps, out):
    """Walk down -grad V from ``start``; returns point count, -1 on flat gradient, -2 on step cap."""
    x = start[0]
    y = start[1]
    out[0, 0] = x
    out[0, 1] = y
    n = 1
    for _ in range(max_steps):
        if math.hypot(x - origin[0], y - origin[1]) <= capture:
            return n
        a = _bilinear(gx, mins, h, x, y)
        b = _bilinear(gy, mins, h, x, y)
        g = math.hypot(a, b)
        if g < eps:
            return -1
        x = min(max(x - step * a / g, mins[0]), maxs[0])
        y = min(max(y - step * b / g, mins[1]), maxs[1])
        out[n, 0] = x
        out[n, 1] = y
        n += 1
    return -2


def extract_path(sol, dest, step=None, capture_radius=None, max_steps=None):
    """Gradient-descent path from ``dest`` back to the origin, returned origin-first."""
    grid = sol.grid
    dest = np.asarray(dest, dtype=float)
    if not grid.contains(dest):
        raise OutOfBounds(f"destination {dest.tolist()} outside the grid")
    hmin = min(grid.spacing)
    step = 0.5 * hmin if step is None else float(step)
    capture = 1.5 * hmin if capture_radius is None else float(capture_radius)
    if not (0 < step <= hmin + 1e-12):
        raise ValueError("step must be in (0, min grid spacing]")
    if capture < hmin - 1e-12:
        raise ValueError("capture_radius must be at least one grid spacing")
    if not np.isfinite(sol.value_at(dest)):
        raise NoDescent("destination is unreachable")
    if max_steps is None:
        span = sum(hi - lo for lo, hi in zip(grid.mins, grid.maxs))
        max_steps = int(20 * span / step) + 100

    gx, gy = sol.gradient()
    buf = np.empty((max_steps + 2, 2))
    mins = np.asarray(grid.mins, dtype=float)
    h = np.asarray(grid.spacing, dtype=float)
    maxs = np.asarray(grid.maxs, dtype=float)
    n = _descend(gx, gy, mins, maxs, h, dest, sol.origin, step, capture, EPS_GRAD, max_steps, buf)
    if n == -1:
        raise NoDescent("gradient vanished before reaching the origin")
    if n == -2:
        raise MaxStepsExceeded(f"no capture within {max_steps} steps")
    pts = buf[:n][::-1]
    # close the gap to the origin with a straight run at the same step
    gap = float(np.hypot(*(pts[0] - sol.origin)))
    if gap > 0:
        k = int(math.ceil(gap / step))
        t = np.arange(k) / k
        lead = sol.origin[None, :] + t[:, None] * (pts[0] - sol.origin)[None, :]
        pts = np.vstack([lead, pts])
    return PathPolyline(np.ascontiguousarray(pts), step)


def path_cost(cmap, path):
    """Composite midpoint quadrature of the cost integral along a polyline."""
    pts = np.asarray(getattr(path, "points", path), dtype=float)
    if not cmap.grid.contains(pts):
        raise OutOfBounds("path leaves the cost map")
    if len(pts) < 2:
        return 0.0
    hmin = min(cmap.grid.spacing)
    seg = np.diff(pts, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    m = np.maximum(1, np.ceil(lengths / (0.5 * hmin)).astype(int))
    seg_idx = np.repeat(np.arange(len(seg)), m)
    k = np.concatenate([np.arange(mi) for mi in m])
    t = (k + 0.5) / m[seg_idx]
    mids = pts[seg_idx] + t[:, None] * seg[seg_idx]
    c = sample_cost(cmap, mids)
    return float(np.sum(c * (lengths / m)[seg_idx]))
