"""Backward reachable sets from the terminal-value Hamilton-Jacobi PDE.

Value functions live on regular grids (:class:`ScalarFieldND`) and are
integrated from ``t = 0`` back to ``t = -T`` with the explicit scheme in
:mod:`._hj`. Negative time labels the slices, as in ``V(-T, x)``.

State orderings:

===========  ==============================================
double2d     (p, v)
single4d     (p_x, v_x, p_y, v_y)
relative4d   (p_xr, p_yr, v_xr, v_yr)
augrel6d     (p_xr, p_yr, v_xr, v_yr, v_xi, v_yi)
===========  ==============================================

``goal`` mode: Player 1 minimizes (reach the target), Player 2 maximizes.
``game`` mode: Player 1 maximizes (avoid the target), Player 2 minimizes.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from ._hj import Stepper
from .errors import (
    CFLViolation,
    DimensionMismatch,
    FieldFormatError,
    GridMismatch,
    NonBoxTarget,
    NonFiniteValue,
    OutOfBounds,
    TimeOutOfRange,
)
from .files import atomic_write_bytes
from .grid import Grid, ScalarFieldND, interp_weights, interpolate, read_field, write_field

CFL_MAX = 0.9
MIN_DT = 1e-9
TIME_TOL = 1e-9
GRAD_TOL = 1e-12  # costate components this small count as zero in bang_bang
# 6-D grids above this many nodes per axis need experimental=True (memory and runtime)
AUGREL6D_MAX_COUNT = 21

# drift: position axis -> velocity axis; p1/p2: one coefficient row per control component
_KINDS = {
    "double2d": dict(ndim=2, drift={0: 1}, p1=[{1: 1.0}], p2=[{1: -1.0}]),
    "single4d": dict(ndim=4, drift={0: 1, 2: 3}, p1=[{1: 1.0}, {3: 1.0}], p2=[{1: -1.0}, {3: -1.0}]),
    "relative4d": dict(ndim=4, drift={0: 2, 1: 3}, p1=[{2: 1.0}, {3: 1.0}], p2=[{2: -1.0}, {3: -1.0}]),
    "augrel6d": dict(ndim=6, drift={0: 2, 1: 3}, p1=[{2: 1.0, 4: 1.0}, {3: 1.0, 5: 1.0}],
                     p2=[{2: -1.0}, {3: -1.0}]),
}
KINDS = tuple(_KINDS)
MODES = ("goal", "game")


@dataclass(frozen=True)
class DynamicsSpec:
    kind: str
    u_max_i: float
    u_max_j: float = 0.0
    v_max: float = math.inf

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown dynamics kind {self.kind!r}; expected one of {KINDS}")
        if not self.u_max_i > 0:
            raise ValueError("u_max_i must be positive")
        if not self.u_max_j >= 0:
            raise ValueError("u_max_j must be non-negative")

    @property
    def ndim(self):
        return _KINDS[self.kind]["ndim"]

    @property
    def default_mode(self):
        return "goal" if self.kind in ("double2d", "single4d") else "game"

    def _rows(self, player):
        d = self.ndim
        rows = _KINDS[self.kind]["p1" if player == 1 else "p2"]
        out = np.zeros((len(rows), d))
        for r, row in enumerate(rows):
            for k, c in row.items():
                out[r, k] = c
        return out

    def columns(self, mode):
        """Control coefficient rows and signed bounds for the Hamiltonian."""
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        s = -1.0 if mode == "goal" else 1.0
        c1, c2 = self._rows(1), self._rows(2)
        w = np.concatenate([np.full(len(c1), s * self.u_max_i), np.full(len(c2), -s * self.u_max_j)])
        return np.vstack([c1, c2]), w

    def drift_vel(self):
        dv = -np.ones(self.ndim, dtype=np.int64)
        for p, v in _KINDS[self.kind]["drift"].items():
            dv[p] = v
        return dv

    def flow(self, x, u_i=(0.0, 0.0), u_j=(0.0, 0.0)):
        """State derivative for the given controls (used by simulation oracles)."""
        x = np.asarray(x, dtype=float)
        f = np.zeros_like(x)
        for p, v in _KINDS[self.kind]["drift"].items():
            f[..., p] = x[..., v]
        ui = np.atleast_1d(np.asarray(u_i, dtype=float))
        uj = np.atleast_1d(np.asarray(u_j, dtype=float))
        f = f + ui @ self._rows(1) + uj @ self._rows(2)
        return f


# ---------------------------------------------------------------- targets


@dataclass(frozen=True)
class BoxTarget:
    center: tuple
    radii: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        radii = np.broadcast_to(np.asarray(self.radii, dtype=float), (len(self.center),))
        object.__setattr__(self, "radii", tuple(float(r) for r in radii))
        if any(r <= 0 for r in self.radii):
            raise ValueError("box radii must be positive")

    def sub(self, dims):
        return BoxTarget([self.center[d] for d in dims], [self.radii[d] for d in dims])

    def contains(self, x):
        return bool(np.all(np.abs(np.subtract(x, self.center)) <= self.radii))


@dataclass(frozen=True)
class SafetyTarget:
    d: float
    v_max: float = math.inf

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("separation d must be positive")


def box_surface(x, center, radii):
    x = np.asarray(x, dtype=float)
    return np.max(np.abs(x - np.asarray(center)) - np.asarray(radii), axis=-1)


def safety_surface(x, d, v_max=math.inf):
    """Collision set: close in both x and y, or (6-D only) over the speed limit."""
    x = np.asarray(x, dtype=float)
    near = np.maximum(np.abs(x[..., 0]) - d, np.abs(x[..., 1]) - d)
    if x.shape[-1] == 6:
        over_x = v_max - np.abs(x[..., 4])
        over_y = v_max - np.abs(x[..., 5])
        return np.minimum(near, np.minimum(over_x, over_y))
    return near


def implicit_surface(target, grid, dyn=None):
    if dyn is not None and dyn.ndim != grid.ndim:
        raise GridMismatch(f"{dyn.kind} needs a {dyn.ndim}-D grid, got {grid.ndim}-D")
    X = grid.states()
    if isinstance(target, BoxTarget):
        if len(target.center) != grid.ndim:
            raise GridMismatch(f"box target has {len(target.center)} axes, grid has {grid.ndim}")
        vals = box_surface(X, target.center, target.radii)
    elif isinstance(target, SafetyTarget):
        if grid.ndim not in (4, 6) or (dyn is not None and dyn.kind not in ("relative4d", "augrel6d")):
            raise GridMismatch("safety targets live on relative4d or augrel6d grids")
        vals = safety_surface(X, target.d, target.v_max)
    else:
        raise TypeError(f"unsupported target {target!r}")
    return ScalarFieldND(grid, vals, 0.0)


def hamiltonian(dyn, mode, q, x):
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    if q.shape[-1] != dyn.ndim or x.shape[-1] != dyn.ndim:
        raise DimensionMismatch(f"{dyn.kind} costate and state need {dyn.ndim} components")
    cols, w = dyn.columns(mode)
    dv = dyn.drift_vel()
    H = sum(q[..., p] * x[..., v] for p, v in enumerate(dv) if v >= 0)
    return H + (w * np.abs(q @ cols.T)).sum(axis=-1)


def bang_bang(dyn, mode, q, player=1):
    """Optimal control components for ``player`` given costate ``q``; sign(0) -> 0."""
    cols = dyn._rows(player)
    s = np.asarray(q, dtype=float) @ cols.T
    s = np.where(np.abs(s) <= GRAD_TOL, 0.0, s)
    bound = dyn.u_max_i if player == 1 else dyn.u_max_j
    maximizing = (mode == "game") == (player == 1)
    return (1.0 if maximizing else -1.0) * bound * np.sign(s)


# ---------------------------------------------------------------- solver


def _stepper(dyn, mode, grid):
    cols, w = dyn.columns(mode)
    alpha = (np.abs(w)[:, None] * np.abs(cols)).sum(axis=0)
    return Stepper(grid, dyn.drift_vel(), cols, w, alpha)


def _schedule(T, store_interval):
    if not T > 0:
        raise ValueError("horizon T must be positive")
    store_interval = T / 20 if store_interval is None else float(store_interval)
    if not store_interval > 0:
        raise ValueError("store_interval must be positive")
    n = max(1, int(round(T / store_interval)))
    if abs(n * store_interval - T) > 1e-9 * max(1.0, T):
        n = int(math.ceil(T / store_interval))
    edges = np.minimum(np.arange(n + 1) * store_interval, T)
    edges[-1] = T
    return -edges


def integrate(dyn, mode, V0, grid, times, freeze):
    """Integrate from ``times[0] = 0`` through the decreasing ``times``; returns one array per time."""
    step = _stepper(dyn, mode, grid)
    rate = step.max_rate()
    if not np.isfinite(rate):
        raise CFLViolation("unbounded characteristic speed")
    V = np.array(V0, dtype=np.float64)
    out = [V.copy()]
    for t0, t1 in zip(times[:-1], times[1:]):
        span = t0 - t1
        n = max(1, int(math.ceil(span * rate / CFL_MAX - 1e-12)))
        dt = span / n
        while dt * rate > CFL_MAX:
            dt *= 0.5
            n *= 2
            if dt < MIN_DT:
                raise CFLViolation(f"time step fell below {MIN_DT}")
        for _ in range(n):
            V = step(V, dt, freeze=freeze)
        if not np.all(np.isfinite(V)):
            raise NonFiniteValue(f"non-finite values by t={t1}")
        out.append(V.copy())
    return out


def _slice_index(times, t):
    if t > TIME_TOL or t < times[-1] - TIME_TOL:
        raise TimeOutOfRange(f"t={t} outside [{times[-1]}, 0]")
    # first stored time at or below t, which is the conservative choice
    k = int(np.searchsorted(-times, -t - TIME_TOL))
    return min(k, len(times) - 1)


def _central_gradient(grid, values, x):
    """Central-difference gradient at ``x`` from interpolated neighbours."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(grid.spacing)
    lo, hi = np.asarray(grid.mins), np.asarray(grid.maxs)
    q = np.empty(grid.ndim)
    for k in range(grid.ndim):
        a, b = x.copy(), x.copy()
        a[k] = max(x[k] - h[k], lo[k])
        b[k] = min(x[k] + h[k], hi[k])
        va, vb = interpolate(grid, values, np.stack([a, b]), check=False)
        q[k] = (vb - va) / (b[k] - a[k])
    return q


class _BRSBase:
    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.grid.ndim:
            raise DimensionMismatch(f"state needs {self.grid.ndim} components")
        if not self.grid.contains(x):
            raise OutOfBounds(f"state {x.tolist()} outside the value-function grid")
        return x

    @property
    def horizon(self):
        return -float(self.times[-1])

    def optimal_control(self, t, x, player=1):
        q = self.gradient_at(t, x)
        return bang_bang(self.dynamics, self.mode, q, player)


@dataclass(eq=False)
class BackwardReachableSet(_BRSBase):
    dynamics: DynamicsSpec
    mode: str
    slices: list  # ScalarFieldND, times 0, -dt_store, ..., -T
    freeze: bool = True

    @property
    def grid(self):
        return self.slices[0].grid

    @property
    def times(self):
        return np.array([s.time for s in self.slices])

    def slice_at(self, t):
        return self.slices[_slice_index(self.times, t)]

    def value_at(self, t, x):
        x = self._check_x(x)
        v = self.slice_at(t).at(x, check=False)
        return float(v[0]) if x.ndim == 1 else v

    def gradient_at(self, t, x):
        x = self._check_x(x)
        return _central_gradient(self.grid, self.slice_at(t).values, x)

    def save(self, path):
        save_brs(path, self)


def solve_hji(dyn, l, T, store_interval=None, mode=None, freeze=True, experimental=False):
    """Backward reachable set of ``l``'s zero sublevel set over horizon ``T``.

    ``experimental`` lifts the per-axis node cap on augrel6d grids.
    """
    mode = dyn.default_mode if mode is None else mode
    if l.grid.ndim != dyn.ndim:
        raise GridMismatch(f"{dyn.kind} needs a {dyn.ndim}-D grid, got {l.grid.ndim}-D")
    if dyn.kind == "augrel6d" and max(l.grid.counts) > AUGREL6D_MAX_COUNT and not experimental:
        raise GridMismatch(f"augrel6d grids are capped at {AUGREL6D_MAX_COUNT} nodes per axis; "
                           "pass experimental=True to exceed it")
    if not np.all(np.isfinite(l.values)):
        raise NonFiniteValue("terminal values must be finite")
    times = _schedule(T, store_interval)
    values = integrate(dyn, mode, l.values, l.grid, times, freeze)
    slices = [ScalarFieldND(l.grid, v, t) for v, t in zip(values, times)]
    slices[0] = ScalarFieldND(l.grid, l.values, 0.0)
    return BackwardReachableSet(dyn, mode, slices, freeze)


# ---------------------------------------------------------------- decomposition


@dataclass(eq=False)
class DecomposedBRS(_BRSBase):
    """Single4D goal set rebuilt from two fixed-time (p, v) subsystem solves.

    Each subsystem is solved in coordinates moving with the target velocity,
    ``z = p - p_bar - v_bar * s`` and ``w = v - v_bar`` at slice time ``s``.
    The double integrator is unchanged by this shift, and the target box
    becomes stationary, so transport over the horizon adds no smearing.
    Subsystem grids are in these offset coordinates.
    """

    dynamics: DynamicsSpec
    center: tuple  # target center (p_x, v_x, p_y, v_y)
    radii: tuple
    sub_x: list  # ScalarFieldND per stored time, offsets (z_x, w_x)
    sub_y: list  # same times, offsets (z_y, w_y)
    mode: str = "goal"

    def __post_init__(self):
        self.center = tuple(float(c) for c in self.center)
        self.radii = tuple(float(r) for r in self.radii)
        self._vals = [np.stack([s.values.reshape(-1) for s in sub]) for sub in (self.sub_x, self.sub_y)]

    @property
    def times(self):
        return np.array([s.time for s in self.sub_x])

    @property
    def grid(self):
        """Absolute-coordinate grid of the terminal slice."""
        gx, gy = self.sub_x[0].grid, self.sub_y[0].grid
        c = self.center
        return Grid((gx.mins[0] + c[0], gx.mins[1] + c[1], gy.mins[0] + c[2], gy.mins[1] + c[3]),
                    (gx.maxs[0] + c[0], gx.maxs[1] + c[1], gy.maxs[0] + c[2], gy.maxs[1] + c[3]),
                    (gx.counts[0], gx.counts[1], gy.counts[0], gy.counts[1]))

    def recentered(self, center):
        """The same set for a target box of equal radii centered elsewhere (no re-solve)."""
        return DecomposedBRS(self.dynamics, center, self.radii, self.sub_x, self.sub_y, self.mode)

    def contains_target(self, x):
        return bool(np.all(np.abs(np.subtract(x, self.center)) <= self.radii))

    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 4:
            raise DimensionMismatch("state needs 4 components")
        if not np.all(np.isfinite(x)):
            raise OutOfBounds("state must be finite")
        return x

    def _offsets(self, x, k, axis):
        """Offset coordinates of ``x`` for slices 0..k, shape (k + 1, M, 2)."""
        p, v = x[:, 2 * axis], x[:, 2 * axis + 1]
        pc, vc = self.center[2 * axis], self.center[2 * axis + 1]
        s = self.times[: k + 1, None]
        return np.stack([np.broadcast_to(p - pc, s.shape[:1] + p.shape) - vc * s,
                         np.broadcast_to(v - vc, s.shape[:1] + p.shape)], axis=-1)

    def _stack(self, x, k):
        """Subsystem values at slices 0..k, each of shape (k + 1, M); +inf off the grid."""
        x = np.atleast_2d(x)
        out = []
        for axis, (vals, sub) in enumerate(zip(self._vals, (self.sub_x, self.sub_y))):
            g = sub[0].grid
            z = self._offsets(x, k, axis)
            flat_pts = z.reshape(-1, 2)
            inside = np.all((flat_pts >= np.asarray(g.mins) - 1e-9) & (flat_pts <= np.asarray(g.maxs) + 1e-9), axis=1)
            flat, w = interp_weights(g, flat_pts, check=False)
            rows = np.repeat(np.arange(k + 1), x.shape[0])
            v = (vals[rows[None, :], flat] * w).sum(axis=0)
            out.append(np.where(inside, v, np.inf).reshape(k + 1, x.shape[0]))
        return out

    def value_at(self, t, x):
        x = self._check_x(x)
        k = _slice_index(self.times, t)
        vx, vy = self._stack(x, k)
        v = np.maximum(vx, vy).min(axis=0)
        if not np.all(np.isfinite(v)):
            raise OutOfBounds("state outside every stored slice of the decomposed grid")
        return float(v[0]) if x.ndim == 1 else v

    def argmin_slice(self, t, x):
        x = self._check_x(x)
        k = _slice_index(self.times, t)
        vx, vy = self._stack(x, k)
        return int(np.argmin(np.maximum(vx, vy)[:, 0]))

    def gradient_at(self, t, x):
        """Per-subsystem gradients at the slice attaining the minimum (earliest on ties)."""
        x = self._check_x(x)
        s = self.argmin_slice(t, x)
        q = []
        for axis, sub in enumerate((self.sub_x, self.sub_y)):
            z = self._offsets(x[None, :], s, axis)[s, 0]
            g = sub[s].grid
            q.append(_central_gradient(g, sub[s].values, np.clip(z, g.mins, g.maxs)))
        return np.concatenate(q)

    def full_slice(self, t, grid=None):
        """Reconstructed values on the nodes of ``grid`` (default: :attr:`grid`) at slice ``t``."""
        grid = self.grid if grid is None else grid
        X = grid.states().reshape(-1, 4)
        k = _slice_index(self.times, t)
        out = np.full(len(X), np.inf)
        for chunk in range(0, len(X), 200_000):
            vx, vy = self._stack(X[chunk:chunk + 200_000], k)
            out[chunk:chunk + 200_000] = np.maximum(vx, vy).min(axis=0)
        return out.reshape(grid.shape)

    def save(self, path):
        save_brs(path, self)


def default_subsystem_grid(dyn, radii, T, counts=81, margin=0.2):
    """Offset grid covering every (p, v) pair that can reach the box within ``T``."""
    rp, rv = radii
    w = (rv + dyn.u_max_i * T) * (1 + margin)
    z = (rp + w * T / 2) * (1 + margin)
    return Grid((-z, -w), (z, w), (counts, counts))


def decompose_solve_single4d(dyn, target, T, store_interval=None, grid=None, counts=81):
    """Exact decomposition for Single4D with an axis-aligned box target.

    ``grid`` is an optional absolute 4-D grid in (p_x, v_x, p_y, v_y) order;
    without it each subsystem gets :func:`default_subsystem_grid`.
    """
    if dyn.kind != "single4d":
        raise GridMismatch("decomposition applies to single4d dynamics")
    if not isinstance(target, BoxTarget) or len(target.center) != 4:
        raise NonBoxTarget("decomposition needs a 4-axis box target")
    c = target.center
    if grid is None:
        grids = [default_subsystem_grid(dyn, target.radii[2 * a:2 * a + 2], T, counts) for a in (0, 1)]
    else:
        if grid.ndim != 4:
            raise GridMismatch("single4d needs a 4-D grid")
        grids = [Grid(np.subtract(grid.sub(d).mins, (c[d[0]], c[d[1]])),
                      np.subtract(grid.sub(d).maxs, (c[d[0]], c[d[1]])), grid.sub(d).counts)
                 for d in ((0, 1), (2, 3))]
    sub_dyn = DynamicsSpec("double2d", dyn.u_max_i, 0.0, dyn.v_max)
    times = _schedule(T, store_interval)
    out = []
    for g, dims in zip(grids, ((0, 1), (2, 3))):
        box = BoxTarget((0.0, 0.0), (target.radii[dims[0]], target.radii[dims[1]]))
        l = implicit_surface(box, g)
        vals = integrate(sub_dyn, "goal", l.values, g, times, freeze=False)
        out.append([ScalarFieldND(g, v, t) for v, t in zip(vals, times)])
    return DecomposedBRS(dyn, c, target.radii, out[0], out[1])


# ---------------------------------------------------------------- persistence

CONTAINER_MAGIC = b"HJBS"
CONTAINER_VERSION = 1


def save_brs(path, brs):
    """Container: magic, version, JSON header length, JSON header, then HJVF records."""
    dyn = brs.dynamics
    decomposed = isinstance(brs, DecomposedBRS)
    records = [f for pair in zip(brs.sub_x, brs.sub_y) for f in pair] if decomposed else brs.slices
    header = {
        "kind": dyn.kind,
        "u_max_i": dyn.u_max_i,
        "u_max_j": dyn.u_max_j,
        "v_max": dyn.v_max if math.isfinite(dyn.v_max) else None,
        "mode": brs.mode,
        "decomposed": decomposed,
        "freeze": getattr(brs, "freeze", False),
        "times": [float(t) for t in brs.times],
        "records": len(records),
        "center": list(brs.center) if decomposed else None,
        "radii": list(brs.radii) if decomposed else None,
    }
    head = json.dumps(header, sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(CONTAINER_MAGIC)
    buf.write(struct.pack("<II", CONTAINER_VERSION, len(head)))
    buf.write(head)
    for f in records:
        write_field(buf, f)
    atomic_write_bytes(path, buf.getvalue())


def load_brs(path):
    with open(path, "rb") as fh:
        if fh.read(4) != CONTAINER_MAGIC:
            raise FieldFormatError("bad magic, expected HJBS")
        version, n = struct.unpack("<II", fh.read(8))
        if version != CONTAINER_VERSION:
            raise FieldFormatError(f"unsupported HJBS version {version}")
        header = json.loads(fh.read(n).decode())
        records = [read_field(fh) for _ in range(header["records"])]
    v_max = header["v_max"] if header["v_max"] is not None else math.inf
    dyn = DynamicsSpec(header["kind"], header["u_max_i"], header["u_max_j"], v_max)
    if header["decomposed"]:
        return DecomposedBRS(dyn, header["center"], header["radii"], records[0::2], records[1::2], header["mode"])
    return BackwardReachableSet(dyn, header["mode"], records, header["freeze"])
