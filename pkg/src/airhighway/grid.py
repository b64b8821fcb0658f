"""Regular grids, N-D scalar fields and the HJVF binary field format.

Arrays are indexed ``values[i0, i1, ...]`` with axis 0 first (``'ij'``
indexing), so ``values.ravel()`` is the row-major order used on disk.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, FieldFormatError, OutOfBounds

MAGIC = b"HJVF"
VERSION = 1


@dataclass(frozen=True)
class Grid:
    """Axis-aligned regular grid of nodes."""

    mins: tuple
    maxs: tuple
    counts: tuple
    min_count: int = field(default=2, repr=False, compare=False)

    def __post_init__(self):
        mins = tuple(float(m) for m in self.mins)
        maxs = tuple(float(m) for m in self.maxs)
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)
        object.__setattr__(self, "counts", counts)
        if not (len(mins) == len(maxs) == len(counts)) or not mins:
            raise DimensionMismatch("mins, maxs and counts must have equal nonzero length")
        for lo, hi, n in zip(mins, maxs, counts):
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
                raise DimensionMismatch(f"axis bounds must satisfy min < max, got [{lo}, {hi}]")
            if n < self.min_count:
                raise DimensionMismatch(f"need at least {self.min_count} nodes per axis, got {n}")

    @property
    def ndim(self):
        return len(self.counts)

    @property
    def shape(self):
        return self.counts

    @property
    def size(self):
        return int(np.prod(self.counts))

    @property
    def spacing(self):
        return tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.mins, self.maxs, self.counts))

    @property
    def axes(self):
        return tuple(np.linspace(lo, hi, n) for lo, hi, n in zip(self.mins, self.maxs, self.counts))

    def node(self, index):
        h = self.spacing
        return np.array([lo + i * dh for lo, i, dh in zip(self.mins, index, h)])

    def states(self):
        """Coordinates of every node, shape ``counts + (ndim,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.mins) - tol
        hi = np.asarray(self.maxs) + tol
        return bool(np.all((x >= lo) & (x <= hi), axis=-1).all())

    def nearest_index(self, x):
        x = np.asarray(x, dtype=float)
        h = np.asarray(self.spacing)
        idx = np.rint((x - np.asarray(self.mins)) / h).astype(int)
        return tuple(np.clip(idx, 0, np.asarray(self.counts) - 1))

    def sub(self, dims, min_count=None):
        return Grid(
            tuple(self.mins[d] for d in dims),
            tuple(self.maxs[d] for d in dims),
            tuple(self.counts[d] for d in dims),
            min_count=self.min_count if min_count is None else min_count,
        )


def interp_weights(grid, points, check=True):
    """Corner flat indices and multilinear weights for ``points`` (M, ndim).

    Returns ``(flat, weights)``, each of shape ``(2**ndim, M)``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != grid.ndim:
        raise DimensionMismatch(f"points have {pts.shape[-1]} coordinates, grid has {grid.ndim}")
    lo = np.asarray(grid.mins)
    hi = np.asarray(grid.maxs)
    if check:
        bad = np.any((pts < lo - 1e-9) | (pts > hi + 1e-9), axis=1)
        if bad.any():
            raise OutOfBounds(f"point {pts[np.argmax(bad)].tolist()} outside grid bounds")
    h = np.asarray(grid.spacing)
    counts = np.asarray(grid.counts)
    u = (np.clip(pts, lo, hi) - lo) / h
    i0 = np.clip(np.floor(u).astype(np.int64), 0, counts - 2)
    t = u - i0
    corners = list(product((0, 1), repeat=grid.ndim))
    flat = np.empty((len(corners), pts.shape[0]), dtype=np.int64)
    weights = np.empty((len(corners), pts.shape[0]))
    strides = np.cumprod((1,) + tuple(counts[::-1]))[:-1][::-1]
    for c, bits in enumerate(corners):
        b = np.asarray(bits)
        flat[c] = ((i0 + b) * strides).sum(axis=1)
        weights[c] = np.prod(np.where(b == 1, t, 1.0 - t), axis=1)
    return flat, weights


def interpolate(grid, values, points, check=True):
    """Multilinear interpolation of ``values`` (grid-shaped) at ``points``."""
    flat, w = interp_weights(grid, points, check=check)
    return (values.reshape(-1)[flat] * w).sum(axis=0)


@dataclass(eq=False)
class ScalarFieldND:
    """Scalar values on a regular grid, optionally labelled with a time (s, <= 0)."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise DimensionMismatch(f"values shape {self.values.shape} != grid counts {self.grid.shape}")
        if min(self.grid.counts) < 3:
            raise DimensionMismatch("scalar fields need at least 3 nodes per axis")
        if not np.all(np.isfinite(self.values)):
            raise FieldFormatError("field values must be finite")
        self.time = float(self.time)

    @property
    def ndim(self):
        return self.grid.ndim

    def at(self, points, check=True):
        return interpolate(self.grid, self.values, points, check=check)

    def to_bytes(self):
        buf = io.BytesIO()
        write_field(buf, self)
        return buf.getvalue()

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return read_field(fh)


def write_field(fh, fld):
    g = fld.grid
    fh.write(MAGIC)
    fh.write(struct.pack("<II", VERSION, g.ndim))
    for n, lo, hi in zip(g.counts, g.mins, g.maxs):
        fh.write(struct.pack("<Qdd", n, lo, hi))
    fh.write(struct.pack("<d", fld.time))
    fh.write(np.ascontiguousarray(fld.values, dtype="<f8").tobytes())


def _read_exact(fh, n):
    data = fh.read(n)
    if len(data) != n:
        raise FieldFormatError("truncated HJVF record")
    return data


def read_field(fh):
    if _read_exact(fh, 4) != MAGIC:
        raise FieldFormatError("bad magic, expected HJVF")
    version, ndim = struct.unpack("<II", _read_exact(fh, 8))
    if version != VERSION:
        raise FieldFormatError(f"unsupported HJVF version {version}")
    counts, mins, maxs = [], [], []
    for _ in range(ndim):
        n, lo, hi = struct.unpack("<Qdd", _read_exact(fh, 24))
        counts.append(n)
        mins.append(lo)
        maxs.append(hi)
    (time,) = struct.unpack("<d", _read_exact(fh, 8))
    size = int(np.prod(counts))
    values = np.frombuffer(_read_exact(fh, 8 * size), dtype="<f8").reshape(counts)
    return ScalarFieldND(Grid(mins, maxs, counts), values.astype(np.float64), time)
