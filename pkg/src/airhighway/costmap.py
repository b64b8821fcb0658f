"""Cost maps: a positive cost rate per metre, stored at grid nodes.

Costs live on nodes and are interpolated bilinearly. On disk a map is a CSV
raster (one row per y index) plus a JSON sidecar with ``min``, ``max``,
``counts``, and optionally ``categories`` and ``b``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    NonPositiveCost,
    NonPositiveFactor,
    OutOfBounds,
    UnknownCategory,
)
from .files import atomic_write_text
from .grid import Grid, interpolate

CATEGORY_ORDER = ("airports", "cities", "other", "water")
# cost = b ** exponent, descending in CATEGORY_ORDER
CATEGORY_EXPONENTS = {"airports": 1, "cities": 0, "other": -1, "water": -2}


class GridSpec2D(Grid):
    """Two-axis node grid over the map domain."""

    def __init__(self, min, max, counts):
        super().__init__(tuple(min), tuple(max), tuple(counts))
        if self.ndim != 2:
            raise DimensionMismatch("GridSpec2D needs exactly two axes")

    def __reduce__(self):
        return (GridSpec2D, (self.mins, self.maxs, self.counts))


@dataclass(frozen=True)
class CategoryTable:
    b: float = 4.0
    categories: tuple = CATEGORY_ORDER

    def __post_init__(self):
        if not self.b > 1:
            raise NonPositiveFactor(f"factor b must exceed 1, got {self.b}")
        for label in self.categories:
            if label not in CATEGORY_EXPONENTS:
                raise UnknownCategory(label)

    def cost(self, label):
        try:
            return float(self.b) ** CATEGORY_EXPONENTS[label]
        except KeyError:
            raise UnknownCategory(label) from None

    def costs(self):
        return {label: self.cost(label) for label in self.categories}


@dataclass(eq=False)
class CostMap:
    grid: GridSpec2D
    values: np.ndarray  # shape (nx, ny), values[i, j] at (x_i, y_j)
    categories: CategoryTable | None = None

    def __post_init__(self):
        self.values = np.array(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise DimensionMismatch(f"raster shape {self.values.shape} != counts {self.grid.shape}")
        _check_positive(self.values)
        self.values.setflags(write=False)

    def scaled(self, factor):
        return CostMap(self.grid, self.values * factor, self.categories)

    def sample(self, p):
        return sample_cost(self, p)

    def save(self, raster_path, meta_path):
        save_costmap(self, raster_path, meta_path)


def _check_positive(values):
    bad = ~(np.isfinite(values) & (values > 0))
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NonPositiveCost(f"cost at node {idx} is {values[idx]!r}; costs must be > 0")


def build_from_categories(labels, b, grid):
    """Cost map from a category raster; ``labels[i][j]`` is the node at (x_i, y_j)."""
    table = CategoryTable(b=b)
    lab = np.asarray(labels, dtype=object)
    if lab.shape != grid.shape:
        raise DimensionMismatch(f"label raster shape {lab.shape} != counts {grid.shape}")
    costs = table.costs()
    values = np.empty(lab.shape)
    for idx, label in np.ndenumerate(lab):
        if label not in costs:
            raise UnknownCategory(str(label))
        values[idx] = costs[label]
    return CostMap(grid, values, table)


def sample_cost(cmap, p):
    """Bilinear interpolation of node costs at ``p`` (one point or an (M, 2) array)."""
    p = np.asarray(p, dtype=float)
    if not cmap.grid.contains(p):
        raise OutOfBounds(f"position {p.tolist()} outside the cost map")
    out = interpolate(cmap.grid, cmap.values, p.reshape(-1, 2), check=False)
    return float(out[0]) if p.ndim == 1 else out


def save_costmap(cmap, raster_path, meta_path):
    # transposed so that each CSV row is one y index
    buf = io.StringIO()
    np.savetxt(buf, cmap.values.T, delimiter=",", fmt="%.17g")
    atomic_write_text(raster_path, buf.getvalue())
    meta = {
        "min": list(cmap.grid.mins),
        "max": list(cmap.grid.maxs),
        "counts": list(cmap.grid.counts),
    }
    if cmap.categories is not None:
        meta["categories"] = list(cmap.categories.categories)
        meta["b"] = cmap.categories.b
    atomic_write_text(meta_path, json.dumps(meta, indent=2) + "\n")


def load_costmap(raster_path, meta_path):
    meta = json.loads(Path(meta_path).read_text())
    grid = GridSpec2D(meta["min"], meta["max"], meta["counts"])
    raster = np.loadtxt(raster_path, delimiter=",", dtype=np.float64, ndmin=2)
    nx, ny = grid.counts
    if raster.shape != (ny, nx):
        raise DimensionMismatch(
            f"raster has {raster.shape[0]} rows x {raster.shape[1]} columns, metadata expects {ny} x {nx}"
        )
    table = CategoryTable(b=meta["b"], categories=tuple(meta["categories"])) if "b" in meta else None
    return CostMap(grid, raster.T, table)


def uniform(grid, cost=1.0):
    return CostMap(grid, np.full(grid.shape, float(cost)))


def random_blocks(grid, rng, block=10, b=4.0):
    """Piecewise-constant map with square blocks of random categories."""
    nx, ny = grid.counts
    bx, by = -(-nx // block), -(-ny // block)
    table = CategoryTable(b=b)
    levels = np.array([table.cost(c) for c in CATEGORY_ORDER])
    coarse = levels[rng.integers(0, len(levels), size=(bx, by))]
    values = np.repeat(np.repeat(coarse, block, axis=0), block, axis=1)[:nx, :ny]
    return CostMap(grid, values, table)


def random_smooth(grid, rng, modes=4, lo=0.3, hi=3.0):
    """Smooth positive map from a few random Fourier modes, scaled to [lo, hi]."""
    X, Y = np.meshgrid(*grid.axes, indexing="ij")
    Lx = grid.maxs[0] - grid.mins[0]
    Ly = grid.maxs[1] - grid.mins[1]
    f = np.zeros_like(X)
    for _ in range(modes):
        kx, ky = rng.integers(1, 4, size=2)
        ph = rng.uniform(0, 2 * np.pi, size=2)
        f += rng.normal() * np.sin(2 * np.pi * kx * X / Lx + ph[0]) * np.cos(2 * np.pi * ky * Y / Ly + ph[1])
    f = (f - f.min()) / max(np.ptp(f), 1e-12)
    return CostMap(grid, lo + (hi - lo) * f)


def random_regions(grid, rng, regions=6, b=4.0):
    """Piecewise-constant map of Voronoi regions, each a random category."""
    table = CategoryTable(b=b)
    levels = np.array([table.cost(c) for c in CATEGORY_ORDER])
    lo, hi = np.asarray(grid.mins), np.asarray(grid.maxs)
    seeds = lo + (hi - lo) * rng.uniform(size=(regions, 2))
    cats = rng.integers(0, len(levels), size=regions)
    P = grid.states()
    d2 = ((P[..., None, :] - seeds) ** 2).sum(axis=-1)
    return CostMap(grid, levels[cats[np.argmin(d2, axis=-1)]], table)
