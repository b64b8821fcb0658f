import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from airhighway.costmap import (CATEGORY_ORDER, CategoryTable, CostMap, GridSpec2D, build_from_categories,
                                load_costmap, random_smooth, sample_cost, save_costmap, uniform)
from airhighway.errors import DimensionMismatch, NonPositiveCost, NonPositiveFactor, OutOfBounds, UnknownCategory


def _write(tmp_path, rows, counts, lo=(0, 0), hi=(1, 1)):
    raster = tmp_path / "map.csv"
    meta = tmp_path / "map.json"
    raster.write_text("\n".join(",".join(str(v) for v in r) for r in rows) + "\n")
    meta.write_text(json.dumps({"min": list(lo), "max": list(hi), "counts": list(counts)}))
    return raster, meta


@pytest.mark.parametrize("b, label, cost", [(4, "airports", 4.0), (4, "water", 0.0625), (2, "other", 0.5),
                                            (4, "cities", 1.0)])
def test_category_costs(b, label, cost):
    g = GridSpec2D((0, 0), (1, 1), (2, 2))
    cm = build_from_categories([[label] * 2] * 2, b, g)
    assert np.all(cm.values == cost)


def test_category_errors():
    g = GridSpec2D((0, 0), (1, 1), (2, 2))
    with pytest.raises(UnknownCategory):
        build_from_categories([["airports", "lava"], ["water", "water"]], 4, g)
    with pytest.raises(NonPositiveFactor):
        CategoryTable(b=1.0)


@given(st.floats(1.0001, 100.0))
def test_category_order_strict(b):
    costs = [CategoryTable(b=b).cost(c) for c in CATEGORY_ORDER]
    assert all(c > 0 for c in costs)
    assert all(a > c for a, c in zip(costs, costs[1:]))


def test_load_uniform(tmp_path):
    raster, meta = _write(tmp_path, [[1, 1, 1]] * 3, (3, 3))
    cm = load_costmap(raster, meta)
    assert cm.grid.spacing == (0.5, 0.5)
    assert np.all(cm.values == 1.0)


def test_load_dimension_mismatch(tmp_path):
    raster, meta = _write(tmp_path, [[1, 1, 1]] * 4, (3, 3))
    with pytest.raises(DimensionMismatch):
        load_costmap(raster, meta)


def test_load_nonpositive(tmp_path):
    raster, meta = _write(tmp_path, [[1, 1, 1], [1, 0.0, 1], [1, 1, 1]], (3, 3))
    with pytest.raises(NonPositiveCost):
        load_costmap(raster, meta)


def test_rows_are_y(tmp_path):
    # 3 columns (x) by 2 rows (y)
    raster, meta = _write(tmp_path, [[1, 2, 3], [4, 5, 6]], (3, 2))
    cm = load_costmap(raster, meta)
    assert cm.values.shape == (3, 2)
    assert cm.values[2, 0] == 3 and cm.values[0, 1] == 4


def test_sample_examples():
    g = GridSpec2D((0, 0), (1, 1), (3, 3))
    assert sample_cost(uniform(g), (0.3, 0.7)) == 1.0
    vals = np.arange(1.0, 10.0).reshape(3, 3)
    cm = CostMap(g, vals)
    assert sample_cost(cm, (0.5, 0.5)) == vals[1, 1]
    two = CostMap(GridSpec2D((0, 0), (1, 1), (2, 2)), [[1.0, 1.0], [3.0, 3.0]])
    assert sample_cost(two, (0.5, 0.2)) == pytest.approx(2.0)
    with pytest.raises(OutOfBounds):
        sample_cost(cm, (1.5, 0.0))


@given(st.integers(0, 2**31), st.floats(0, 1), st.floats(0, 1))
def test_sample_bounded_by_cell(seed, fx, fy):
    g = GridSpec2D((0, 0), (4, 3), (5, 4))
    cm = CostMap(g, np.random.default_rng(seed).uniform(0.1, 5.0, g.shape))
    i, j = 1, 2
    p = (i + fx, j + fy)
    c = cm.values[i:i + 2, j:j + 2]
    v = sample_cost(cm, p)
    assert c.min() - 1e-12 <= v <= c.max() + 1e-12


@given(st.integers(0, 2**31))
def test_save_load_roundtrip(tmp_path_factory, seed):
    d = tmp_path_factory.mktemp("cm")
    g = GridSpec2D((-1.5, 2.0), (3.25, 7.0), (7, 5))
    cm = random_smooth(g, np.random.default_rng(seed))
    save_costmap(cm, d / "m.csv", d / "m.json")
    back = load_costmap(d / "m.csv", d / "m.json")
    assert back.grid == cm.grid
    assert np.array_equal(back.values, cm.values)


def test_save_load_categories(tmp_path):
    g = GridSpec2D((0, 0), (1, 1), (2, 2))
    cm = build_from_categories([["airports", "water"], ["other", "cities"]], 3.0, g)
    cm.save(tmp_path / "m.csv", tmp_path / "m.json")
    back = load_costmap(tmp_path / "m.csv", tmp_path / "m.json")
    assert back.categories == cm.categories
    assert np.array_equal(back.values, cm.values)


def test_grid_invariants():
    g = GridSpec2D((0, 0), (2, 1), (5, 3))
    assert g.spacing == (0.5, 0.5)
    assert np.allclose(g.node((3, 1)), (1.5, 0.5))
    with pytest.raises(DimensionMismatch):
        GridSpec2D((0, 0), (0, 1), (3, 3))
    with pytest.raises(DimensionMismatch):
        GridSpec2D((0, 0), (1, 1), (1, 3))
