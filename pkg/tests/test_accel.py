"""Compiled kernels and the pure-numpy fallback agree."""

import json
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from airhighway import _accel
from airhighway.grid import Grid
from airhighway.reachability import BoxTarget, DynamicsSpec, SafetyTarget, _stepper, implicit_surface

WORKER = textwrap.dedent("""
    import json, sys
    import numpy as np
    from airhighway import _accel
    from airhighway.costmap import GridSpec2D, random_blocks
    from airhighway.eikonal import extract_path, solve_fmm
    from airhighway.controllers import mpc_track_highway
    from airhighway.highways import Highway
    from airhighway.vehicles import VehicleState
    g = GridSpec2D((0, 0), (1, 1), (61, 61))
    cm = random_blocks(g, np.random.default_rng(4), block=6)
    sol = solve_fmm(cm, (0.3, 0.4))
    path = extract_path(sol, (0.9, 0.8))
    res = mpc_track_highway(VehicleState((40.0, 3.0), (8.0, -1.0)), Highway((0, 0), (500, 0), 10.0), 0.08, 10.0,
                            2.0, 0.1, 3.0, 20.0, iters=100)
    json.dump(dict(backend=_accel.backend(), V=sol.values.tolist(), path=path.points.tolist(),
                   u=res.u.tolist(), cost=res.cost), sys.stdout)
""")


def _run(pure):
    env = dict(os.environ, AIRHIGHWAY_PURE_NUMPY="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", WORKER], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


@pytest.mark.skipif(not _accel.NUMBA_AVAILABLE, reason="numba not installed")
def test_backends_agree():
    fast, slow = _run(False), _run(True)
    assert fast["backend"] == "numba" and slow["backend"] == "numpy"
    assert np.allclose(fast["V"], slow["V"], rtol=1e-12, atol=1e-12)
    assert np.allclose(fast["path"], slow["path"], atol=1e-9)
    assert np.allclose(fast["u"], slow["u"], atol=1e-9)
    assert fast["cost"] == pytest.approx(slow["cost"], rel=1e-9)


@pytest.mark.skipif(not _accel.NUMBA_AVAILABLE, reason="numba not installed")
@pytest.mark.parametrize("kind, target, grid", [
    ("double2d", BoxTarget((0, 0), (0.3, 0.3)), Grid((-2, -2), (2, 2), (41, 41))),
    ("single4d", BoxTarget((0, 0, 0, 0), (0.5,) * 4), Grid((-2,) * 4, (2,) * 4, (9, 11, 9, 11))),
    ("relative4d", SafetyTarget(1.0), Grid((-3, -3, -2, -2), (3, 3, 2, 2), (11,) * 4)),
])
@pytest.mark.parametrize("freeze", [True, False])
def test_hj_step_parity(kind, target, grid, freeze):
    dyn = DynamicsSpec(kind, 1.0, 0.5 if kind == "relative4d" else 0.0)
    mode = dyn.default_mode
    step = _stepper(dyn, mode, grid)
    V = implicit_surface(target, grid, dyn).values
    dt = 0.5 / step.max_rate()
    a = b = V
    for _ in range(5):
        a = step(a, dt, freeze=freeze, use_numba=True)
        b = step(b, dt, freeze=freeze, use_numba=False)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
