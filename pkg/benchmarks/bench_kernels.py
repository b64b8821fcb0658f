"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read at import
time. Usage: ``python benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    fn()  # warm-up, includes compilation for numba
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def worker(repeat):
    from airhighway import _accel
    from airhighway.controllers import mpc_track_highway
    from airhighway.costmap import GridSpec2D, random_smooth
    from airhighway.eikonal import solve_fmm
    from airhighway.grid import Grid
    from airhighway.highways import Highway
    from airhighway.reachability import BoxTarget, DynamicsSpec, _stepper, implicit_surface
    from airhighway.vehicles import VehicleState

    rng = np.random.default_rng(0)
    cmap = random_smooth(GridSpec2D((0, 0), (1, 1), (201, 201)), rng)
    fmm = lambda: solve_fmm(cmap, (0.5, 0.5))

    dyn = DynamicsSpec("single4d", 1.0)
    g = Grid((-4, -3, -4, -3), (4, 3, 4, 3), (31,) * 4)
    V0 = implicit_surface(BoxTarget((0, 0, 0, 0), (1, 0.5, 1, 0.5)), g, dyn).values
    step = _stepper(dyn, "goal", g)
    dt = 0.9 / step.max_rate()

    def hj():
        V = V0.copy()
        for _ in range(10):
            V = step(V, dt)

    h = Highway((0.0, 0.0), (500.0, 0.0), 10.0)
    starts = [VehicleState(rng.uniform((0, -20), (400, 20)), rng.uniform(-5, 15, 2)) for _ in range(10)]

    def mpc():
        for x in starts:
            mpc_track_highway(x, h, h.project(x.p), 10.0, 4.0, 0.1, 3.0, 20.0)

    out = {"backend": _accel.backend()}
    for name, fn in (("fmm_201x201", fmm), ("hj_step_31^4_x10", hj), ("mpc_x10", mpc)):
        out[name] = _best(fn, repeat)
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        worker(args.repeat)
        return
    rows = {}
    for flag in ("0", "1"):
        env = dict(os.environ, AIRHIGHWAY_PURE_NUMPY=flag)
        res = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat)], env=env,
                             capture_output=True, text=True, check=True)
        data = json.loads(res.stdout.strip().splitlines()[-1])
        rows[data.pop("backend")] = data
    names = list(rows["numba"])
    print(f"{'kernel':<20}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for n in names:
        a, b = rows["numba"][n], rows["numpy"][n]
        print(f"{n:<20}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}")


if __name__ == "__main__":
    main()
