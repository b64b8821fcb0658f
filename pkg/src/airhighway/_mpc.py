"""Projected subgradient solver for the highway-tracking MPC problem.

Decision variables are the controls ``u[k]`` (k < N) and the path
parameters ``s[k]`` of the nominal points for states ``k = 1..N``. The
objective is

    J = sum_k dt * (|p_k - pbar(s_k)| + |v_k - vbar| + (1 - s_k))

with the exact double-integrator rollout. Controls are projected onto the
box and then clipped forward in time so every rolled-out velocity stays in
``[-v_max, v_max]``; ``s`` is projected onto nondecreasing sequences in
``[s0, 1]`` by pool-adjacent-violators followed by clipping.
"""

import numpy as np

from ._accel import maybe_njit

_EPS = 1e-12


@maybe_njit
def _rollout(p0, v0, u, dt, P, V):
    N = u.shape[0]
    p = p0.copy()
    v = v0.copy()
    for k in range(N):
        for a in range(2):
            p[a] = p[a] + v[a] * dt + 0.5 * u[k, a] * dt * dt
            v[a] = v[a] + u[k, a] * dt
            P[k, a] = p[a]
            V[k, a] = v[a]


@maybe_njit
def _objective(P, V, s, start, seg, vbar, dt):
    J = 0.0
    for k in range(P.shape[0]):
        ex = P[k, 0] - start[0] - s[k] * seg[0]
        ey = P[k, 1] - start[1] - s[k] * seg[1]
        fx = V[k, 0] - vbar[0]
        fy = V[k, 1] - vbar[1]
        J += dt * (np.sqrt(ex * ex + ey * ey) + np.sqrt(fx * fx + fy * fy) + 1.0 - s[k])
    return J


@maybe_njit
def _project_u(u, v0, dt, u_max, v_max):
    N = u.shape[0]
    v = v0.copy()
    for k in range(N):
        for a in range(2):
            lo = max(-u_max, (-v_max - v[a]) / dt)
            hi = min(u_max, (v_max - v[a]) / dt)
            if lo > hi:  # start already beyond the limit: brake as hard as allowed
                lo = hi = -u_max if v[a] > 0 else u_max
            x = u[k, a]
            if x < lo:
                x = lo
            elif x > hi:
                x = hi
            u[k, a] = x
            v[a] = v[a] + x * dt


@maybe_njit
def _project_s(s, s0):
    """Pool adjacent violators for a nondecreasing fit, then clip to [s0, 1]."""
    n = s.shape[0]
    vals = np.empty(n)
    wts = np.empty(n)
    cnt = np.empty(n, dtype=np.int64)
    m = 0
    for k in range(n):
        vals[m] = s[k]
        wts[m] = 1.0
        cnt[m] = 1
        m += 1
        while m > 1 and vals[m - 2] > vals[m - 1]:
            w = wts[m - 2] + wts[m - 1]
            vals[m - 2] = (vals[m - 2] * wts[m - 2] + vals[m - 1] * wts[m - 1]) / w
            wts[m - 2] = w
            cnt[m - 2] += cnt[m - 1]
            m -= 1
    k = 0
    for b in range(m):
        x = min(max(vals[b], s0), 1.0)
        for _ in range(cnt[b]):
            s[k] = x
            k += 1


@maybe_njit
def _subgradient(P, V, u, s, start, seg, vbar, dt, gu, gs):
    N = P.shape[0]
    gp = np.zeros((N, 2))
    gv = np.zeros((N, 2))
    for k in range(N):
        ex = P[k, 0] - start[0] - s[k] * seg[0]
        ey = P[k, 1] - start[1] - s[k] * seg[1]
        ne = np.sqrt(ex * ex + ey * ey)
        if ne > _EPS:
            gp[k, 0] = dt * ex / ne
            gp[k, 1] = dt * ey / ne
        fx = V[k, 0] - vbar[0]
        fy = V[k, 1] - vbar[1]
        nf = np.sqrt(fx * fx + fy * fy)
        if nf > _EPS:
            gv[k, 0] = dt * fx / nf
            gv[k, 1] = dt * fy / nf
        gs[k] = -(gp[k, 0] * seg[0] + gp[k, 1] * seg[1]) - dt
    # u[m] moves p_k by dt^2 (k - m + 1/2) and v_k by dt for every k >= m
    for a in range(2):
        acc_p = 0.0
        acc_pk = 0.0
        acc_v = 0.0
        for m in range(N - 1, -1, -1):
            acc_p += gp[m, a]
            acc_pk += gp[m, a] * m
            acc_v += gv[m, a]
            gu[m, a] = dt * dt * (acc_pk - (m - 0.5) * acc_p) + dt * acc_v


@maybe_njit
def solve(p0, v0, u, s, s0, start, seg, vbar, dt, u_max, v_max, iters, step0, optimize_u):
    """Minimize from the given (u, s); returns the best (u, s, J) seen."""
    N = u.shape[0]
    P = np.empty((N, 2))
    V = np.empty((N, 2))
    _project_u(u, v0, dt, u_max, v_max)
    _project_s(s, s0)
    _rollout(p0, v0, u, dt, P, V)
    J = _objective(P, V, s, start, seg, vbar, dt)
    best_u = u.copy()
    best_s = s.copy()
    best_J = J
    gu = np.zeros((N, 2))
    gs = np.zeros(N)
    step = step0
    for _ in range(iters):
        _subgradient(P, V, u, s, start, seg, vbar, dt, gu, gs)
        if not optimize_u:
            gu[:, :] = 0.0
        accepted = False
        for _ in range(30):
            u_new = u - step * gu
            s_new = s - step * gs / max(1.0, seg[0] * seg[0] + seg[1] * seg[1])
            _project_u(u_new, v0, dt, u_max, v_max)
            _project_s(s_new, s0)
            _rollout(p0, v0, u_new, dt, P, V)
            J_new = _objective(P, V, s_new, start, seg, vbar, dt)
            if J_new < J:
                u = u_new
                s = s_new
                J = J_new
                accepted = True
                step *= 1.5
                break
            step *= 0.5
        if not accepted:
            break
        if J < best_J:
            best_J = J
            best_u[:, :] = u
            best_s[:] = s
    return best_u, best_s, best_J
