"""Explicit Lax-Friedrichs step for separable double-integrator Hamiltonians.

Every dynamics kind handled here has a Hamiltonian of the form

    H(x, q) = sum_m q[pos_m] * x[vel_m] + sum_c w_c * |cols_c . q|

where the first sum is the drift and each column ``c`` is one control
component of one player, ``w_c`` its bound with a sign (+ for a maximizing
player, - for a minimizing one). Dissipation on axis ``k`` is
``alpha_k = alpha_const[k] + |x[vel]|`` when ``k`` is a drift axis.

Boundary differences use linear extrapolation, so the one-sided differences
at an edge both equal the interior difference.
"""

import numpy as np

from ._accel import USE_NUMBA, maybe_njit


@maybe_njit
def _step_compiled(V, out, counts, strides, lo, h, drift_vel, cols, w, alpha_const, dt, freeze):
    d = counts.shape[0]
    n = V.shape[0]
    ncol = cols.shape[0]
    idx = np.zeros(d, dtype=np.int64)
    q = np.zeros(d)
    diss = np.zeros(d)
    for f in range(n):
        rem = f
        for k in range(d):
            idx[k] = rem // strides[k]
            rem -= idx[k] * strides[k]
        v0 = V[f]
        for k in range(d):
            s = strides[k]
            i = idx[k]
            if i == 0:
                dp = (V[f + s] - v0) / h[k]
                dm = dp
            elif i == counts[k] - 1:
                dm = (v0 - V[f - s]) / h[k]
                dp = dm
            else:
                dp = (V[f + s] - v0) / h[k]
                dm = (v0 - V[f - s]) / h[k]
            q[k] = 0.5 * (dp + dm)
            diss[k] = 0.5 * (dp - dm)
        ham = 0.0
        lf = 0.0
        for k in range(d):
            a = alpha_const[k]
            j = drift_vel[k]
            if j >= 0:
                xv = lo[j] + idx[j] * h[j]
                ham += q[k] * xv
                a += abs(xv)
            lf += a * diss[k]
        for c in range(ncol):
            dot = 0.0
            for k in range(d):
                dot += cols[c, k] * q[k]
            ham += w[c] * abs(dot)
        cand = v0 + dt * (ham + lf)
        if freeze and cand > v0:
            cand = v0
        out[f] = cand


def _diffs(V, h, axis):
    """Forward and backward differences along ``axis`` with extrapolated ends."""
    g = np.diff(V, axis=axis) / h
    n = V.shape[axis]
    first = np.take(g, [0], axis=axis)
    last = np.take(g, [n - 2], axis=axis)
    dp = np.concatenate([g, last], axis=axis)
    dm = np.concatenate([first, g], axis=axis)
    return dp, dm


def _step_numpy(V, grid, drift_vel, cols, w, alpha_const, dt, freeze):
    axes = np.meshgrid(*grid.axes, indexing="ij", sparse=True)
    h = grid.spacing
    ham = np.zeros_like(V)
    lf = np.zeros_like(V)
    qs = []
    for k in range(V.ndim):
        dp, dm = _diffs(V, h[k], k)
        q = 0.5 * (dp + dm)
        qs.append(q)
        a = alpha_const[k]
        j = drift_vel[k]
        if j >= 0:
            ham += q * axes[j]
            a = a + np.abs(axes[j])
        lf += a * 0.5 * (dp - dm)
    for c in range(cols.shape[0]):
        dot = sum(cols[c, k] * qs[k] for k in range(V.ndim) if cols[c, k] != 0.0)
        ham += w[c] * np.abs(dot)
    cand = V + dt * (ham + lf)
    return np.minimum(V, cand) if freeze else cand


class Stepper:
    """Advance a grid-shaped value array by one explicit step backward in time."""

    def __init__(self, grid, drift_vel, cols, w, alpha_const):
        self.grid = grid
        self.drift_vel = np.asarray(drift_vel, dtype=np.int64)
        self.cols = np.ascontiguousarray(cols, dtype=np.float64)
        self.w = np.asarray(w, dtype=np.float64)
        self.alpha_const = np.asarray(alpha_const, dtype=np.float64)
        counts = np.asarray(grid.counts, dtype=np.int64)
        self._counts = counts
        self._strides = np.cumprod(np.concatenate([[1], counts[::-1]]))[:-1][::-1].astype(np.int64)
        self._lo = np.asarray(grid.mins, dtype=np.float64)
        self._h = np.asarray(grid.spacing, dtype=np.float64)
        self._buf = None

    def max_rate(self):
        """Sum over axes of the largest dissipation coefficient divided by spacing."""
        total = 0.0
        for k in range(self.grid.ndim):
            a = self.alpha_const[k]
            j = self.drift_vel[k]
            if j >= 0:
                a += max(abs(self.grid.mins[j]), abs(self.grid.maxs[j]))
            total += a / self._h[k]
        return total

    def __call__(self, V, dt, freeze=True, use_numba=None):
        use_numba = USE_NUMBA if use_numba is None else use_numba
        if not use_numba:
            return _step_numpy(V, self.grid, self.drift_vel, self.cols, self.w, self.alpha_const, dt, freeze)
        flat = np.ascontiguousarray(V).reshape(-1)
        if self._buf is None or self._buf.shape != flat.shape:
            self._buf = np.empty_like(flat)
        _step_compiled(flat, self._buf, self._counts, self._strides, self._lo, self._h,
                       self.drift_vel, self.cols, self.w, self.alpha_const, float(dt), bool(freeze))
        return self._buf.reshape(V.shape).copy()
