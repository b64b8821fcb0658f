"""First-order fast marching on a 2-D node grid (4-neighbour upwind stencil)."""

import heapq
import math

import numpy as np

from ._accel import USE_NUMBA, maybe_njit

FAR, TRIAL, ACCEPTED = 0, 1, 2


@maybe_njit
def _two_sided(a, b, c, hx, hy):
    """Root of (V-a)^2/hx^2 + (V-b)^2/hy^2 = c^2 with V >= max(a, b), else inf."""
    wa = 1.0 / (hx * hx)
    wb = 1.0 / (hy * hy)
    A = wa + wb
    B = -2.0 * (a * wa + b * wb)
    C = a * a * wa + b * b * wb - c * c
    disc = B * B - 4.0 * A * C
    if disc < 0.0:
        return np.inf
    v = (-B + math.sqrt(disc)) / (2.0 * A)
    if v >= a and v >= b:
        return v
    return np.inf


@maybe_njit
def upwind_update(a, b, c, hx, hy):
    """Solve max(V-a,0)^2/hx^2 + max(V-b,0)^2/hy^2 = c^2 for V.

    ``a`` and ``b`` are the smallest accepted neighbour values along x and y
    (``inf`` when there is none).
    """
    v = min(a + c * hx, b + c * hy)
    if a == np.inf or b == np.inf:
        return v
    return min(v, _two_sided(a, b, c, hx, hy))


@maybe_njit
def _node_update(a, ca, b, cb, c, hx, hy):
    """Upwind update with edge-averaged costs.

    One-sided steps use the trapezoid mean of the two endpoint costs; the
    two-sided step blends the node cost with both upwind neighbours. For a
    uniform map this reduces to :func:`upwind_update`.
    """
    v = np.inf
    if a < np.inf:
        v = a + 0.5 * (c + ca) * hx
    if b < np.inf:
        v = min(v, b + 0.5 * (c + cb) * hy)
    if a < np.inf and b < np.inf:
        v = min(v, _two_sided(a, b, 0.5 * c + 0.25 * (ca + cb), hx, hy))
    return v


@maybe_njit
def _neighbour_min(V, cost, state, i, j, axis):
    """Smallest accepted neighbour value along ``axis`` and that neighbour's cost."""
    nx, ny = V.shape
    best = np.inf
    cbest = 0.0
    if axis == 0:
        if i > 0 and state[i - 1, j] == ACCEPTED and V[i - 1, j] < best:
            best = V[i - 1, j]
            cbest = cost[i - 1, j]
        if i < nx - 1 and state[i + 1, j] == ACCEPTED and V[i + 1, j] < best:
            best = V[i + 1, j]
            cbest = cost[i + 1, j]
    else:
        if j > 0 and state[i, j - 1] == ACCEPTED and V[i, j - 1] < best:
            best = V[i, j - 1]
            cbest = cost[i, j - 1]
        if j < ny - 1 and state[i, j + 1] == ACCEPTED and V[i, j + 1] < best:
            best = V[i, j + 1]
            cbest = cost[i, j + 1]
    return best, cbest


@maybe_njit
def _update_at(V, cost, state, i, j, hx, hy):
    a, ca = _neighbour_min(V, cost, state, i, j, 0)
    b, cb = _neighbour_min(V, cost, state, i, j, 1)
    return _node_update(a, ca, b, cb, cost[i, j], hx, hy)


@maybe_njit
def _heap_push(keys, items, n, key, item):
    k = n
    keys[k] = key
    items[k] = item
    while k > 0:
        parent = (k - 1) >> 1
        if keys[parent] <= keys[k]:
            break
        keys[parent], keys[k] = keys[k], keys[parent]
        items[parent], items[k] = items[k], items[parent]
        k = parent
    return n + 1


@maybe_njit
def _heap_pop(keys, items, n):
    key = keys[0]
    item = items[0]
    n -= 1
    keys[0] = keys[n]
    items[0] = items[n]
    k = 0
    while True:
        left = 2 * k + 1
        if left >= n:
            break
        child = left
        if left + 1 < n and keys[left + 1] < keys[left]:
            child = left + 1
        if keys[k] <= keys[child]:
            break
        keys[k], keys[child] = keys[child], keys[k]
        items[k], items[child] = items[child], items[k]
        k = child
    return key, item, n


@maybe_njit
def _march_compiled(cost, hx, hy, V, state, order):
    """March outward from the ACCEPTED nodes and the seeded TRIAL nodes in ``state``."""
    nx, ny = cost.shape
    cap = 8 * nx * ny + 16
    keys = np.empty(cap)
    items = np.empty(cap, dtype=np.int64)
    n = 0
    n_acc = 0
    for i in range(nx):
        for j in range(ny):
            if state[i, j] == ACCEPTED:
                order[n_acc] = V[i, j]
                n_acc += 1
            elif state[i, j] == TRIAL:
                n = _heap_push(keys, items, n, V[i, j], i * ny + j)
    for i in range(nx):
        for j in range(ny):
            if state[i, j] == ACCEPTED:
                for d in range(4):
                    ii = i + (1 if d == 0 else -1 if d == 1 else 0)
                    jj = j + (1 if d == 2 else -1 if d == 3 else 0)
                    if ii < 0 or ii >= nx or jj < 0 or jj >= ny or state[ii, jj] == ACCEPTED:
                        continue
                    v = _update_at(V, cost, state, ii, jj, hx, hy)
                    if v < V[ii, jj]:
                        V[ii, jj] = v
                        state[ii, jj] = TRIAL
                        n = _heap_push(keys, items, n, v, ii * ny + jj)
    while n > 0:
        key, item, n = _heap_pop(keys, items, n)
        i = item // ny
        j = item - i * ny
        if state[i, j] == ACCEPTED or key > V[i, j]:
            continue
        state[i, j] = ACCEPTED
        order[n_acc] = V[i, j]
        n_acc += 1
        for d in range(4):
            ii = i + (1 if d == 0 else -1 if d == 1 else 0)
            jj = j + (1 if d == 2 else -1 if d == 3 else 0)
            if ii < 0 or ii >= nx or jj < 0 or jj >= ny or state[ii, jj] == ACCEPTED:
                continue
            v = _update_at(V, cost, state, ii, jj, hx, hy)
            if v < V[ii, jj]:
                V[ii, jj] = v
                state[ii, jj] = TRIAL
                if n >= cap:
                    return -1
                n = _heap_push(keys, items, n, v, ii * ny + jj)
    return n_acc


def _march_heapq(cost, hx, hy, V, state, order):
    nx, ny = cost.shape
    heap = []
    n_acc = 0
    acc = np.argwhere(state == ACCEPTED)
    for i, j in acc:
        order[n_acc] = V[i, j]
        n_acc += 1

    def relax(i, j):
        for ii, jj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if ii < 0 or ii >= nx or jj < 0 or jj >= ny or state[ii, jj] == ACCEPTED:
                continue
            v = _update_at(V, cost, state, ii, jj, hx, hy)
            if v < V[ii, jj]:
                V[ii, jj] = v
                state[ii, jj] = TRIAL
                heapq.heappush(heap, (v, ii, jj))

    for i, j in np.argwhere(state == TRIAL):
        heapq.heappush(heap, (V[i, j], int(i), int(j)))
    for i, j in acc:
        relax(int(i), int(j))
    while heap:
        v, i, j = heapq.heappop(heap)
        if state[i, j] == ACCEPTED or v > V[i, j]:
            continue
        state[i, j] = ACCEPTED
        order[n_acc] = v
        n_acc += 1
        relax(i, j)
    return n_acc


def march(cost, hx, hy, V, state):
    """Run fast marching in place. Returns the accepted values in acceptance order.

    Nodes marked TRIAL on entry keep their value as a tentative upper bound;
    ACCEPTED nodes are fixed.
    """
    order = np.empty(cost.size)
    if USE_NUMBA:
        n = _march_compiled(cost, hx, hy, V, state, order)
        if n < 0:  # pragma: no cover
            raise RuntimeError("fast marching heap overflow")
    else:
        n = _march_heapq(cost, hx, hy, V, state, order)
    return order[:n]
