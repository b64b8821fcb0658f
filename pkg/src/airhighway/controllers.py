"""Goal-satisfaction controllers, the safety supervisor, MPC highway tracking and the follower law."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _mpc
from .errors import BRSMissing, InfeasibleHorizon, NoLeader, OutOfBounds
from .vehicles import relative_state


class Phase(str, Enum):
    PURSUIT = "Pursuit"
    LOCKED_IN = "LockedIn"
    ARRIVED = "Arrived"


@dataclass
class ControllerContext:
    V_H: object = None  # DecomposedBRS for the absolute goal, reusable for any target center
    V_P: object = None  # DecomposedBRS in relative (p_xr, v_xr, p_yr, v_yr) coordinates
    V_S: object = None  # Relative4D safety game BRS
    T: float = 4.0
    t_d: float = 2.0
    k_p: float = 1.0
    k_v: float = 2.0
    k_pursuit: float = 1.0
    pursuit_speed: float = 10.0
    join_pursuit_speed: float = 4.0
    u_max: float = 3.0
    v_max: float = 20.0
    safety_margin: float = 0.0
    mpc: dict = field(default_factory=lambda: dict(horizon=4.0, dt=0.1, iters=200))

    def __post_init__(self):
        if self.T <= 0 or self.t_d <= 0:
            raise ValueError("horizons must be positive")
        if self.k_p <= 0 or self.k_v <= 0:
            raise ValueError("gains must be positive")


def _clip(u, u_max):
    return np.clip(np.asarray(u, dtype=float), -u_max, u_max)


def _to_xy(u4):
    return np.array([u4[0], u4[1]])


def pure_pursuit(p, v, target_p, target_v, speed, gain, u_max):
    """Accelerate toward the line-of-sight point while damping velocity toward ``speed`` along it.

    ``target_v`` is the target's own velocity; the commanded velocity is that
    plus ``speed`` along the line of sight, which for a static target reduces to
    plain pursuit.
    """
    los = np.asarray(target_p, dtype=float) - p
    dist = float(np.linalg.norm(los))
    want = np.asarray(target_v, dtype=float).copy()
    if dist > 0:
        want += min(speed, gain * dist) * los / dist
    return _clip(gain * (want - v), u_max)


def _goal_phase(brs, x4, T, u_max):
    """Shared lock-in logic on a single4d-ordered state. Returns (u, phase)."""
    if brs.contains_target(x4):
        return np.zeros(2), Phase.ARRIVED
    try:
        value = brs.value_at(-T, x4)
    except OutOfBounds:
        return None, Phase.PURSUIT
    if value <= 0:
        return _clip(_to_xy(brs.optimal_control(-T, x4)), u_max), Phase.LOCKED_IN
    return None, Phase.PURSUIT


def run_up_pursuit(p, v, entry, v_bar, run_up, speed, gain, u_max):
    """Approach ``entry`` along the line through it in direction ``v_bar``, arriving at ``v_bar``.

    The desired velocity steers onto the line laterally. Along the line it
    backs up to ``run_up`` meters upstream when the vehicle is downstream of
    the entry (or at rest or backing up and not yet far enough), and otherwise
    cruises forward at ``|v_bar|``. The sign of the along-track velocity acts
    as the memory bit, so the law stays a pure function of the state.
    """
    v_bar = np.asarray(v_bar, dtype=float)
    sp = float(np.linalg.norm(v_bar))
    if sp == 0.0:
        return pure_pursuit(p, v, entry, v_bar, speed, gain, u_max)
    d_hat = v_bar / sp
    n_hat = np.array([-d_hat[1], d_hat[0]])
    e = np.asarray(p, dtype=float) - np.asarray(entry, dtype=float)
    a, c = float(e @ d_hat), float(e @ n_hat)
    if a > 0.0 or (float(np.dot(v, d_hat)) <= 0.0 and a > -run_up):
        v_a = -min(speed, gain * (a + run_up))
    else:
        v_a = sp
    v_c = -math.copysign(min(speed, gain * abs(c)), c)
    want = v_a * d_hat + v_c * n_hat
    return _clip(gain * (want - np.asarray(v, dtype=float)), u_max)


def merge_to_highway(x, x_bar_H, ctx):
    """Drive a Free vehicle to the highway entry state ``x_bar_H`` = (p_x, v_x, p_y, v_y)."""
    if ctx.V_H is None:
        raise BRSMissing("merge_to_highway needs V_H")
    brs = ctx.V_H.recentered(x_bar_H)
    u, phase = _goal_phase(brs, x.single4d(), ctx.T, ctx.u_max)
    if phase is Phase.PURSUIT:
        xb = np.asarray(x_bar_H, dtype=float)
        v_bar = xb[[1, 3]]
        sp = float(np.linalg.norm(v_bar))
        run_up = sp * ctx.T / 2 + sp * sp / (2 * ctx.u_max)
        u = run_up_pursuit(x.p, x.v, xb[[0, 2]], v_bar, run_up, ctx.pursuit_speed, ctx.k_pursuit, ctx.u_max)
    return u, phase


def nominal_offset(index, d_sep, d_hat):
    """Slot position relative to the leader: -(i - 1) d_sep d_hat."""
    return -(index - 1) * d_sep * np.asarray(d_hat, dtype=float)


def join_platoon(x_i, x_leader, index, d_hat, d_sep, ctx):
    """Drive a vehicle to slot ``index`` behind the leader (relative velocity zero)."""
    if ctx.V_P is None:
        raise BRSMissing("join_platoon needs V_P")
    if x_leader is None:
        raise NoLeader("no leader state to join")
    r = nominal_offset(index, d_sep, d_hat)
    brs = ctx.V_P.recentered((r[0], 0.0, r[1], 0.0))
    rel = relative_state(x_i, x_leader)
    rel4 = np.array([rel[0], rel[2], rel[1], rel[3]])
    u, phase = _goal_phase(brs, rel4, ctx.T, ctx.u_max)
    if phase is Phase.PURSUIT:
        u = pure_pursuit(x_i.p, x_i.v, x_leader.p + r, x_leader.v, ctx.join_pursuit_speed, ctx.k_pursuit,
                         ctx.u_max)
    return u, phase


def safety_values(i, others, world, ctx):
    """V_S(-t_d, x_i - x_j) for each j; relative states off the grid count as safe."""
    if ctx.V_S is None:
        raise BRSMissing("safety supervisor needs V_S")
    g = ctx.V_S.grid
    lo, hi = np.asarray(g.mins), np.asarray(g.maxs)
    xi = world.vehicles[i].state
    out = {}
    for j in others:
        rel = relative_state(xi, world.vehicles[j].state)
        if np.any(rel[:2] < lo[:2]) or np.any(rel[:2] > hi[:2]):
            continue
        rel = np.clip(rel, lo, hi)
        out[j] = (ctx.V_S.value_at(-ctx.t_d, rel), rel)
    return out


def safety_supervisor(i, world, ctx, nominal, Q):
    """Pass ``nominal`` through unless some neighbour in ``Q[i]`` is inside the safety BRS.

    Returns ``(control, breaches)`` where ``breaches`` lists the offending ids,
    most threatening first. On a breach the control is the evader's optimal
    control against the minimizing neighbour.
    """
    vals = safety_values(i, Q.get(i, ()), world, ctx)
    breaches = sorted((v, j) for j, (v, _) in vals.items() if v <= ctx.safety_margin)
    if not breaches:
        return nominal, []
    j = breaches[0][1]
    u = ctx.V_S.optimal_control(-ctx.t_d, vals[j][1], player=1)
    return _clip(u, ctx.u_max), [b[1] for b in breaches]


# ---------------------------------------------------------------- MPC


@dataclass
class MPCResult:
    u: np.ndarray  # (N, 2)
    s: np.ndarray  # (N,) path parameter of each rolled-out state
    cost: float


def mpc_rollout(x, u, dt):
    u = np.asarray(u, dtype=float)
    P = np.empty((len(u), 2))
    V = np.empty((len(u), 2))
    _mpc._rollout(np.asarray(x.p, float), np.asarray(x.v, float), u, float(dt), P, V)
    return P, V


def mpc_objective(x, h, v_hw, u, s, dt):
    """Transcribed tracking objective for controls ``u`` and path parameters ``s``."""
    P, V = mpc_rollout(x, u, dt)
    seg = np.subtract(h.end, h.start)
    return float(_mpc._objective(P, V, np.asarray(s, float), np.asarray(h.start, float), seg,
                                 v_hw * h.direction, float(dt)))


def mpc_initial_s(x, h, s0, u, dt):
    """Closest-point parameters of the rollout, made monotone within [s0, 1]."""
    P, _ = mpc_rollout(x, u, dt)
    seg = np.subtract(h.end, h.start)
    s = ((P - np.asarray(h.start)) @ seg) / float(seg @ seg)
    _mpc._project_s(s, float(s0))
    return s


def _steps(horizon, dt):
    if not dt > 0 or not horizon > 0:
        raise InfeasibleHorizon("horizon and dt must be positive")
    n = horizon / dt
    N = int(round(n))
    if N < 1 or abs(n - N) > 1e-9 * max(1.0, n):
        raise InfeasibleHorizon(f"dt={dt} does not divide horizon={horizon}")
    return N


def mpc_track_highway(x, h, s0, v_hw, horizon, dt, u_max, v_max, iters=200):
    """Projected-subgradient MPC; returns the full :class:`MPCResult`, apply ``u[0]``.

    The search starts from zero control with ``s`` fitted to the coasting
    rollout, so the result never costs more than that zero-control plan.
    """
    if not 0.0 <= s0 <= 1.0:
        raise ValueError("s0 must lie in [0, 1]")
    N = _steps(horizon, dt)
    u = np.zeros((N, 2))
    s = mpc_initial_s(x, h, s0, u, dt)
    seg = np.subtract(h.end, h.start).astype(float)
    args = (np.asarray(x.p, float), np.asarray(x.v, float))
    const = (float(s0), np.asarray(h.start, float), seg, v_hw * h.direction, float(dt), float(u_max),
             float(v_max), int(iters), 1.0)
    u, s, J = _mpc.solve(*args, u, s, *const, True)
    return MPCResult(u, s, float(J))


# ---------------------------------------------------------------- follower


def follower_control(p_lead, v_lead, u_lead, x, index, d_sep, d_hat, k_p, k_v, u_max=math.inf):
    """u = k_p (p_lead + r - p) + k_v (v_lead - v) + u_lead, clamped to ``u_max``."""
    r = nominal_offset(index, d_sep, d_hat)
    u = k_p * (np.asarray(p_lead) + r - x.p) + k_v * (np.asarray(v_lead) - x.v) + np.asarray(u_lead)
    return _clip(u, u_max)
