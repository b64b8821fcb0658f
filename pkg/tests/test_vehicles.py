import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from airhighway.errors import IllegalTransition, NonFiniteInput
from airhighway.vehicles import (Event, Faulty, Follower, Free, Leader, Vehicle, VehicleState, World,
                                 relative_state, request_transition, safety_check_set, step_dynamics)

finite = st.floats(-100, 100)
pair = st.tuples(finite, finite)


def test_step_examples():
    x = step_dynamics(VehicleState((0, 0), (1, 0)), (0, 0), 1.0, 3, 20)
    assert np.array_equal(x.p, (1, 0)) and np.array_equal(x.v, (1, 0))
    x = step_dynamics(VehicleState((0, 0), (0, 0)), (2, 0), 1.0, 1, 20)
    assert np.array_equal(x.p, (0.5, 0)) and np.array_equal(x.v, (1, 0))
    x = step_dynamics(VehicleState((0, 0), (19.9, 0)), (1, 0), 1.0, 3, 20)
    assert x.v[0] == 20
    with pytest.raises(NonFiniteInput):
        step_dynamics(VehicleState((0, 0), (0, 0)), (np.nan, 0), 1.0, 3, 20)


@given(pair, pair, st.integers(1, 50), st.floats(0.01, 1))
def test_drift_identity(p, v, n, dt):
    x = VehicleState(p, v)
    y = x
    for _ in range(n):
        y = step_dynamics(y, (0, 0), dt, 3, 200)
    assert np.array_equal(y.v, x.v)
    assert np.allclose(y.p, x.p + n * dt * x.v, atol=1e-9)


def test_relative_examples():
    xi = VehicleState((3, 4), (1, 0))
    xj = VehicleState((1, 1), (0, 2))
    assert np.array_equal(relative_state(xi, xj), (2, 3, 1, -2))
    assert np.array_equal(relative_state(xi, xi), np.zeros(4))


@given(pair, pair, pair, pair)
def test_relative_antisymmetry(pi, vi, pj, vj):
    a, b = VehicleState(pi, vi), VehicleState(pj, vj)
    assert np.all(relative_state(a, b) + relative_state(b, a) == 0)


def test_transition_table():
    assert request_transition(Free(), Event.MERGE_COMPLETE, highway=0, platoon=1) == Leader(0, 1)
    assert request_transition(Free(), Event.JOIN_COMPLETE, platoon=1, index=3) == Follower(1, 3)
    assert request_transition(Leader(0, 1), Event.JOIN_COMPLETE, platoon=2, index=2) == Follower(2, 2)
    assert request_transition(Follower(1, 3), Event.SPLIT_FROM_PLATOON, highway=0, platoon=4) == Leader(0, 4)
    assert request_transition(Leader(0, 1), Event.LEAVE_HIGHWAY) == Free()
    assert request_transition(Follower(1, 2), Event.LEAVE_HIGHWAY) == Free()
    assert request_transition(Follower(1, 2), Event.LEADER_LEFT, highway=0) == Leader(0, 1)
    assert request_transition(Follower(1, 4), Event.LEADER_LEFT, highway=0) == Follower(1, 3)
    for m in (Free(), Leader(0, 1), Follower(1, 2)):
        assert request_transition(m, Event.FAULT_DETECTED) == Faulty(0.0)
    for m, e in ((Faulty(0.5), Event.MERGE_COMPLETE), (Free(), Event.LEADER_LEFT), (Leader(0, 1), Event.MERGE_COMPLETE),
                 (Free(), Event.LEAVE_HIGHWAY), (Faulty(0.0), Event.JOIN_COMPLETE)):
        with pytest.raises(IllegalTransition):
            request_transition(m, e, highway=0, platoon=0, index=2)


def _world(n, **kw):
    return World([Vehicle(i, VehicleState((10.0 * i, 0), (0, 0))) for i in range(1, n + 1)], **kw)


def test_leader_left_reindexes():
    w = _world(4)
    pl = w.merge_complete(1, 0, 10.0)
    for v in (2, 3, 4):
        w.join_complete(v, pl.id)
    w.leave_highway(1)
    assert pl.members == [2, 3, 4]
    assert w.vehicles[2].mode == Leader(0, pl.id)
    assert w.vehicles[4].mode == Follower(pl.id, 3)
    w.check_consistency()


def test_illegal_transition_keeps_state():
    w = _world(2)
    w.fault(1)
    before = w.vehicles[1].mode
    with pytest.raises(IllegalTransition):
        w.merge_complete(1, 0, 10.0)
    assert w.vehicles[1].mode == before


def test_check_sets():
    w = _world(5)
    Q = safety_check_set(w)
    assert all(len(q) == 4 for q in Q.values())
    w = _world(5, detection_radius=1e9)
    pl = w.merge_complete(1, 0, 10.0)
    for v in (2, 3, 4):
        w.join_complete(v, pl.id)
    Q = safety_check_set(w)
    assert Q[1] == [2, 5] and Q[4] == [3, 5]
    assert sorted(Q[2]) == [1, 3, 5] and sorted(Q[3]) == [2, 4, 5]
    w = _world(4)
    pl = w.merge_complete(1, 0, 10.0)
    for v in (2, 3, 4):
        w.join_complete(v, pl.id)
    assert sorted(safety_check_set(w)[2]) == [1, 3]


def test_fault_removed_exactly_at_t_d():
    w = _world(3, t_d=2.0)
    w.fault(2)
    for _ in range(39):
        w.advance_faults(0.05)
    assert 2 in safety_check_set(w)[1]
    assert w.advance_faults(0.05) == [2]
    Q = safety_check_set(w)
    assert 2 not in Q and all(2 not in q for q in Q.values())


ops = st.lists(st.tuples(st.sampled_from(["merge", "join", "reserve", "arrive", "leave", "split", "fault",
                                          "tick", "release"]),
                         st.integers(1, 6), st.integers(0, 3)), max_size=60)


@settings(max_examples=300)
@given(ops)
def test_mode_machine_fuzz(seq):
    w = _world(6, t_d=0.2)
    for op, vid, k in seq:
        pids = sorted(w.platoons)
        pid = pids[k % len(pids)] if pids else None
        try:
            if op == "merge":
                w.merge_complete(vid, k, 10.0)
            elif op == "join" and pid is not None and w.platoons[pid].members[0] != vid:
                w.join_complete(vid, pid, in_slot=bool(k % 2))
            elif op == "reserve" and pid is not None and isinstance(w.vehicles[vid].mode, Free) \
                    and w.platoon_of(vid) is None:
                w.reserve_slot(vid, pid)
            elif op == "arrive":
                w.arrived(vid)
            elif op == "leave":
                w.leave_highway(vid)
            elif op == "split" and w.platoon_of(vid) is not None and vid not in w.platoon_of(vid).joining:
                w.split(vid)
            elif op == "fault":
                w.fault(vid)
            elif op == "tick":
                w.advance_faults(0.1)
            elif op == "release":
                w.release_slot(vid)
        except IllegalTransition:
            pass
        w.check_consistency()
        for pl in w.platoons.values():
            assert pl.members and isinstance(w.vehicles[pl.members[0]].mode, Leader)
            assert len(set(pl.members)) == len(pl.members)
        for v in w.vehicles.values():
            if isinstance(v.mode, Follower):
                assert v.mode.index >= 2
            if isinstance(v.mode, Faulty):
                assert 0 <= v.mode.clock <= w.t_d
