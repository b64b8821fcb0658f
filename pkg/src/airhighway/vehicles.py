"""Vehicle dynamics, the Free/Leader/Follower/Faulty mode machine and platoon bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import IllegalTransition, NonFiniteInput


@dataclass
class VehicleState:
    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(2)
        self.v = np.asarray(self.v, dtype=float).reshape(2)

    def single4d(self):
        """State in (p_x, v_x, p_y, v_y) order."""
        return np.array([self.p[0], self.v[0], self.p[1], self.v[1]])

    def copy(self):
        return VehicleState(self.p.copy(), self.v.copy())


def step_dynamics(x, u, dt, u_max, v_max):
    """Exact double-integrator step with clamped control, then clamped velocity."""
    u = np.asarray(u, dtype=float)
    if not (np.all(np.isfinite(x.p)) and np.all(np.isfinite(x.v)) and np.all(np.isfinite(u)) and np.isfinite(dt)):
        raise NonFiniteInput("state, control and dt must be finite")
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = np.clip(u, -u_max, u_max)
    p = x.p + x.v * dt + 0.5 * u * dt * dt
    v = np.clip(x.v + u * dt, -v_max, v_max)
    return VehicleState(p, v)


def relative_state(x_i, x_j):
    """Relative4D state (p_xr, p_yr, v_xr, v_yr) of ``x_i`` with respect to ``x_j``."""
    return np.concatenate([x_i.p - x_j.p, x_i.v - x_j.v])


# ---------------------------------------------------------------- modes


class Event(str, Enum):
    MERGE_COMPLETE = "MergeComplete"
    JOIN_COMPLETE = "JoinComplete"
    SPLIT_FROM_PLATOON = "SplitFromPlatoon"
    LEAVE_HIGHWAY = "LeaveHighway"
    LEADER_LEFT = "LeaderLeft"
    FAULT_DETECTED = "FaultDetected"


@dataclass(frozen=True)
class Free:
    def __str__(self):
        return "Free"


@dataclass(frozen=True)
class Leader:
    highway: int
    platoon: int

    def __str__(self):
        return "Leader"


@dataclass(frozen=True)
class Follower:
    platoon: int
    index: int

    def __post_init__(self):
        if self.index < 2:
            raise ValueError("follower index must be at least 2")

    def __str__(self):
        return "Follower"


@dataclass(frozen=True)
class Faulty:
    clock: float = 0.0

    def __str__(self):
        return "Faulty"


def request_transition(mode, event, *, highway=None, platoon=None, index=None):
    """Next mode for ``mode`` under ``event``; raises :class:`IllegalTransition` otherwise.

    ``highway``, ``platoon`` and ``index`` describe the destination where the
    event needs one (a new platoon for MergeComplete, a slot for JoinComplete).
    """
    event = Event(event)
    if event is Event.FAULT_DETECTED:
        return mode if isinstance(mode, Faulty) else Faulty(0.0)
    if isinstance(mode, Free):
        if event is Event.MERGE_COMPLETE:
            return Leader(highway, platoon)
        if event is Event.JOIN_COMPLETE:
            return Follower(platoon, index)
    elif isinstance(mode, Leader):
        if event is Event.JOIN_COMPLETE:
            return Follower(platoon, index)
        if event is Event.LEAVE_HIGHWAY:
            return Free()
    elif isinstance(mode, Follower):
        if event is Event.SPLIT_FROM_PLATOON:
            return Leader(highway, platoon)
        if event is Event.LEAVE_HIGHWAY:
            return Free()
        if event is Event.JOIN_COMPLETE:
            return Follower(platoon, index)
        if event is Event.LEADER_LEFT:
            if mode.index == 2:
                return Leader(highway, mode.platoon)
            return Follower(mode.platoon, mode.index - 1)
    raise IllegalTransition(str(mode), event.value)


# ---------------------------------------------------------------- world


@dataclass
class Vehicle:
    id: int
    state: VehicleState
    mode: object = field(default_factory=Free)
    scripted: bool = False  # ignores all controllers, e.g. an intruder
    descended: bool = False  # left the altitude level after a fault

    @property
    def live(self):
        return not self.descended


@dataclass
class Platoon:
    id: int
    highway: int
    members: list  # vehicle ids; members[0] is the leader, includes reserved (joining) slots
    d_sep: float
    joining: set = field(default_factory=set)  # members still maneuvering into their slot

    def index_of(self, vid):
        return self.members.index(vid) + 1

    @property
    def leader(self):
        return self.members[0] if self.members else None

    def formed(self):
        return [m for m in self.members if m not in self.joining]


class World:
    """Vehicles and platoons, with every membership change routed through the mode table."""

    def __init__(self, vehicles, t_d=2.0, detection_radius=np.inf):
        self.vehicles = {v.id: v for v in vehicles}
        self.platoons = {}
        self.t_d = float(t_d)
        self.detection_radius = float(detection_radius)
        self._next_platoon = 0
        self.log = []  # (vehicle id, old mode name, new mode name, event)

    def _set_mode(self, vid, new, event):
        veh = self.vehicles[vid]
        old = veh.mode
        veh.mode = new
        self.log.append((vid, str(old), str(new), Event(event).value))

    def create_platoon(self, highway, d_sep):
        pid = self._next_platoon
        self._next_platoon += 1
        self.platoons[pid] = Platoon(pid, highway, [], d_sep)
        return self.platoons[pid]

    def platoon_of(self, vid):
        for p in self.platoons.values():
            if vid in p.members:
                return p
        return None

    def merge_complete(self, vid, highway, d_sep):
        new = request_transition(self.vehicles[vid].mode, Event.MERGE_COMPLETE, highway=highway,
                                 platoon=self._next_platoon)
        pl = self.create_platoon(highway, d_sep)
        pl.members.append(vid)
        self._set_mode(vid, new, Event.MERGE_COMPLETE)
        return pl

    def reserve_slot(self, vid, pid):
        """Append ``vid`` to the platoon's slot list as a joining member; returns its index."""
        pl = self.platoons[pid]
        if vid not in pl.members:
            pl.members.append(vid)
            pl.joining.add(vid)
        return pl.index_of(vid)

    def release_slot(self, vid):
        pl = self.platoon_of(vid)
        if pl is not None and vid in pl.joining:
            pl.members.remove(vid)
            pl.joining.discard(vid)
            self._compact(pl)

    def join_complete(self, vid, pid, in_slot=True):
        """Switch ``vid`` into Follower mode of platoon ``pid`` at its reserved slot.

        A Leader or Follower leaving another platoon departs from it here, so
        the old platoon re-indexes (a new Leader takes over if needed). With
        ``in_slot=False`` the vehicle stays marked as joining until
        :meth:`arrived`.
        """
        pl = self.platoons[pid]
        index = self.reserve_slot(vid, pid)
        veh = self.vehicles[vid]
        new = request_transition(veh.mode, Event.JOIN_COMPLETE, platoon=pid, index=index)
        self._depart(vid, keep=pl)
        self._set_mode(vid, new, Event.JOIN_COMPLETE)
        if in_slot:
            pl.joining.discard(vid)

    def arrived(self, vid):
        pl = self.platoon_of(vid)
        if pl is not None and isinstance(self.vehicles[vid].mode, Follower):
            pl.joining.discard(vid)

    def _compact(self, pl, leader_left=False):
        """Re-index after a departure; a Follower now in front takes over as Leader."""
        if leader_left:
            # reserved slots of still-Free joiners cannot take over the lead; they lose the reservation
            while pl.members and not isinstance(self.vehicles[pl.members[0]].mode, Follower):
                pl.joining.discard(pl.members.pop(0))
            if not pl.members:
                del self.platoons[pl.id]
                return
            # slots shift forward first so the new front holds index 2
            for k, m in enumerate(pl.members, start=2):
                mode = self.vehicles[m].mode
                if isinstance(mode, Follower) and mode.index != k:
                    self.vehicles[m].mode = Follower(pl.id, k)
            nxt = pl.members[0]
            pl.joining.discard(nxt)
            mode = self.vehicles[nxt].mode
            if isinstance(mode, Follower):
                self._set_mode(nxt, request_transition(mode, Event.LEADER_LEFT, highway=pl.highway),
                               Event.LEADER_LEFT)
        for k, m in enumerate(pl.members[1:], start=2):
            mode = self.vehicles[m].mode
            if isinstance(mode, Follower) and mode.index != k:
                self.vehicles[m].mode = Follower(pl.id, k)

    def _depart(self, vid, keep=None):
        for pl in list(self.platoons.values()):
            if pl is keep or vid not in pl.members:
                continue
            was_leader = pl.members[0] == vid
            pl.members.remove(vid)
            pl.joining.discard(vid)
            if not pl.members:
                del self.platoons[pl.id]
            else:
                self._compact(pl, leader_left=was_leader)

    def leave_highway(self, vid):
        new = request_transition(self.vehicles[vid].mode, Event.LEAVE_HIGHWAY)
        self._depart(vid)
        self._set_mode(vid, new, Event.LEAVE_HIGHWAY)

    def split(self, vid):
        """``vid`` and everyone behind it form a new platoon led by ``vid``."""
        old = self.platoon_of(vid)
        k = old.members.index(vid)
        tail = old.members[k:]
        new = request_transition(self.vehicles[vid].mode, Event.SPLIT_FROM_PLATOON, highway=old.highway,
                                 platoon=self._next_platoon)
        pl = self.create_platoon(old.highway, old.d_sep)
        del old.members[k:]
        pl.members = tail
        pl.joining = {m for m in tail if m in old.joining}
        old.joining -= pl.joining
        self._set_mode(vid, new, Event.SPLIT_FROM_PLATOON)
        for j, m in enumerate(tail[1:], start=2):
            if isinstance(self.vehicles[m].mode, Follower):
                self.vehicles[m].mode = Follower(pl.id, j)
        return pl

    def fault(self, vid):
        veh = self.vehicles[vid]
        if isinstance(veh.mode, Faulty):
            return
        new = request_transition(veh.mode, Event.FAULT_DETECTED)
        self._depart(vid)
        self._set_mode(vid, new, Event.FAULT_DETECTED)

    def advance_faults(self, dt):
        """Run fault clocks; returns ids that reached ``t_d`` and left the level this step."""
        gone = []
        for veh in self.vehicles.values():
            if isinstance(veh.mode, Faulty) and not veh.descended:
                clock = min(veh.mode.clock + dt, self.t_d)
                veh.mode = Faulty(clock)
                if clock >= self.t_d - 1e-12:
                    veh.descended = True
                    gone.append(veh.id)
        return gone

    def live_ids(self):
        return [vid for vid, v in self.vehicles.items() if v.live]

    def check_consistency(self):
        for pl in self.platoons.values():
            lead = self.vehicles[pl.members[0]].mode
            assert isinstance(lead, Leader) and lead.platoon == pl.id, f"platoon {pl.id} first member is {lead}"
            for k, m in enumerate(pl.members[1:], start=2):
                mode = self.vehicles[m].mode
                if m in pl.joining and not isinstance(mode, Follower):
                    continue
                assert isinstance(mode, Follower) and mode.index == k and mode.platoon == pl.id, \
                    f"platoon {pl.id} slot {k} holds {mode}"


def safety_check_set(world):
    """Q(i) for every live vehicle.

    Free vehicles check every other vehicle. Platoon members check their
    formed neighbours in front and behind. Free vehicles within the
    detection radius of a platoon member are appended as intruders.
    """
    live = world.live_ids()
    Q = {}
    for vid in live:
        veh = world.vehicles[vid]
        mode = veh.mode
        pl = world.platoon_of(vid)
        if isinstance(mode, (Leader, Follower)) and pl is not None and vid not in pl.joining:
            formed = pl.formed()
            k = formed.index(vid)
            q = [formed[j] for j in (k - 1, k + 1) if 0 <= j < len(formed)]
            for oid in live:
                if oid == vid or oid in q:
                    continue
                other = world.vehicles[oid]
                opl = world.platoon_of(oid)
                outsider = opl is not pl or oid in pl.joining
                if outsider and np.linalg.norm(other.state.p - veh.state.p) <= world.detection_radius:
                    q.append(oid)
            Q[vid] = q
        else:
            Q[vid] = [o for o in live if o != vid]
    return Q
