"""Post-hoc per-pair reconstruction of intervals, partitions and pi tables.

The production history shares one partition record among all pairs divided at
the same event and stores only the pi entry each pair's weight needs.  This
module replays a finished trajectory and rebuilds, for every pair
independently and with full tables, the interval of its last meeting, the
recursively refined partition and the complete pi map.  It exists to let the
lemma-level checks compare the shared incremental bookkeeping against a
literal, per-pair reading of the definitions on small runs.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .envelopes import SLOPE_TOL, concave_envelope, convex_envelope
from .flux import EffectiveFlux
from .history import m_value
from .simulator import Event, EventKind, Trajectory
from .wavefield import FieldState, effective_flux

__all__ = ["ReplayPair", "ReplayStep", "Replay", "pi_full_table", "MAX_REPLAY_WAVES"]

MAX_REPLAY_WAVES = 12


@dataclass
class ReplayPair:
    """One pair's reconstructed history at a fixed event time."""

    status: str                                  # "never", "joined", "divided", "dead"
    interval: list[int] = field(default_factory=list)   # alive ids, divided only
    classes: list[list[int]] = field(default_factory=list)
    pi: dict[tuple[int, int], float] = field(default_factory=dict)


@dataclass
class ReplayStep:
    """Snapshot of all reconstructed pairs right after one event."""

    index: int
    time: float
    pairs: dict[tuple[int, int], ReplayPair]
    positions: dict[int, float]                  # alive waves only
    speeds: dict[int, float]
    q_quadratic: float


class Replay:
    """Steps through a trajectory rebuilding every pair history from scratch."""

    def __init__(self, traj: Trajectory, max_waves: int = MAX_REPLAY_WAVES):
        n = len(traj.initial_state.waves)
        if n > max_waves:
            raise ValueError(f"replay limited to {max_waves} initial waves, got {n}")
        self.traj = traj
        self.state: FieldState = traj.initial_state.copy()
        self.steps: list[ReplayStep] = []
        self.pairs: dict[tuple[int, int], ReplayPair] = {
            (a, b): ReplayPair(status="never")
            for a in range(1, n + 1)
            for b in range(a + 1, n + 1)
        }
        for _, groups in traj.initial_groups:
            ids = sorted(s for members, _ in groups for s in members)
            self._meet(ids, {s: sp for members, sp in groups for s in members},
                       event_index=0)
        self._record(index=0, time=0.0)

    # -- driving -------------------------------------------------------------

    def run(self) -> list[ReplayStep]:
        for event in self.traj.events:
            self._step(event)
        return self.steps

    def _step(self, event: Event) -> None:
        state = self.state
        dt = event.time - state.time
        for w in state.waves:
            if w.alive:
                w.pos += w.speed * dt
        state.time = event.time
        for s in range(event.colliding.lo, event.colliding.hi + 1):
            w = state.wave(s)
            if w.alive:
                w.pos = event.x
        for s in event.canceled:
            w = state.wave(s)
            w.pos = None
            w.speed = None
            w.death_time = event.time
        for s, speed in event.post_speeds.items():
            state.wave(s).speed = speed
        if event.kind == EventKind.TRANSVERSAL:
            for s in event.post_speeds:
                w = state.wave(s)
                w.crossed = event.v_front_id
                w.v_label = event.v_label

        dead = set(event.canceled)
        meeting_ids = set(event.participants.members(state)) if event.participants else set()
        eff_cache: dict[int, EffectiveFlux] = {}
        for key, pair in self.pairs.items():
            s, s2 = key
            if s in dead or s2 in dead:
                self.pairs[key] = ReplayPair(status="dead")
                continue
            if pair.status != "divided":
                continue
            if s in meeting_ids and s2 in meeting_ids:
                raise ValueError(f"pair {key} met again while divided (event {event.index})")
            pre_classes = pair.classes
            if event.kind == EventKind.TRANSVERSAL and event.participants is not None:
                factor = 2.0 * self.traj.bounds.norm_d3_wwv * event.v_strength
                for pp in pair.pi:
                    m = m_value(pre_classes, event.participants.lo,
                                event.participants.hi, pp[0], pp[1], self.traj.eps)
                    if m > 0.0:
                        pair.pi[pp] += factor * m
            if dead:
                pair.interval = [p for p in pair.interval if p not in dead]
                pair.classes = [[p for p in c if p not in dead] for c in pair.classes]
                pair.classes = [c for c in pair.classes if c]
                pair.pi = {pp: val for pp, val in pair.pi.items()
                           if pp[0] not in dead and pp[1] not in dead}
            pair.classes = [
                piece
                for cls in pair.classes
                for piece in self._split(cls, eff_cache, event)
            ]
        if event.participants is not None:
            ids = event.participants.members(state)
            self._meet(ids, event.post_speeds, event_index=event.index)
        self._record(index=event.index, time=event.time)

    # -- meeting pairs ---------------------------------------------------------

    def _meet(self, ids: list[int], speeds: dict[int, float], event_index: int) -> None:
        """Pairs sharing the event position: joined or freshly divided."""
        if len(ids) < 2:
            return
        classes: list[list[int]] = []
        for s in ids:
            if classes and speeds[s] == speeds[classes[-1][-1]]:
                classes[-1].append(s)
            else:
                classes.append([s])
        group_of = {s: k for k, cls in enumerate(classes) for s in cls}
        table = {(a, b): 0.0 for i, a in enumerate(ids) for b in ids[i + 1:]}
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                if group_of[a] == group_of[b]:
                    self.pairs[(a, b)] = ReplayPair(status="joined")
                else:
                    self.pairs[(a, b)] = ReplayPair(
                        status="divided",
                        interval=list(ids),
                        classes=[list(c) for c in classes],
                        pi=dict(table),
                    )

    # -- partition refinement ----------------------------------------------------

    def _split(self, members: list[int], eff_cache: dict, event: Event) -> list[list[int]]:
        """Re-solve one class under the current effective flux; split where the
        Riemann problem tells members apart."""
        state = self.state
        if len(members) <= 1:
            return [members]
        if event.kind.is_interaction:
            return [members]  # flux and membership unchanged: provably no split
        if event.kind == EventKind.TRANSVERSAL:
            part = event.participants
            if part is None or members[-1] < part.lo or part.hi < members[0]:
                return [members]  # no member changed its v label
        blk = next(b for b in state.blocks() if b.contains(members[0]))
        eff = eff_cache.get(blk.lo)
        if eff is None:
            eff = effective_flux(state, blk, self.traj.spec)
            eff_cache[blk.lo] = eff
        sign = state.wave(members[0]).sign
        cells = [state.wave(s).cell() for s in members]
        g = eff.as_flux()
        env = (convex_envelope if sign > 0 else concave_envelope)(g, min(cells), max(cells) + 1)
        out: list[list[int]] = [[members[0]]]
        for prev, cur in zip(members, members[1:]):
            gap = abs(env.cell_slope(state.wave(cur).cell()) -
                      env.cell_slope(state.wave(prev).cell()))
            if gap > SLOPE_TOL:
                out.append([cur])
            else:
                out[-1].append(cur)
        return out

    # -- bookkeeping -----------------------------------------------------------

    def _record(self, index: int, time: float) -> None:
        state = self.state
        self.steps.append(
            ReplayStep(
                index=index,
                time=time,
                pairs=copy.deepcopy(self.pairs),
                positions={w.id: w.pos for w in state.waves if w.alive},
                speeds={w.id: w.speed for w in state.waves if w.alive},
                q_quadratic=self._q_quadratic(),
            )
        )

    def _q_quadratic(self) -> float:
        state = self.state
        eps = self.traj.eps
        alive = state.alive_ids()
        q = 0.0
        for i, a in enumerate(alive):
            for b in alive[i + 1:]:
                pair = self.pairs[(a, b)]
                if pair.status == "never":
                    q += self.traj.bounds.norm_d2_ww
                elif pair.status == "divided":
                    gap = abs(state.wave(b).w_hat - state.wave(a).w_hat) + 1
                    q += pair.pi[(a, b)] / (gap * eps)
        return q * eps**2


def pi_full_table(traj: Trajectory, pair: tuple[int, int],
                  event_index: int | None = None) -> dict[tuple[int, int], float]:
    """Full pi map of one pair at one event time (default: final event).

    Small runs only: raises beyond MAX_REPLAY_WAVES initial waves.  Returns an
    empty map while the pair is not divided.
    """
    replay = Replay(traj)
    steps = replay.run()
    if event_index is None:
        event_index = steps[-1].index
    step = next(st for st in steps if st.index == event_index)
    s, s2 = min(pair), max(pair)
    rec = step.pairs[(s, s2)]
    if rec.status != "divided":
        return {}
    return dict(rec.pi)
