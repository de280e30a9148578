"""Event-driven wavefront tracking for the triangular system.

Between events every front moves on a straight line; the loop repeatedly
finds the earliest meeting of two adjacent fronts, classifies it (interaction
of same-sign second-family fronts, cancellation of opposite-sign ones, or a
transversal crossing by a first-family front), re-solves the local Riemann
problem and updates the enumeration.

Simultaneous collisions are resolved sequentially at the same time
coordinate, leftmost first, so every resolved event is binary and the
per-event estimates apply verbatim.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

from .flux import DerivativeBounds, FluxSpec, FluxTable, derivative_bounds
from .wavefield import (
    FieldState,
    Front,
    IdRange,
    StepFunction,
    VFront,
    assign_initial_speeds,
    initial_enumeration,
    speed_groups,
    validate_enumeration,
)

__all__ = [
    "EventKind",
    "Event",
    "CollisionCandidate",
    "Trajectory",
    "next_collision",
    "resolve",
    "run",
    "EventGuardExceeded",
]

log = logging.getLogger("triwave.simulator")

TIME_TOL = 1e-10      # candidates within this of the earliest are one cluster
SPEED_BOUND = 1.0     # all second-family speeds must stay in (-1, 1)


class EventGuardExceeded(RuntimeError):
    pass


class EventKind(str, Enum):
    INTERACTION_POSITIVE = "interaction_positive"
    INTERACTION_NEGATIVE = "interaction_negative"
    CANCELLATION = "cancellation"
    TRANSVERSAL = "transversal"

    @property
    def is_interaction(self) -> bool:
        return self in (EventKind.INTERACTION_POSITIVE, EventKind.INTERACTION_NEGATIVE)


@dataclass
class Event:
    """One resolved binary collision."""

    index: int
    time: float
    x: float
    kind: EventKind
    colliding: IdRange                 # second-family waves arriving at (t, x)
    participants: IdRange | None      # the same waves minus the cancelled ones
    left_ids: IdRange | None          # the two colliding w-fronts (None for transversal)
    right_ids: IdRange | None
    v_front_id: int | None            # transversal only
    v_strength: float                 # |v_h| (0 unless transversal)
    v_label: int                      # v tick seen at (t, x) after the event
    canceled: tuple[int, ...]
    pre_speeds: dict[int, float]
    post_speeds: dict[int, float]
    sum_abs_dsigma: float             # sum over surviving waves of |speed change| * eps
    cancellation: float               # total-variation drop (0 unless cancellation)

    def n_participants(self) -> int:
        return len(self.post_speeds)


@dataclass(frozen=True)
class CollisionCandidate:
    time: float
    x: float
    left_kind: str                 # "w" or "v"
    left: object                   # Front or VFront
    right_kind: str
    right: object


@dataclass
class Trajectory:
    """Complete run log: events plus aligned functional snapshots."""

    eps: float
    spec: FluxSpec
    bounds: DerivativeBounds
    w0: StepFunction
    v0: StepFunction
    initial_state: FieldState
    initial_groups: list[tuple[float, list[tuple[tuple[int, ...], float]]]]
    events: list[Event] = field(default_factory=list)
    snapshots: list = field(default_factory=list)          # FunctionalSnapshot, index j
    interaction_details: dict = field(default_factory=dict)  # event index -> dict
    final_state: FieldState | None = None

    @property
    def tv_w0(self) -> float:
        return self.w0.tv_ticks() * self.eps

    @property
    def tv_v0(self) -> float:
        return self.v0.tv_ticks() * self.eps


def _objects(state: FieldState) -> list[tuple[str, object, float, float]]:
    """All moving fronts as (kind, ref, pos, speed), sorted left to right.

    Co-located objects (which only happens at just-resolved events, where
    positions were snapped to the same float) order by speed: the slower one
    ends up left, matching the immediate future.
    """
    objs: list[tuple[str, object, float, float]] = []
    for fr in state.fronts():
        objs.append(("w", fr, fr.pos, fr.speed))
    for vf in state.v_fronts:
        objs.append(("v", vf, vf.pos, -1.0))
    objs.sort(key=lambda o: (o[2], o[3]))
    return objs


def _pair_candidate(state, lk, l, lx, ls, rk, r, rx, rs) -> CollisionCandidate | None:
    if lk == "v" and rk == "v":
        return None
    if lk == "v":
        # first-family fronts move left relative to everything: never caught from behind
        return None
    if rk == "v":
        # a w-front meets each v-front at most once; the crossing counter is exact
        if state.wave(l.ids[0]).crossed >= r.id:
            return None
        tau = (rx - lx) / (ls + 1.0)
    else:
        if ls <= rs:
            return None
        tau = (rx - lx) / (ls - rs)
    tau = max(tau, 0.0)
    return CollisionCandidate(
        time=state.time + tau,
        x=lx + ls * tau,
        left_kind=lk,
        left=l,
        right_kind=rk,
        right=r,
    )


def next_collision(state: FieldState) -> CollisionCandidate | None:
    """Earliest meeting of two adjacent fronts; None when nothing ever meets.

    Simultaneous candidates (within TIME_TOL) are clustered and the
    leftmost-position pair wins, ties broken by list order.
    """
    objs = _objects(state)
    cands: list[tuple[CollisionCandidate, int]] = []
    for i in range(len(objs) - 1):
        lk, l, lx, ls = objs[i]
        rk, r, rx, rs = objs[i + 1]
        cand = _pair_candidate(state, lk, l, lx, ls, rk, r, rx, rs)
        if cand is not None:
            cands.append((cand, i))
    if not cands:
        return None
    t_min = min(c.time for c, _ in cands)
    cluster = [(c, i) for c, i in cands if c.time <= t_min + TIME_TOL]
    cluster.sort(key=lambda ci: (ci[0].x, ci[1]))
    return cluster[0][0]


def _contiguous_alive(state: FieldState, ids: list[int]) -> IdRange:
    rng = IdRange(min(ids), max(ids))
    if rng.members(state) != sorted(ids):
        raise ValueError(f"colliding waves {ids} are not contiguous among alive ids")
    return rng


def resolve(cand: CollisionCandidate, state: FieldState, flux_table: FluxTable,
            index: int) -> Event:
    """Advance the state to the candidate and resolve the local Riemann problem."""
    if cand.time < state.time - TIME_TOL:
        raise ValueError(f"stale event: t={cand.time} but state is at {state.time}")
    t_j = max(cand.time, state.time)
    dt = t_j - state.time
    for w in state.waves:
        if w.alive:
            w.pos += w.speed * dt
    for vf in state.v_fronts:
        vf.pos -= dt
    state.time = t_j
    x_j = cand.x

    if cand.left_kind == "v" or cand.right_kind == "v":
        vf: VFront = cand.left if cand.left_kind == "v" else cand.right
        front: Front = cand.right if cand.left_kind == "v" else cand.left
        vf.pos = x_j
        ids = list(front.ids)
        colliding = _contiguous_alive(state, ids)
        pre = {s: state.wave(s).speed for s in ids}
        for s in ids:
            w = state.wave(s)
            if w.crossed != vf.id - 1:
                raise ValueError(f"wave {s} crossing front {vf.id} out of order")
            w.pos = x_j
            w.crossed = vf.id
            w.v_label = vf.v_right
        groups = speed_groups(state, ids, flux_table, v_tick=vf.v_right)
        post = _apply_groups(state, groups)
        return Event(
            index=index,
            time=t_j,
            x=x_j,
            kind=EventKind.TRANSVERSAL,
            colliding=colliding,
            participants=colliding,
            left_ids=None,
            right_ids=None,
            v_front_id=vf.id,
            v_strength=vf.strength_ticks * state.eps,
            v_label=vf.v_right,
            canceled=(),
            pre_speeds=pre,
            post_speeds=post,
            sum_abs_dsigma=_dsigma(pre, post, state.eps),
            cancellation=0.0,
        )

    left: Front = cand.left
    right: Front = cand.right
    ids = list(left.ids) + list(right.ids)
    colliding = _contiguous_alive(state, ids)
    if left.v_label != right.v_label:
        raise ValueError("colliding w-fronts see different v values")
    v_tick = left.v_label
    pre = {s: state.wave(s).speed for s in ids}
    for s in ids:
        state.wave(s).pos = x_j

    if left.sign == right.sign:
        kind = EventKind.INTERACTION_POSITIVE if left.sign > 0 else EventKind.INTERACTION_NEGATIVE
        groups = speed_groups(state, ids, flux_table, v_tick=v_tick)
        if len(groups) != 1:
            raise ValueError(f"interaction at ({t_j}, {x_j}) did not merge into one front")
        post = _apply_groups(state, groups)
        return Event(
            index=index,
            time=t_j,
            x=x_j,
            kind=kind,
            colliding=colliding,
            participants=colliding,
            left_ids=IdRange(left.lo, left.hi),
            right_ids=IdRange(right.lo, right.hi),
            v_front_id=None,
            v_strength=0.0,
            v_label=v_tick,
            canceled=(),
            pre_speeds=pre,
            post_speeds=post,
            sum_abs_dsigma=_dsigma(pre, post, state.eps),
            cancellation=0.0,
        )

    # cancellation: opposite signs annihilate pairwise from the middle state
    w_ll, w_lr = _outer_states(state, left)
    w_rl, w_rr = _outer_states(state, right)
    if w_lr != w_rl:
        raise ValueError("cancellation fronts do not share the middle state")
    w_a, w_c = w_ll, w_rr
    survivors: list[int] = []
    canceled: list[int] = []
    for s in ids:
        w = state.wave(s)
        keep = (
            w_a != w_c
            and w.sign == (1 if w_c > w_a else -1)
            and (w_a + 1 <= w.w_hat <= w_c if w_c > w_a else w_c <= w.w_hat <= w_a - 1)
        )
        (survivors if keep else canceled).append(s)
    for s in canceled:
        w = state.wave(s)
        w.pos = None
        w.speed = None
        w.death_time = t_j
    post: dict[int, float] = {}
    if survivors:
        groups = speed_groups(state, survivors, flux_table, v_tick=v_tick)
        post = _apply_groups(state, groups)
    return Event(
        index=index,
        time=t_j,
        x=x_j,
        kind=EventKind.CANCELLATION,
        colliding=colliding,
        participants=_contiguous_alive(state, survivors) if survivors else None,
        left_ids=IdRange(left.lo, left.hi),
        right_ids=IdRange(right.lo, right.hi),
        v_front_id=None,
        v_strength=0.0,
        v_label=v_tick,
        canceled=tuple(canceled),
        pre_speeds=pre,
        post_speeds=post,
        sum_abs_dsigma=_dsigma(pre, post, state.eps),
        cancellation=len(canceled) * state.eps,
    )


def _outer_states(state: FieldState, front: Front) -> tuple[int, int]:
    hats = [state.wave(s).w_hat for s in front.ids]
    if front.sign > 0:
        return min(hats) - 1, max(hats)
    return max(hats) + 1, min(hats)


def _apply_groups(state: FieldState, groups) -> dict[int, float]:
    post: dict[int, float] = {}
    for members, speed in groups:
        if not -SPEED_BOUND < speed < SPEED_BOUND:
            raise ValueError(f"speed {speed} outside (-1, 1): hyperbolicity violated")
        for s in members:
            state.wave(s).speed = speed
            post[s] = speed
    return post


def _dsigma(pre: dict[int, float], post: dict[int, float], eps: float) -> float:
    return sum(abs(post[s] - pre[s]) for s in post) * eps


def run(
    w0: StepFunction,
    v0: StepFunction,
    spec: FluxSpec,
    eps: float,
    *,
    bounds: DerivativeBounds | None = None,
    history=None,
    event_guard: int = 10**6,
    validate_each_event: bool = False,
) -> Trajectory:
    """Run the full wavefront evolution of (w0, v0) until no fronts meet.

    ``history`` (a PairHistory) is created on demand; it is consulted after
    every event and its snapshots are stored on the trajectory.
    """
    from .history import PairHistory  # deferred: history imports this module's types

    if bounds is None:
        bounds = derivative_bounds(spec)
    state = initial_enumeration(w0, v0, eps)
    flux_table = FluxTable(spec, eps)
    initial_groups = assign_initial_speeds(state, flux_table)
    problems = validate_enumeration(state)
    if problems:
        raise ValueError("initial enumeration invalid: " + "; ".join(problems))

    if history is None:
        history = PairHistory(spec=spec, eps=eps, bounds=bounds)
    traj = Trajectory(
        eps=eps,
        spec=spec,
        bounds=bounds,
        w0=w0,
        v0=v0,
        initial_state=state.copy(),
        initial_groups=initial_groups,
    )
    traj.snapshots.append(history.initialize(state, initial_groups))

    while True:
        cand = next_collision(state)
        if cand is None:
            break
        index = len(traj.events) + 1
        if index > event_guard:
            raise EventGuardExceeded(f"more than {event_guard} events")
        event = resolve(cand, state, flux_table, index)
        log.debug("event %d: %s at t=%.6g x=%.6g", index, event.kind.value, event.time, event.x)
        snap, detail = history.on_event(event, state)
        traj.events.append(event)
        traj.snapshots.append(snap)
        if detail:
            traj.interaction_details[index] = detail
        if validate_each_event:
            problems = validate_enumeration(state)
            if problems:
                raise ValueError(
                    f"enumeration invalid after event {index} "
                    f"({event.kind.value} at t={event.time}): " + "; ".join(problems)
                )
    traj.final_state = state
    return traj
