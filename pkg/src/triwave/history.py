"""Pairwise interaction history and the quadratic interaction functional.

For every pair of waves that has shared a position at least once, this module
tracks whether the pair is currently joined (same position and speed) or
divided, the interval of waves present at their last meeting, a partition of
that interval into classes that have never been told apart since, and an
accumulated budget ``pi`` that grows only at transversal crossings.

The pair weight is

    q = 0                                   joined,
    q = pi / (|w_hat(s') - w_hat(s)| + eps) divided after meeting,
    q = ||d2f/dw2||                         never met,

and the quadratic functional sums q * eps^2 over alive pairs.  Its decrease
at interactions dominates the speed-change sum there; its increase at
transversal crossings is controlled by the decay of the transversal Glimm
functional.

Partitions are shared: every pair divided at the same event sees the same
interval and the same classes, so one record per event serves them all.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .envelopes import SLOPE_TOL, concave_envelope, convex_envelope
from .flux import DerivativeBounds, EffectiveFlux, FluxSpec
from .wavefield import FieldState, IdRange, effective_flux

if TYPE_CHECKING:  # pragma: no cover
    from .simulator import Event

__all__ = [
    "FunctionalSnapshot",
    "PartitionRecord",
    "PairRec",
    "PairHistory",
    "m_value",
    "cancellation_amount",
]

log = logging.getLogger("triwave.history")


@dataclass(frozen=True)
class FunctionalSnapshot:
    """Functional values right after event ``index`` (index 0 = initial data)."""

    index: int
    time: float
    tv_w: float
    q_trans: float
    q_quadratic: float
    sum_abs_dsigma: float


@dataclass
class PartitionRecord:
    """Shared interval-of-waves and partition for pairs divided at one event.

    ``interval`` and every class are id ranges whose live content is the
    range cut to currently alive waves; classes stay contiguous because
    cancellations remove contiguous id runs.
    """

    key: int                       # creating event index (0 = initial datum)
    interval: IdRange
    classes: list[IdRange]
    pi_table: dict | None = None   # full (p, p') -> pi map, small runs only

    def class_members(self, state: FieldState) -> list[list[int]]:
        return [c.members(state) for c in self.classes]


@dataclass
class PairRec:
    """History of one pair that has met: status, shared partition, pi budget."""

    status: str                    # "joined" or "divided"
    record: PartitionRecord | None
    pi: float
    last_meet_time: float
    last_meet_x: float
    last_meet_event: int


def m_value(class_members: list[list[int]], part_lo: int, part_hi: int,
            p: int, p_prime: int, eps: float) -> float:
    """Total strength of the partition classes between p and p' (inclusive)
    that lie entirely inside the colliding wave set [part_lo, part_hi]."""
    ki = kj = None
    for k, members in enumerate(class_members):
        if members and members[0] <= p <= members[-1]:
            ki = k
        if members and members[0] <= p_prime <= members[-1]:
            kj = k
    if ki is None or kj is None:
        raise ValueError("p, p' must belong to the partitioned interval")
    if ki > kj:
        ki, kj = kj, ki
    total = 0
    for k in range(ki, kj + 1):
        members = class_members[k]
        if members and part_lo <= members[0] and members[-1] <= part_hi:
            total += len(members)
    return total * eps


def cancellation_amount(event: "Event") -> float:
    """Total-variation drop at a cancellation event."""
    from .simulator import EventKind

    if event.kind != EventKind.CANCELLATION:
        raise ValueError("cancellation_amount requires a cancellation event")
    return event.cancellation


class PairHistory:
    """Incrementally maintained pair statuses, partitions and functionals."""

    def __init__(self, spec: FluxSpec, eps: float, bounds: DerivativeBounds,
                 track_full_pi: bool = False):
        self.spec = spec
        self.eps = eps
        self.bounds = bounds
        self.track_full_pi = track_full_pi
        self.pairs: dict[tuple[int, int], PairRec] = {}

    # -- construction ------------------------------------------------------

    def initialize(self, state: FieldState, initial_groups) -> FunctionalSnapshot:
        """Record the pair relations created by the initial Riemann problems."""
        for x, groups in initial_groups:
            ids = [s for members, _ in groups for s in members]
            group_of = {s: k for k, (members, _) in enumerate(groups) for s in members}
            record = None
            if len(groups) > 1:
                record = PartitionRecord(
                    key=0,
                    interval=IdRange(min(ids), max(ids)),
                    classes=[IdRange(members[0], members[-1]) for members, _ in groups],
                    pi_table=self._fresh_table(ids) if self.track_full_pi else None,
                )
            for i, s in enumerate(ids):
                for s2 in ids[i + 1:]:
                    a, b = min(s, s2), max(s, s2)
                    joined = group_of[a] == group_of[b]
                    self.pairs[(a, b)] = PairRec(
                        status="joined" if joined else "divided",
                        record=None if joined else record,
                        pi=0.0,
                        last_meet_time=0.0,
                        last_meet_x=x,
                        last_meet_event=0,
                    )
        return self.snapshot(state, index=0, sum_abs_dsigma=0.0)

    def _fresh_table(self, ids) -> dict:
        alive = sorted(ids)
        return {(a, b): 0.0 for i, a in enumerate(alive) for b in alive[i + 1:]}

    # -- event update ------------------------------------------------------

    def on_event(self, event: "Event", state: FieldState):
        """Advance all histories across one event; returns (snapshot, detail)."""
        from .simulator import EventKind

        detail = None
        if event.kind.is_interaction:
            detail = self._interaction_detail(event, state)

        if event.canceled:
            self._apply_deaths(event.canceled)
        if event.kind == EventKind.TRANSVERSAL:
            self._apply_transversal_pi(event, state)
        self._refine_records(event, state)
        self._update_meeting_pairs(event, state)

        snap = self.snapshot(state, index=event.index,
                             sum_abs_dsigma=event.sum_abs_dsigma)
        return snap, detail

    def _apply_deaths(self, canceled: tuple[int, ...]) -> None:
        dead = set(canceled)
        for key in [k for k in self.pairs if k[0] in dead or k[1] in dead]:
            del self.pairs[key]
        for rec in self._live_records():
            if rec.pi_table is not None:
                for key in [k for k in rec.pi_table if k[0] in dead or k[1] in dead]:
                    del rec.pi_table[key]

    def _live_records(self) -> list[PartitionRecord]:
        seen: dict[int, PartitionRecord] = {}
        for pair in self.pairs.values():
            if pair.record is not None:
                seen[id(pair.record)] = pair.record
        return list(seen.values())

    def _apply_transversal_pi(self, event: "Event", state: FieldState) -> None:
        """pi grows by 2 ||d3f/dw2dv|| |v_h| M for every pair still divided."""
        part = event.participants
        factor = 2.0 * self.bounds.norm_d3_wwv * event.v_strength
        if factor == 0.0 or part is None:
            return
        members_cache: dict[int, list[list[int]]] = {}
        for (s, s2), pair in self.pairs.items():
            if pair.status != "divided":
                continue
            rec = pair.record
            members = members_cache.get(id(rec))
            if members is None:
                members = rec.class_members(state)
                members_cache[id(rec)] = members
            m = m_value(members, part.lo, part.hi, s, s2, self.eps)
            if m > 0.0:
                pair.pi += factor * m
        for rec in self._live_records():
            if rec.pi_table is None:
                continue
            members = members_cache.get(id(rec)) or rec.class_members(state)
            for (p, p2) in rec.pi_table:
                m = m_value(members, part.lo, part.hi, p, p2, self.eps)
                if m > 0.0:
                    rec.pi_table[(p, p2)] += factor * m

    def _refine_records(self, event: "Event", state: FieldState) -> None:
        """Clip intervals to the alive set and split classes the current
        effective flux tells apart.

        The effective flux changes only on cells whose waves crossed the
        first-family front, and class membership changes only through deaths,
        so only classes touched by this event can actually split.
        """
        from .simulator import EventKind

        if event.kind.is_interaction:
            return  # nothing changed: same flux, same members
        dead = set(event.canceled)
        touched = event.participants if event.kind == EventKind.TRANSVERSAL else None
        eff_cache: dict[int, EffectiveFlux] = {}
        blocks = state.blocks()
        block_of: dict[int, IdRange] = {}
        for blk in blocks:
            for s in range(blk.lo, blk.hi + 1):
                block_of[s] = blk

        for rec in self._live_records():
            live = rec.interval.members(state)
            if not live:
                continue
            rec.interval = IdRange(live[0], live[-1])
            new_classes: list[IdRange] = []
            for cls in rec.classes:
                members = cls.members(state)
                if not members:
                    continue
                lost = any(cls.lo <= d <= cls.hi for d in dead)
                crossed = touched is not None and not (
                    members[-1] < touched.lo or touched.hi < members[0]
                )
                if len(members) == 1 or not (lost or crossed):
                    new_classes.append(IdRange(members[0], members[-1]))
                    continue
                new_classes.extend(self._split_class(members, state, eff_cache, block_of))
            rec.classes = new_classes

    def _split_class(self, members: list[int], state: FieldState, eff_cache,
                     block_of) -> list[IdRange]:
        """Split one class by the Riemann problem it spans under the current
        effective flux; classes are runs of equal entropic speed."""
        blk = block_of[members[0]]
        if block_of[members[-1]].lo != blk.lo:
            raise ValueError("partition class spans two homogeneous blocks")
        eff = eff_cache.get(blk.lo)
        if eff is None:
            eff = effective_flux(state, blk, self.spec)
            eff_cache[blk.lo] = eff
        sign = state.wave(members[0]).sign
        cells = [state.wave(s).cell() for s in members]
        lo, hi = min(cells), max(cells) + 1
        g = eff.as_flux()
        env = convex_envelope(g, lo, hi) if sign > 0 else concave_envelope(g, lo, hi)
        slopes = [env.cell_slope(c) for c in cells]
        out: list[IdRange] = []
        start = 0
        for k in range(1, len(members)):
            if abs(slopes[k] - slopes[k - 1]) > SLOPE_TOL:
                out.append(IdRange(members[start], members[k - 1]))
                start = k
        out.append(IdRange(members[start], members[-1]))
        return out

    def _update_meeting_pairs(self, event: "Event", state: FieldState) -> None:
        """Pairs meeting at (t_j, x_j): recompute joined/divided from the
        post-event state; newly divided pairs share a fresh partition."""
        part = event.participants
        if part is None:
            return
        ids = part.members(state)
        if len(ids) < 2:
            return
        if len({state.wave(s).sign for s in ids}) != 1:
            raise ValueError("meeting waves of opposite sign survived one event")
        speeds = {s: event.post_speeds[s] for s in ids}
        fresh: PartitionRecord | None = None

        def fresh_record() -> PartitionRecord:
            nonlocal fresh
            if fresh is None:
                classes: list[IdRange] = []
                start = 0
                for k in range(1, len(ids)):
                    if speeds[ids[k]] != speeds[ids[k - 1]]:
                        classes.append(IdRange(ids[start], ids[k - 1]))
                        start = k
                classes.append(IdRange(ids[start], ids[-1]))
                fresh = PartitionRecord(
                    key=event.index,
                    interval=IdRange(ids[0], ids[-1]),
                    classes=classes,
                    pi_table=self._fresh_table(ids) if self.track_full_pi else None,
                )
            return fresh

        for i, s in enumerate(ids):
            for s2 in ids[i + 1:]:
                joined = speeds[s] == speeds[s2]
                old = self.pairs.get((s, s2))
                if old is not None and old.status == "divided" and not joined:
                    # re-meeting pairs were on one front, hence joined, before
                    raise ValueError(
                        f"pair ({s}, {s2}) met again while divided at event {event.index}"
                    )
                if old is not None and old.status == "divided" and joined:
                    log.debug("pair (%d, %d) re-joined at event %d", s, s2, event.index)
                self.pairs[(s, s2)] = PairRec(
                    status="joined" if joined else "divided",
                    record=None if joined else fresh_record(),
                    pi=0.0,
                    last_meet_time=event.time,
                    last_meet_x=event.x,
                    last_meet_event=event.index,
                )

    # -- the interaction-side detail for the wavefront-decrease check -------

    def _interaction_detail(self, event: "Event", state: FieldState) -> dict:
        """Both sides of the pre-event wavefront inequality at an interaction.

        Uses the effective flux of the block containing both fronts; at an
        interaction it is unchanged from the previous event, so the post-event
        state provides it.
        """
        left, right = event.left_ids, event.right_ids
        blk = next(b for b in state.blocks() if b.contains(left.lo))
        if not blk.contains(right.hi):
            raise ValueError("interacting fronts not in one homogeneous block")
        eff = effective_flux(state, blk, self.spec)
        sig_l = self._eff_rh(eff, state, left)
        sig_r = self._eff_rh(eff, state, right)
        size_l = len(left.members(state)) * self.eps
        size_r = len(right.members(state)) * self.eps
        sum_pi = 0.0
        n_never = 0
        for s in left.members(state):
            for s2 in right.members(state):
                pair = self.pairs.get((s, s2))
                if pair is None:
                    n_never += 1
                else:
                    sum_pi += pair.pi
        lhs = (sig_l - sig_r) * size_l * size_r
        rhs = sum_pi * self.eps**2 + n_never * self.bounds.norm_d2_ww * (
            size_l + size_r
        ) * self.eps**2
        return {
            "sigma_rh_left": sig_l,
            "sigma_rh_right": sig_r,
            "strength_left": size_l,
            "strength_right": size_r,
            "sum_pi_met": sum_pi,
            "n_never": n_never,
            "lhs": lhs,
            "rhs": rhs,
        }

    def _eff_rh(self, eff: EffectiveFlux, state: FieldState, rng: IdRange) -> float:
        cells = [state.wave(s).cell() for s in rng.members(state)]
        return eff.rh_speed(min(cells), max(cells) + 1)

    # -- functionals ---------------------------------------------------------

    def pair_weight(self, state: FieldState, s: int, s2: int) -> float:
        """The weight q of one pair (s < s2), both alive."""
        pair = self.pairs.get((s, s2))
        if pair is None:
            return self.bounds.norm_d2_ww
        if pair.status == "joined":
            return 0.0
        gap = abs(state.wave(s2).w_hat - state.wave(s).w_hat) + 1
        return pair.pi / (gap * self.eps)

    def q_quadratic(self, state: FieldState) -> float:
        """Q = sum over alive pairs of q * eps^2, never-met pairs in closed form."""
        alive = state.alive_ids()
        n = len(alive)
        total_pairs = n * (n - 1) // 2
        q = self.bounds.norm_d2_ww * (total_pairs - len(self.pairs))
        for (s, s2), pair in self.pairs.items():
            if pair.status == "divided" and pair.pi != 0.0:
                gap = abs(state.wave(s2).w_hat - state.wave(s).w_hat) + 1
                q += pair.pi / (gap * self.eps)
        return q * self.eps**2

    def q_trans(self, state: FieldState) -> float:
        """Transversal Glimm functional: strength of every first-family front
        times the strength of the waves still ahead (to its left)."""
        total = 0.0
        for vf in state.v_fronts:
            n_ahead = sum(1 for w in state.waves if w.alive and w.crossed < vf.id)
            total += vf.strength_ticks * self.eps * n_ahead * self.eps
        return total

    def snapshot(self, state: FieldState, index: int, sum_abs_dsigma: float) -> FunctionalSnapshot:
        return FunctionalSnapshot(
            index=index,
            time=state.time,
            tv_w=state.tv_ticks() * self.eps,
            q_trans=self.q_trans(state),
            q_quadratic=self.q_quadratic(state),
            sum_abs_dsigma=sum_abs_dsigma,
        )
