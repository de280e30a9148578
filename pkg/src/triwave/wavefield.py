"""Enumeration of waves: identities, signs, right states, positions, speeds.

Every elementary jump of size eps in the transported field w is a *wave* with
a permanent 1-based id, a permanent sign and a permanent right state ``w_hat``
(stored as an integer tick).  The field state tracks, per wave, its current
position and speed (None once cancelled), the v value at its position and how
many first-family fronts it has crossed.  First-family fronts all travel at
speed -1 and are stored separately.

State arithmetic is exact: w values, right states and v labels are integer
ticks; only positions, speeds and times are floats.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .envelopes import SLOPE_TOL, convex_envelope, concave_envelope
from .flux import EffectiveFlux, FluxSpec, FluxTable, build_effective_flux

__all__ = [
    "StepFunction",
    "WaveRecord",
    "VFront",
    "Front",
    "IdRange",
    "FieldState",
    "initial_enumeration",
    "assign_speeds",
    "assign_initial_speeds",
    "speed_groups",
    "validate_enumeration",
    "reconstruct_profile",
    "effective_flux",
    "snapshot",
]


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous, compactly supported step function with tick values.

    ``values[k]`` is the value on ``[positions[k], positions[k+1])``; the
    function equals ``base`` left of the first breakpoint.
    """

    positions: tuple[float, ...]
    values: tuple[int, ...]   # ticks
    base: int = 0

    def __post_init__(self) -> None:
        if len(self.positions) != len(self.values):
            raise ValueError("positions/values length mismatch")
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        prev = self.base
        for x, val in zip(self.positions, self.values):
            if val == prev:
                raise ValueError(f"zero jump at x={x}")
            prev = val

    @staticmethod
    def from_jumps(jumps: Sequence[tuple[float, int]], base: int = 0) -> "StepFunction":
        items = sorted(jumps, key=lambda j: j[0])
        xs, vals, prev = [], [], base
        for x, val in items:
            if val == prev:
                continue
            xs.append(float(x))
            vals.append(int(val))
            prev = val
        return StepFunction(tuple(xs), tuple(vals), base)

    def value_at(self, x: float) -> int:
        out = self.base
        for bx, val in zip(self.positions, self.values):
            if bx <= x:
                out = val
            else:
                break
        return out

    def jumps(self) -> list[tuple[float, int, int]]:
        """(x, value before, value after) for each breakpoint."""
        out, prev = [], self.base
        for x, val in zip(self.positions, self.values):
            out.append((x, prev, val))
            prev = val
        return out

    def tv_ticks(self) -> int:
        return sum(abs(after - before) for _, before, after in self.jumps())

    @property
    def final_value(self) -> int:
        return self.values[-1] if self.values else self.base


@dataclass
class WaveRecord:
    """One eps-sized wave: permanent id/sign/right state, mutable trajectory."""

    id: int
    sign: int
    w_hat: int              # right state, ticks
    pos: float | None       # None encodes the +infinity of cancelled waves
    speed: float | None
    v_label: int            # v tick at the wave's position
    crossed: int            # first-family fronts with index <= crossed are behind
    death_time: float | None = None
    front_id: int | None = None  # refreshed after each event, purely diagnostic

    @property
    def alive(self) -> bool:
        return self.pos is not None

    def cell(self) -> int:
        """Left tick of the wave's cell: (w_hat-1, w_hat) if positive, (w_hat, w_hat+1) if negative."""
        return self.w_hat - 1 if self.sign > 0 else self.w_hat


@dataclass
class VFront:
    """First-family front: carries the v jump leftward at speed -1.

    The position is advanced (and snapped at crossings) together with the
    wave positions, so that co-located objects compare equal exactly.
    """

    id: int
    x0: float
    v_left: int
    v_right: int
    pos: float | None = None

    def __post_init__(self) -> None:
        if self.pos is None:
            self.pos = self.x0

    @property
    def strength_ticks(self) -> int:
        return abs(self.v_right - self.v_left)


@dataclass(frozen=True)
class Front:
    """Maximal contiguous run of alive waves sharing position and speed."""

    ids: tuple[int, ...]
    pos: float
    speed: float
    sign: int
    v_label: int

    @property
    def lo(self) -> int:
        return self.ids[0]

    @property
    def hi(self) -> int:
        return self.ids[-1]


@dataclass(frozen=True)
class IdRange:
    """Contiguous wave-id range; its live content is the range cut to alive ids."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError("empty id range")

    def members(self, state: "FieldState") -> list[int]:
        return [s for s in range(self.lo, self.hi + 1) if state.wave(s).alive]

    def contains(self, s: int) -> bool:
        return self.lo <= s <= self.hi


class FieldState:
    """Full simulation state: wave records plus first-family fronts."""

    def __init__(self, eps: float, waves: list[WaveRecord], v_fronts: list[VFront],
                 time: float = 0.0, w_base: int = 0):
        self.eps = eps
        self.time = time
        self.w_base = w_base
        self.waves = waves
        self.v_fronts = v_fronts

    def wave(self, s: int) -> WaveRecord:
        return self.waves[s - 1]

    def alive_ids(self) -> list[int]:
        return [w.id for w in self.waves if w.alive]

    def tv_ticks(self) -> int:
        return sum(1 for w in self.waves if w.alive)

    def fronts(self) -> list[Front]:
        """Second-family fronts, re-derived from scratch by exact grouping."""
        out: list[Front] = []
        run: list[WaveRecord] = []
        for w in self.waves:
            if not w.alive:
                continue
            if run and (w.pos != run[-1].pos or w.speed != run[-1].speed):
                out.append(self._front_from(run))
                run = []
            run.append(w)
        if run:
            out.append(self._front_from(run))
        for k, fr in enumerate(out):
            for s in fr.ids:
                self.wave(s).front_id = k
        return out

    def _front_from(self, run: list[WaveRecord]) -> Front:
        signs = {w.sign for w in run}
        labels = {w.v_label for w in run}
        crossed = {w.crossed for w in run}
        if len(signs) != 1 or len(labels) != 1 or len(crossed) != 1:
            raise ValueError(
                f"mixed front at x={run[0].pos}: signs={signs} labels={labels} crossed={crossed}"
            )
        return Front(
            ids=tuple(w.id for w in run),
            pos=run[0].pos,
            speed=run[0].speed,
            sign=run[0].sign,
            v_label=run[0].v_label,
        )

    def blocks(self) -> list[IdRange]:
        """Maximal homogeneous intervals of alive waves (same sign, gap-free)."""
        out: list[IdRange] = []
        start = prev = None
        sign = 0
        for w in self.waves:
            if not w.alive:
                continue
            if start is None or w.sign != sign:
                if start is not None:
                    out.append(IdRange(start, prev))
                start, sign = w.id, w.sign
            prev = w.id
        if start is not None:
            out.append(IdRange(start, prev))
        return out

    def copy(self) -> "FieldState":
        return FieldState(
            eps=self.eps,
            waves=[replace(w) for w in self.waves],
            v_fronts=[replace(vf) for vf in self.v_fronts],
            time=self.time,
            w_base=self.w_base,
        )


def initial_enumeration(w0: StepFunction, v0: StepFunction, eps: float) -> FieldState:
    """Enumerate the initial datum: one wave per eps of total variation.

    Waves are numbered left to right; at an upward jump their right states
    fill (before, after] in increasing order, at a downward jump [after,
    before) in decreasing order.  Speeds are not assigned here.
    """
    if w0.final_value != w0.base or (v0.values and v0.final_value != v0.base):
        raise ValueError("initial data must return to the base value (compact support)")
    v_fronts = [
        VFront(id=h + 1, x0=x, v_left=before, v_right=after)
        for h, (x, before, after) in enumerate(v0.jumps())
    ]
    waves: list[WaveRecord] = []
    for x, before, after in w0.jumps():
        sign = 1 if after > before else -1
        label = v0.value_at(x)
        crossed = sum(1 for vf in v_fronts if vf.x0 <= x)
        hats = range(before + 1, after + 1) if sign > 0 else range(before - 1, after - 1, -1)
        for hat in hats:
            waves.append(
                WaveRecord(
                    id=len(waves) + 1,
                    sign=sign,
                    w_hat=hat,
                    pos=x,
                    speed=None,
                    v_label=label,
                    crossed=crossed,
                )
            )
    return FieldState(eps=eps, waves=waves, v_fronts=v_fronts, w_base=w0.base)


def _stack_range(state: FieldState, ids: Sequence[int]) -> tuple[int, int, int]:
    """(w left state, w right state, sign) in ticks for the stack of waves ``ids``."""
    recs = [state.wave(s) for s in ids]
    signs = {w.sign for w in recs}
    if len(signs) != 1:
        raise ValueError("mixed-sign stack")
    sign = signs.pop()
    hats = [w.w_hat for w in recs]
    if sign > 0:
        return min(hats) - 1, max(hats), sign
    return max(hats) + 1, min(hats), sign


def speed_groups(
    state: FieldState,
    ids: Sequence[int],
    flux_table: FluxTable,
    v_tick: int | None = None,
) -> list[tuple[tuple[int, ...], float]]:
    """Solve the Riemann problem of a stack of waves; group them by speed.

    Returns ``[(ids, speed), ...]`` ordered left to right in the fan (speeds
    strictly increasing after tolerance grouping).  Positive stacks read the
    convex envelope over [w(x-), w(x)], negative stacks the concave one.
    """
    if not ids:
        return []
    recs = [state.wave(s) for s in ids]
    if v_tick is None:
        labels = {w.v_label for w in recs}
        if len(labels) != 1:
            raise ValueError("stack with non-uniform v label")
        v_tick = labels.pop()
    w_left, w_right, sign = _stack_range(state, ids)
    lo, hi = (w_left, w_right) if sign > 0 else (w_right, w_left)
    g = flux_table.flux_for_v(v_tick)
    env = convex_envelope(g, lo, hi) if sign > 0 else concave_envelope(g, lo, hi)

    # one raw group per hull segment: those cells share the slope float
    raw: list[tuple[int, int, float]] = []  # (vertex tick a, vertex tick b, slope)
    for a, b in zip(env.vertices, env.vertices[1:]):
        raw.append((a, b, float(env.cell_slopes[a - env.lo])))
    merged: list[tuple[int, int, float]] = []
    for a, b, slope in raw:
        if merged and abs(slope - merged[-1][2]) <= SLOPE_TOL:
            a0, _, _ = merged[-1]
            chord = (env.node_values[b - env.lo] - env.node_values[a0 - env.lo]) / ((b - a0) * g.eps)
            merged[-1] = (a0, b, float(chord))
        else:
            merged.append((a, b, slope))

    by_cell = {w.cell(): w.id for w in recs}
    groups: list[tuple[tuple[int, ...], float]] = []
    for a, b, slope in merged:
        members = sorted(by_cell[c] for c in range(a, b))
        groups.append((tuple(members), slope))
    if sign < 0:
        groups.reverse()  # ascending wave id == ascending speed for negative stacks
    return groups


def assign_speeds(
    state: FieldState,
    ids: Sequence[int],
    flux_table: FluxTable,
    v_tick: int | None = None,
) -> dict[int, float]:
    """Per-wave speeds given to one discontinuity by the Riemann solver."""
    out: dict[int, float] = {}
    for members, speed in speed_groups(state, ids, flux_table, v_tick):
        for s in members:
            out[s] = speed
    return out


def assign_initial_speeds(state: FieldState, flux_table: FluxTable):
    """Solve every initial discontinuity and set the wave speeds in place.

    Returns ``[(position, groups), ...]``, one entry per discontinuity, with
    groups as produced by :func:`speed_groups`.
    """
    out = []
    stack: list[int] = []

    def flush() -> None:
        groups = speed_groups(state, stack, flux_table)
        for members, speed in groups:
            for s in members:
                state.wave(s).speed = speed
        out.append((state.wave(stack[0]).pos, groups))

    for w in state.waves:
        if stack and state.wave(stack[-1]).pos != w.pos:
            flush()
            stack = []
        stack.append(w.id)
    if stack:
        flush()
    return out


def reconstruct_profile(state: FieldState) -> StepFunction:
    """Rebuild w(t, .) from the alive waves: the push-forward identity."""
    jumps: dict[float, int] = {}
    for w in state.waves:
        if w.alive:
            jumps[w.pos] = jumps.get(w.pos, 0) + w.sign
    level = state.w_base
    xs, vals = [], []
    for x in sorted(jumps):
        if jumps[x] == 0:
            continue
        level += jumps[x]
        xs.append(x)
        vals.append(level)
    return StepFunction(tuple(xs), tuple(vals), state.w_base)


def validate_enumeration(state: FieldState) -> list[str]:
    """Check the enumeration axioms; returns a list of violations (empty = ok).

    Verified: positions nondecreasing in id over alive waves; every stack of
    co-located waves fills (w(x-), w(x)] (or the mirrored range) bijectively
    and monotonically in the right order; signs match the jump direction; the
    signed wave measure telescopes back to the base value (push-forward).
    """
    problems: list[str] = []
    alive = [w for w in state.waves if w.alive]
    for a, b in zip(alive, alive[1:]):
        if a.pos > b.pos:
            problems.append(f"positions out of order: wave {a.id} at {a.pos} after {b.id} at {b.pos}")

    # group into stacks by exact position
    stacks: list[list[WaveRecord]] = []
    for w in alive:
        if stacks and stacks[-1][-1].pos == w.pos:
            stacks[-1].append(w)
        else:
            stacks.append([w])
    level = state.w_base
    for stack in stacks:
        signs = {w.sign for w in stack}
        if len(signs) != 1:
            problems.append(f"mixed-sign stack at x={stack[0].pos}")
            continue
        sign = signs.pop()
        before = level
        after = before + sign * len(stack)
        hats = [w.w_hat for w in stack]
        want = list(range(before + 1, after + 1)) if sign > 0 else list(range(before - 1, after - 1, -1))
        if hats != want:
            problems.append(
                f"stack at x={stack[0].pos}: right states {hats} do not fill "
                f"{'(' + str(before) + ', ' + str(after) + ']' if sign > 0 else '[' + str(after) + ', ' + str(before) + ')'}"
            )
        level = after
    if level != state.w_base:
        problems.append(f"profile does not return to base: ends at {level}")

    for w in alive:
        if w.speed is None:
            problems.append(f"alive wave {w.id} without speed")
    for w in state.waves:
        if not w.alive and w.death_time is None:
            problems.append(f"dead wave {w.id} without death time")
    return problems


def effective_flux(state: FieldState, block: IdRange, spec: FluxSpec) -> EffectiveFlux:
    """Effective flux of one maximal homogeneous block of alive waves.

    On each wave cell its second derivative is d2f/dw2(., v label of the
    wave); value and slope vanish at the leftmost node (the function is only
    used through affine-invariant differences).
    """
    members = block.members(state)
    if not members:
        raise ValueError("empty block")
    signs = {state.wave(s).sign for s in members}
    if len(signs) != 1:
        raise ValueError("block is not homogeneous")
    cells = sorted((state.wave(s).cell(), state.wave(s).v_label) for s in members)
    return build_effective_flux(cells, spec, state.eps)


def snapshot(state: FieldState) -> dict:
    """JSON-ready snapshot of the full state."""
    return {
        "time": state.time,
        "eps": state.eps,
        "waves": [
            {
                "id": w.id,
                "sign": w.sign,
                "w_hat": w.w_hat,
                "position": w.pos,
                "speed": w.speed,
                "v_label": w.v_label,
            }
            for w in state.waves
        ],
        "v_fronts": [
            {
                "id": vf.id,
                "position": vf.pos,
                "v_left": vf.v_left,
                "v_right": vf.v_right,
            }
            for vf in state.v_fronts
        ],
    }
