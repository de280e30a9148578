"""Scenario configuration, random initial data, batch execution, exports.

A scenario is a single JSON document: flux selection, grid step, initial data
(explicit jump lists or seeded random specs), check level and output options.
Running a scenario produces events.csv, functionals.csv and report.json (and
snapshots.json on demand); the exit status is nonzero iff any check fails.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .flux import FluxSpec, derivative_bounds, make_flux
from .history import PairHistory
from .simulator import Trajectory, run
from .verifier import CheckResult, run_verifier, summarize, write_report
from .wavefield import StepFunction, snapshot

__all__ = [
    "ScenarioConfig",
    "ScenarioResult",
    "generate_initial_data",
    "build_initial_data",
    "run_scenario",
    "batch",
]

log = logging.getLogger("triwave.scenario")

CHECK_LEVELS = ("fast", "full", "small_n")


@dataclass
class ScenarioConfig:
    """One runnable scenario; serializes to/from a flat JSON document."""

    flux: dict = field(default_factory=lambda: {"name": "quadratic_coupled", "params": {}})
    eps: float = 0.05
    w0: dict = field(default_factory=lambda: {"random": {"jumps": 4, "max_amplitude": 0.4}})
    v0: dict = field(default_factory=lambda: {"random": {"jumps": 2, "max_amplitude": 0.3}})
    seed: int = 0
    check_level: str = "full"
    out_dir: str | None = None
    event_guard: int = 10**6
    write_snapshots: bool = False

    def __post_init__(self) -> None:
        if self.check_level not in CHECK_LEVELS:
            raise ValueError(f"check_level must be one of {CHECK_LEVELS}")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @staticmethod
    def from_json(path) -> "ScenarioConfig":
        with open(path) as fh:
            return ScenarioConfig(**json.load(fh))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=1)
            fh.write("\n")


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    trajectory: Trajectory
    checks: list[CheckResult]
    passed: bool
    out_dir: Path | None


def generate_initial_data(rand_spec: dict, rng: np.random.Generator, eps: float,
                          amp_limit: float) -> StepFunction:
    """Random compactly supported step function on [0, 10] with grid values.

    Draws ``jumps`` plateau values as a walk on the grid within the amplitude
    bound, forces the return to zero, and redraws (deterministically from the
    same stream) while the width/front-count constraints are violated.
    """
    n_jumps = int(rand_spec.get("jumps", 3))
    if n_jumps < 1:
        raise ValueError("need at least 1 jump")
    amp = float(rand_spec.get("max_amplitude", amp_limit))
    if amp > amp_limit + 1e-12:
        raise ValueError(f"amplitude {amp} exceeds the flux box ({amp_limit})")
    amp_ticks = int(np.floor(amp / eps + 1e-9))
    if amp_ticks < 1:
        raise ValueError("amplitude below one grid step")
    max_waves = rand_spec.get("max_waves")
    max_fronts = rand_spec.get("max_fronts")
    x_lo, x_hi = rand_spec.get("x_range", (0.0, 10.0))

    for _ in range(1000):
        values, prev = [], 0
        for _ in range(n_jumps):
            choices = [v for v in range(-amp_ticks, amp_ticks + 1) if v != prev]
            prev = int(rng.choice(choices))
            values.append(prev)
        if values[-1] != 0:
            values.append(0)
        xs = np.sort(rng.uniform(x_lo, x_hi, size=len(values)))
        if len(np.unique(xs)) != len(xs):
            continue
        step = StepFunction(tuple(float(x) for x in xs), tuple(values), 0)
        if max_waves is not None and step.tv_ticks() > max_waves:
            continue
        if max_fronts is not None and len(step.positions) > max_fronts:
            continue
        return step
    raise ValueError("could not generate initial data within constraints")


def build_initial_data(config: ScenarioConfig, spec: FluxSpec) -> tuple[StepFunction, StepFunction]:
    seq = np.random.SeedSequence(config.seed)
    rng_w, rng_v = (np.random.default_rng(s) for s in seq.spawn(2))

    def build(part: dict, rng, amp_limit: float) -> StepFunction:
        if "jumps" in part and "random" not in part:
            return StepFunction.from_jumps([(float(x), int(t)) for x, t in part["jumps"]])
        if "random" in part:
            rand = part["random"]
            if not rand:
                return StepFunction((), (), 0)
            return generate_initial_data(rand, rng, config.eps, amp_limit)
        return StepFunction((), (), 0)

    w_amp = min(abs(spec.box.w_min), abs(spec.box.w_max))
    v_amp = min(abs(spec.box.v_min), abs(spec.box.v_max))
    return build(config.w0, rng_w, w_amp), build(config.v0, rng_v, v_amp)


def run_scenario(config: ScenarioConfig, out_dir=None) -> ScenarioResult:
    """Run one scenario end to end and write its artifacts."""
    spec = make_flux(config.flux["name"], config.flux.get("params"))
    bounds = derivative_bounds(spec)
    w0, v0 = build_initial_data(config, spec)
    if config.check_level == "small_n":
        from .replay import MAX_REPLAY_WAVES

        if w0.tv_ticks() > MAX_REPLAY_WAVES:
            raise ValueError(
                f"check level small_n needs at most {MAX_REPLAY_WAVES} initial waves, "
                f"got {w0.tv_ticks()}; shrink the datum (e.g. max_waves in the w0 spec)"
            )
    history = PairHistory(spec=spec, eps=config.eps, bounds=bounds,
                          track_full_pi=(config.check_level == "small_n"))
    traj = run(
        w0, v0, spec, config.eps,
        bounds=bounds,
        history=history,
        event_guard=config.event_guard,
        validate_each_event=config.check_level in ("full", "small_n"),
    )
    checks = run_verifier(traj, level=config.check_level, history=history)
    passed = all(c.passed for c in checks)

    target = Path(out_dir) if out_dir is not None else (
        Path(config.out_dir) if config.out_dir else None
    )
    if target is not None:
        target.mkdir(parents=True, exist_ok=True)
        _atomic_write(target / "events.csv", lambda fh: _write_events(fh, traj))
        _atomic_write(target / "functionals.csv", lambda fh: _write_functionals(fh, traj))
        tmp = target / "report.json.tmp"
        write_report(checks, tmp)
        os.replace(tmp, target / "report.json")
        if config.write_snapshots:
            payload = {
                "initial": snapshot(traj.initial_state),
                "final": snapshot(traj.final_state),
            }
            _atomic_write(target / "snapshots.json",
                          lambda fh: json.dump(payload, fh, indent=1))
    if not passed:
        failed = [c for c in checks if not c.passed]
        log.error("scenario seed=%s failed %d checks; first: %s",
                  config.seed, len(failed), failed[0].as_dict())
    return ScenarioResult(config=config, trajectory=traj, checks=checks,
                          passed=passed, out_dir=target)


def _atomic_write(path: Path, writer) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _write_events(fh, traj: Trajectory) -> None:
    writer = csv.writer(fh)
    writer.writerow(["j", "t", "x", "kind", "n_waves", "v_strength", "cancellation"])
    for ev in traj.events:
        writer.writerow([
            ev.index,
            repr(ev.time),
            repr(ev.x),
            ev.kind.value,
            ev.n_participants(),
            repr(ev.v_strength),
            repr(ev.cancellation),
        ])


def _write_functionals(fh, traj: Trajectory) -> None:
    writer = csv.writer(fh)
    writer.writerow(["j", "t", "tv_w", "q_trans", "q_quadratic", "sum_abs_dsigma"])
    for snap in traj.snapshots:
        writer.writerow([
            snap.index,
            repr(snap.time),
            repr(snap.tv_w),
            repr(snap.q_trans),
            repr(snap.q_quadratic),
            repr(snap.sum_abs_dsigma),
        ])


def _batch_child(args: tuple) -> tuple[int, bool, dict]:
    config_dict, seed, out = args
    config = ScenarioConfig(**{**config_dict, "seed": seed, "out_dir": None})
    result = run_scenario(config, out_dir=out)
    return seed, result.passed, summarize(result.checks)


def batch(config: ScenarioConfig, seeds: list[int], out_dir=None,
          workers: int = 1) -> dict:
    """Run one scenario across many seeds; aggregate min slack per check name."""
    base = asdict(config)
    jobs = [
        (base, seed, str(Path(out_dir) / f"seed_{seed}") if out_dir else None)
        for seed in seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_batch_child, jobs))
    else:
        rows = [_batch_child(job) for job in jobs]

    aggregate: dict[str, dict] = {}
    all_passed = True
    for seed, passed, summary in rows:
        all_passed = all_passed and passed
        for name, agg in summary.items():
            slot = aggregate.setdefault(name, {"count": 0, "min_slack": None, "passed": True})
            slot["count"] += agg["count"]
            slot["passed"] = slot["passed"] and agg["passed"]
            if agg["min_slack"] is not None:
                slot["min_slack"] = (
                    agg["min_slack"] if slot["min_slack"] is None
                    else min(slot["min_slack"], agg["min_slack"])
                )
    out = {
        "seeds": list(seeds),
        "passed": all_passed,
        "per_seed": {str(seed): passed for seed, passed, _ in rows},
        "checks": aggregate,
    }
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / "summary.json", "w") as fh:
            json.dump(out, fh, indent=1)
            fh.write("\n")
    return out
