import pytest

from triwave.history import PairHistory, cancellation_amount, m_value
from triwave.replay import Replay, pi_full_table
from triwave.scenario import ScenarioConfig, build_initial_data
from triwave.simulator import EventKind, run
from triwave.wavefield import StepFunction

EPS = 0.05


class TestMValue:
    # partitions are given as explicit member lists; the participant range is
    # the id interval of the waves sitting at the event point

    def test_no_class_inside_is_zero(self):
        classes = [[1, 2], [3], [4, 5]]
        assert m_value(classes, 6, 9, 1, 4, EPS) == 0.0

    def test_all_classes_inside_gives_full_span(self):
        classes = [[1], [2]]
        assert m_value(classes, 1, 2, 1, 2, EPS) == pytest.approx(2 * EPS)
        classes = [[1, 2], [3], [4, 5]]
        assert m_value(classes, 1, 5, 1, 5, EPS) == pytest.approx(5 * EPS)

    def test_mixed_containment_counts_contained_classes_only(self):
        classes = [[1, 2], [3], [4, 5], [6]]
        # participants cover ids 3..5: of the classes between the one holding
        # 2 and the one holding 6, only [3] and [4, 5] are inside
        assert m_value(classes, 3, 5, 2, 6, EPS) == pytest.approx(3 * EPS)
        # between 4 and 6 only [4, 5] lies inside
        assert m_value(classes, 3, 5, 4, 6, EPS) == pytest.approx(2 * EPS)

    def test_endpoints_must_be_covered(self):
        with pytest.raises(ValueError):
            m_value([[1], [2]], 1, 2, 1, 7, EPS)


class TestQTrans:
    def test_one_v_front_right_of_k_waves(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 3), (1.0, 0)])
        v0 = StepFunction.from_jumps([(5.0, 2), (9.0, 0)])
        traj = run(w0, v0, spec, EPS)
        # both v-fronts start right of all 6 waves: Q = (|v1| + |v2|) * 6 eps
        assert traj.snapshots[0].q_trans == pytest.approx((0.1 + 0.1) * 6 * EPS)

    def test_v_front_left_of_everything_contributes_zero(self, spec):
        w0 = StepFunction.from_jumps([(5.0, 1), (6.0, 0)])
        v0 = StepFunction.from_jumps([(0.0, 3), (1.0, 0)])
        traj = run(w0, v0, spec, EPS)
        assert traj.snapshots[0].q_trans == 0.0
        assert traj.events == []

    def test_matches_position_based_double_loop(self, spec, bounds):
        cfg = ScenarioConfig(
            seed=11,
            w0={"random": {"jumps": 5, "max_amplitude": 0.4, "max_waves": 30}},
            v0={"random": {"jumps": 3, "max_amplitude": 0.3}},
        )
        w0, v0 = build_initial_data(cfg, spec)
        history = PairHistory(spec=spec, eps=EPS, bounds=bounds)
        traj = run(w0, v0, spec, EPS, bounds=bounds, history=history)
        state = traj.final_state
        # oracle: strict position comparison (valid between events)
        want = 0.0
        for vf in state.v_fronts:
            for w in state.waves:
                if w.alive and w.pos < vf.pos:
                    want += vf.strength_ticks * EPS * EPS
        assert traj.snapshots[-1].q_trans == pytest.approx(want, abs=1e-12)


class TestQQuadratic:
    def test_single_jump_datum_is_zero(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 4), (9.0, 0)])
        history = PairHistory(spec=spec, eps=EPS, bounds=bounds)
        traj = run(w0, StepFunction((), (), 0), spec, EPS, bounds=bounds, history=history)
        # every pair inside one initial Riemann problem starts with weight 0
        first = [s for s in traj.snapshots if s.index == 0][0]
        # pairs across the two jumps never interacted; pairs inside one jump are 0
        n_never = 4 * 4
        assert first.q_quadratic == pytest.approx(bounds.norm_d2_ww * n_never * EPS**2)

    def test_initial_value_counts_never_met_pairs(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 1), (2.0, 2), (4.0, 3), (6.0, 0)])
        history = PairHistory(spec=spec, eps=EPS, bounds=bounds)
        traj = run(w0, StepFunction((), (), 0), spec, EPS, bounds=bounds, history=history)
        q0 = traj.snapshots[0].q_quadratic
        # waves: 1 + 1 + 1 + 3; pairs never met: all pairs across jumps
        n = 6
        met = 3  # the three pairs inside the final 3-wave jump
        expected = bounds.norm_d2_ww * (n * (n - 1) / 2 - met) * EPS**2
        assert q0 == pytest.approx(expected)
        assert q0 <= bounds.norm_d2_ww * traj.tv_w0**2

    def test_weight_drops_to_zero_when_pairs_join(self, spec, bounds):
        # two shocks merging: the never-met pairs across them become joined
        w0 = StepFunction.from_jumps([(0.0, 4), (1.0, 2), (2.0, 0)])
        history = PairHistory(spec=spec, eps=EPS, bounds=bounds)
        traj = run(w0, StepFunction((), (), 0), spec, EPS, bounds=bounds, history=history)
        inter = [ev for ev in traj.events if ev.kind.is_interaction]
        assert len(inter) == 1
        ev = inter[0]
        before = traj.snapshots[ev.index - 1].q_quadratic
        after = traj.snapshots[ev.index].q_quadratic
        # exactly |L| * |R| = 2 * 2 never-met pairs lose their default weight
        assert before - after == pytest.approx(bounds.norm_d2_ww * 4 * EPS**2)


class TestPiRecursion:
    def drive(self, spec, bounds, w0, v0, n_events):
        """Step the event loop by hand so histories can be read mid-run."""
        from triwave.flux import FluxTable
        from triwave.simulator import next_collision, resolve
        from triwave.wavefield import assign_initial_speeds, initial_enumeration

        state = initial_enumeration(w0, v0, EPS)
        table = FluxTable(spec, EPS)
        groups = assign_initial_speeds(state, table)
        history = PairHistory(spec=spec, eps=EPS, bounds=bounds, track_full_pi=True)
        history.initialize(state, groups)
        events = []
        for j in range(1, n_events + 1):
            cand = next_collision(state)
            if cand is None:
                break
            ev = resolve(cand, state, table, j)
            history.on_event(ev, state)
            events.append(ev)
        return state, history, events

    def test_first_division_starts_at_zero(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 2), (9.5, 0)])
        state, history, _ = self.drive(spec, bounds, w0, StepFunction((), (), 0), 0)
        pair = history.pairs[(1, 2)]
        assert pair.status == "divided"  # the rarefaction fan splits at t=0
        assert pair.pi == 0.0
        assert pair.record.classes[0].lo == 1 and pair.record.classes[1].hi == 2
        assert history.pairs[(3, 4)].status == "joined"

    def test_transversal_crossings_accumulate_pi(self, spec, bounds):
        # one v-front overtakes the two rarefaction waves in two events; each
        # crossing adds 2 ||d3f|| |v_h| eps, so after both the pair holds the
        # budget of a crossing of its whole two-singleton interval, 2 the span
        w0 = StepFunction.from_jumps([(0.0, 2), (9.5, 0)])
        v0 = StepFunction.from_jumps([(5.0, 2), (9.0, 0)])
        state, history, events = self.drive(spec, bounds, w0, v0, 2)
        assert [ (ev.kind, ev.v_front_id) for ev in events ] == \
            [(EventKind.TRANSVERSAL, 1), (EventKind.TRANSVERSAL, 1)]
        v_strength = 2 * EPS
        assert all(ev.v_strength == pytest.approx(v_strength) for ev in events)
        pair = history.pairs[(1, 2)]
        assert pair.pi == pytest.approx(2.0 * bounds.norm_d3_wwv * v_strength * 2 * EPS)

    def test_pi_unchanged_at_interactions_and_cancellations(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 4), (1.0, 2), (2.0, 0)])
        history = PairHistory(spec=spec, eps=EPS, bounds=bounds)
        traj = run(w0, StepFunction((), (), 0), spec, EPS, bounds=bounds, history=history)
        assert any(ev.kind.is_interaction for ev in traj.events)
        for pair in history.pairs.values():
            assert pair.pi == 0.0  # no transversal event ever happened

    def test_pair_weight_cases(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 2), (9.5, 0)])
        v0 = StepFunction.from_jumps([(5.0, 2), (9.0, 0)])
        state, history, _ = self.drive(spec, bounds, w0, v0, 2)
        assert history.pair_weight(state, 1, 3) == bounds.norm_d2_ww  # never met
        assert history.pair_weight(state, 3, 4) == 0.0                # joined shock
        pair = history.pairs[(1, 2)]
        want = pair.pi / ((abs(state.wave(2).w_hat - state.wave(1).w_hat) + 1) * EPS)
        assert history.pair_weight(state, 1, 2) == pytest.approx(want)
        assert want > 0.0


class TestPiFullTable:
    def test_empty_before_division(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 2), (9.5, 0)])
        traj = run(w0, StepFunction((), (), 0), spec, EPS, bounds=bounds)
        # the two shock waves of the downward jump never divide
        assert pi_full_table(traj, (3, 4)) == {}

    def test_zero_without_transversal_events(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 2), (9.5, 0)])
        traj = run(w0, StepFunction((), (), 0), spec, EPS, bounds=bounds)
        table = pi_full_table(traj, (1, 2), event_index=0)
        assert set(table) == {(1, 2)}
        assert table[(1, 2)] == 0.0

    def test_single_crossing_matches_m_formula(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 2), (9.5, 0)])
        v0 = StepFunction.from_jumps([(5.0, 2), (9.0, 0)])
        history = PairHistory(spec=spec, eps=EPS, bounds=bounds, track_full_pi=True)
        traj = run(w0, v0, spec, EPS, bounds=bounds, history=history)
        first_cross = next(ev for ev in traj.events
                           if ev.kind == EventKind.TRANSVERSAL and ev.colliding.lo in (1, 2))
        table = pi_full_table(traj, (1, 2), event_index=first_cross.index)
        m = m_value([[1], [2]], first_cross.participants.lo,
                    first_cross.participants.hi, 1, 2, EPS)
        assert table[(1, 2)] == pytest.approx(2.0 * bounds.norm_d3_wwv
                                              * first_cross.v_strength * m)

    def test_replay_guard(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 13), (9.5, 0)])
        traj = run(w0, StepFunction((), (), 0), spec, EPS, bounds=bounds)
        with pytest.raises(ValueError):
            pi_full_table(traj, (1, 2))


class TestCancellationAmount:
    def test_values_and_kind_guard(self, spec, bounds):
        w0 = StepFunction.from_jumps([(0.0, 3), (1.0, 2), (5.0, 0)])
        traj = run(w0, StepFunction((), (), 0), spec, EPS, bounds=bounds)
        canc = [ev for ev in traj.events if ev.kind == EventKind.CANCELLATION]
        assert canc and cancellation_amount(canc[0]) == pytest.approx(2 * EPS)
        other = [ev for ev in traj.events if not ev.kind == EventKind.CANCELLATION]
        with pytest.raises(ValueError):
            cancellation_amount(other[0])

    def test_matches_profile_tv_drop(self, spec, bounds):
        cfg = ScenarioConfig(
            seed=5,
            w0={"random": {"jumps": 5, "max_amplitude": 0.4, "max_waves": 30}},
            v0={"random": {"jumps": 3, "max_amplitude": 0.3}},
        )
        w0, v0 = build_initial_data(cfg, spec)
        traj = run(w0, v0, spec, EPS, bounds=bounds)
        for ev in traj.events:
            if ev.kind == EventKind.CANCELLATION:
                before = traj.snapshots[ev.index - 1].tv_w
                after = traj.snapshots[ev.index].tv_w
                assert cancellation_amount(ev) == pytest.approx(before - after)


class TestReplayAgreement:
    def test_replayed_q_matches_incremental_q(self, spec, bounds):
        for seed in range(8):
            cfg = ScenarioConfig(
                seed=seed,
                w0={"random": {"jumps": 3, "max_amplitude": 0.25, "max_waves": 12}},
                v0={"random": {"jumps": 2, "max_amplitude": 0.3}},
            )
            w0, v0 = build_initial_data(cfg, spec)
            history = PairHistory(spec=spec, eps=EPS, bounds=bounds, track_full_pi=True)
            traj = run(w0, v0, spec, EPS, bounds=bounds, history=history)
            steps = Replay(traj).run()
            assert len(steps) == len(traj.snapshots)
            for step, snap in zip(steps, traj.snapshots):
                assert step.q_quadratic == pytest.approx(snap.q_quadratic, abs=1e-12)
            # the production per-pair pi values agree with the replayed tables
            final = steps[-1]
            for key, pair in history.pairs.items():
                if pair.status == "divided":
                    assert final.pairs[key].status == "divided"
                    assert pair.pi == pytest.approx(final.pairs[key].pi[key], abs=1e-12)
                    rec_table = pair.record.pi_table
                    assert rec_table[key] == pytest.approx(pair.pi, abs=1e-15)
