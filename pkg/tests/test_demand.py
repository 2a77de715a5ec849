import pytest
from hypothesis import given, strategies as st

from marprov.core import ContractViolation, DState, FrameGraph, FrameRecord, SState
from marprov.demand import (
    LinkPredictor,
    PolicyRunner,
    PolicyState,
    PredictionVector,
    ReferencePolicy,
    SuffixBackoffPredictor,
    _MapSimilarityIndex,
    build_dstate,
    fit_link_predictor,
    interval_jaccard,
    policy_decision,
    predict_detailed,
    predict_simplified,
    predict_slot,
    predict_slot_simplified,
)
from marprov.core import jaccard_similarity

POL = ReferencePolicy()


class TestReferencePolicy:
    def test_default_thresholds(self):
        assert POL.theta_high == 0.9
        assert POL.theta_low == 0.2
        assert POL.burst_len == 3

    def test_rejects_inverted_bands(self):
        with pytest.raises(ContractViolation):
            ReferencePolicy(theta_high=0.1, theta_low=0.5)


class TestPolicyDecision:
    def test_bootstrap_on_empty_map(self):
        a, s = policy_decision(POL, True, 0.0, PolicyState())
        assert a == 1 and s.burst_remaining == 0

    def test_high_similarity_skips(self):
        a, _ = policy_decision(POL, False, 0.95, PolicyState())
        assert a == 0

    def test_band_selects(self):
        a, s = policy_decision(POL, False, 0.5, PolicyState())
        assert a == 1 and s.burst_remaining == 0

    def test_tracking_loss_triggers_burst(self):
        a, s = policy_decision(POL, False, 0.05, PolicyState())
        assert a == 1 and s.burst_remaining == POL.burst_len - 1

    def test_burst_overrides_similarity(self):
        a, s = policy_decision(POL, False, 0.99, PolicyState(burst_remaining=2))
        assert a == 1 and s.burst_remaining == 1

    def test_burst_runs_to_completion(self):
        state = policy_decision(POL, False, 0.0, PolicyState())[1]
        actions = []
        for _ in range(POL.burst_len - 1):
            a, state = policy_decision(POL, False, 0.95, state)
            actions.append(a)
        assert actions == [1] * (POL.burst_len - 1)
        a, _ = policy_decision(POL, False, 0.95, state)
        assert a == 0  # burst exhausted, similarity rules resume


class TestIntervalFastPath:
    @given(
        st.integers(0, 100), st.integers(1, 60),
        st.integers(0, 100), st.integers(1, 60),
    )
    def test_interval_jaccard_matches_sets(self, s1, w1, s2, w2):
        a = (s1, w1)
        b = (s2, w2)
        expected = jaccard_similarity(set(range(s1, s1 + w1)), set(range(s2, s2 + w2)))
        assert interval_jaccard(a, b) == pytest.approx(expected, abs=1e-12)

    def test_index_matches_exact_scan(self):
        idx = _MapSimilarityIndex()
        sets = [frozenset(range(s, s + 10)) for s in (0, 7, 30)]
        for i, fps in enumerate(sets):
            idx.add(fps, i)
        probe = frozenset(range(5, 15))
        sim, fid = idx.best_match(probe)
        brute = max((jaccard_similarity(probe, s), i) for i, s in enumerate(sets))
        assert sim == pytest.approx(brute[0])
        assert fid == brute[1]

    def test_index_demotes_on_ragged_sets(self):
        idx = _MapSimilarityIndex()
        idx.add(frozenset(range(0, 10)), 0)
        idx.add(frozenset({1, 5, 9}), 1)  # not contiguous, forces exact mode
        probe = frozenset({1, 5})
        sim, fid = idx.best_match(probe)
        assert fid == 1
        assert sim == pytest.approx(2 / 3)

    def test_empty_index(self):
        sim, fid = _MapSimilarityIndex().best_match(frozenset({1}))
        assert sim == 0.0 and fid is None


class TestPolicyRunner:
    def test_admission_lags_one_frame(self):
        fps = frozenset(range(0, 400))
        runner = PolicyRunner(POL)
        assert runner.step(0, fps) == 1  # bootstrap; admitted at frame 1
        assert runner.step(1, fps) == 0  # now fully similar to the map

    def test_determinism(self):
        frames = [
            FrameRecord(i, 0, frozenset(range(i * 3, i * 3 + 50))) for i in range(40)
        ]
        a = PolicyRunner(POL).run(frames)
        b = PolicyRunner(POL).run(frames)
        assert a == b


class TestLinkPredictorFit:
    def test_recovers_exact_geometric_rate(self):
        # nested view windows: pairwise Jaccard is exactly 0.8^distance
        sizes = [10000, 8000, 6400, 5120, 4096]
        frames = [
            FrameRecord(i, 0, frozenset(range(0, n))) for i, n in enumerate(sizes)
        ]
        link = fit_link_predictor(frames)
        assert link.decay == pytest.approx(0.8, abs=1e-9)
        assert not link.degenerate

    def test_upper_clamp(self):
        frames = [FrameRecord(i, 0, frozenset(range(100))) for i in range(6)]
        assert fit_link_predictor(frames).decay == 0.99

    def test_lower_clamp(self):
        # consecutive overlap of 1 point, nothing at larger distances
        K = 100
        frames = [
            FrameRecord(i, 0, frozenset(range(i * (K - 1), i * (K - 1) + K)))
            for i in range(4)
        ]
        assert fit_link_predictor(frames).decay == 0.01

    def test_all_zero_similarity_degenerates(self):
        frames = [FrameRecord(i, 0, frozenset({i * 1000})) for i in range(5)]
        link = fit_link_predictor(frames)
        assert link.decay == 0.5 and link.degenerate

    def test_needs_two_frames(self):
        with pytest.raises(ContractViolation):
            fit_link_predictor([FrameRecord(0, 0, frozenset({1}))])

    def test_decay_bounds_enforced(self):
        with pytest.raises(ContractViolation):
            LinkPredictor(decay=1.0)
        with pytest.raises(ContractViolation):
            LinkPredictor(decay=0.0)


def thin_dstate(s0, frame_id=9):
    mg = FrameGraph([frame_id, frame_id - 1])
    mg.set_weight(frame_id, frame_id - 1, s0)
    wg = FrameGraph([frame_id])
    return DState(map_graph=mg, window_graph=wg, frame_id=frame_id, X=20)


class TestPredictDetailed:
    def test_similarity_collapse_predicts_burst(self):
        pv = predict_detailed(thin_dstate(1.0), LinkPredictor(decay=0.01), POL, 10)
        assert pv.values == (1,) * 10
        assert pv.model_tag == "D"

    def test_slow_decay_predicts_all_redundant(self):
        pv = predict_detailed(thin_dstate(1.0), LinkPredictor(decay=0.99), POL, 10)
        assert pv.values == (0,) * 10

    def test_zero_horizon(self):
        pv = predict_detailed(thin_dstate(1.0), LinkPredictor(decay=0.5), POL, 0)
        assert pv.values == ()

    def test_empty_map_bootstraps_then_tracks(self):
        mg = FrameGraph([0])
        ds = DState(map_graph=mg, window_graph=FrameGraph([0]), frame_id=0, X=20)
        pv = predict_detailed(ds, LinkPredictor(decay=0.99), POL, 4)
        # first rollout frame bootstraps; afterwards the predicted key anchors
        # similarity near 1 so nothing else is selected
        assert pv.values == (1, 0, 0, 0)


class TestSuffixBackoff:
    def test_empty_history_rounds_up(self):
        p = SuffixBackoffPredictor(T_w=4, min_support=1)
        assert p.predict((0, 0, 0, 0)) == 1  # 0.5 prior, ties predict 1

    def test_longest_supported_suffix_wins(self):
        p = SuffixBackoffPredictor(T_w=3, min_support=2)
        for _ in range(3):
            p.observe((1, 1, 0), 1)
        for _ in range(5):
            p.observe((0, 1, 0), 0)
        # suffix (1,0) is shared: 3 ones out of 8; full window disambiguates
        assert p.predict((1, 1, 0)) == 1
        assert p.predict((0, 1, 0)) == 0

    def test_backoff_when_support_is_thin(self):
        p = SuffixBackoffPredictor(T_w=3, min_support=3)
        p.observe((1, 1, 1), 0)  # support 1 for the long suffix, ignored
        for _ in range(4):
            p.observe((0, 0, 1), 1)
        # window (0,1,1): suffixes (0,1,1) and (1,1) unsupported, (1,) has 5 obs
        assert p.predict((0, 1, 1)) == 1

    def test_marginal_fallback(self):
        p = SuffixBackoffPredictor(T_w=2, min_support=10)
        for _ in range(6):
            p.observe((0, 0), 0)
        assert p.predict((1, 1)) == 0

    def test_tie_predicts_one(self):
        p = SuffixBackoffPredictor(T_w=1, min_support=2)
        p.observe((0,), 1)
        p.observe((0,), 0)
        assert p.predict((0,)) == 1

    def test_rejects_bad_parameters(self):
        with pytest.raises(ContractViolation):
            SuffixBackoffPredictor(T_w=0)


class TestPredictSimplified:
    @given(st.lists(st.tuples(st.tuples(st.integers(0, 1), st.integers(0, 1)),
                              st.integers(0, 1)), max_size=12),
           st.randoms(use_true_random=False))
    def test_history_order_is_irrelevant(self, history, rnd):
        sstate = SState(action_window=(0, 1), T_w=2)
        base = predict_simplified(sstate, history, min_support=2)
        shuffled = list(history)
        rnd.shuffle(shuffled)
        assert predict_simplified(sstate, shuffled, min_support=2) == base

    def test_autoregressive_rollout_extends_window(self):
        p = SuffixBackoffPredictor(T_w=2, min_support=1)
        # after a 1, always 1; after a 0, always 0
        for _ in range(3):
            p.observe((0, 1), 1)
            p.observe((1, 0), 0)
        pv = predict_slot_simplified(p, SState((0, 1), T_w=2), horizon=4)
        assert pv.values == (1, 1, 1, 1)
        assert pv.model_tag == "S"

    def test_predictions_do_not_contaminate_history(self):
        p = SuffixBackoffPredictor(T_w=2, min_support=1)
        p.observe((0, 0), 1)
        before = {k: tuple(v) for k, v in p._counts.items()}
        predict_slot_simplified(p, SState((0, 0), T_w=2), horizon=5)
        after = {k: tuple(v) for k, v in p._counts.items()}
        assert before == after


class TestPredictSlotDispatch:
    def test_unknown_tag(self):
        with pytest.raises(ContractViolation):
            predict_slot("Q", 0, 10)

    def test_detailed_requires_components(self):
        with pytest.raises(ContractViolation):
            predict_slot("D", 0, 10)

    def test_simplified_requires_components(self):
        with pytest.raises(ContractViolation):
            predict_slot("S", 0, 10)

    def test_dispatch_tags_vector(self):
        pv = predict_slot(
            "D", 3, 5, dstate=thin_dstate(1.0), link=LinkPredictor(decay=0.99),
            policy=POL,
        )
        assert pv.slot_index == 3 and pv.model_tag == "D"
        assert pv.a_hat_total == 0


class TestBuildDState:
    def test_window_is_trailing_x(self):
        frames = [FrameRecord(i, 0, frozenset({i})) for i in range(30)]
        ds = build_dstate(frames[:25], [], frames[25], X=4)
        assert ds.window_graph.nodes == {21, 22, 23, 24}

    def test_map_star_weights(self):
        cur = FrameRecord(5, 0, frozenset({1, 2}))
        mapped = [FrameRecord(0, 1, frozenset({2, 3}))]
        ds = build_dstate([], mapped, cur, X=4)
        assert ds.map_graph.weight(5, 0) == pytest.approx(1 / 3)


def exact_world_accuracy(decay, n_frames, F=10):
    """Self-prediction of the reference stack in an exactly geometric world."""
    pol = ReferencePolicy()
    map_ids: list = []
    pending = None
    state = PolicyState()
    actions = []
    snapshots = []
    for f in range(n_frames):
        if pending is not None:
            map_ids.append(pending)
            pending = None
        if f % F == 0:
            snapshots.append(list(map_ids))
        sim = max((decay ** (f - g) for g in map_ids), default=0.0)
        a, state = policy_decision(pol, not map_ids, sim, state)
        actions.append(a)
        if a == 1:
            pending = f
    hits = 0
    for t in range(n_frames // F):
        last_fid = t * F - 1 if t > 0 else 0
        best = None
        for g in snapshots[t]:
            s = 1.0 if g == last_fid else decay ** (last_fid - g)
            if best is None or s > best[0]:
                best = (s, g)
        mg = FrameGraph([last_fid])
        if best is not None:
            s, g = best
            sid = g if g != last_fid else last_fid - 1
            mg.add_node(sid)
            if sid != last_fid:
                mg.set_weight(last_fid, sid, s)
        wg = FrameGraph(range(max(0, last_fid - 19), last_fid + 1))
        ds = DState(map_graph=mg, window_graph=wg, frame_id=last_fid, X=20)
        pv = predict_slot("D", t, F, dstate=ds, link=LinkPredictor(decay=decay), policy=pol)
        hits += sum(1 for x, y in zip(pv.values, actions[t * F : (t + 1) * F]) if x == y)
    return hits / n_frames


class TestSelfPredictionCalibration:
    @pytest.mark.parametrize("decay", [0.90, 0.95, 0.97, 0.99])
    def test_detailed_rollout_reproduces_policy(self, decay):
        acc = exact_world_accuracy(decay, n_frames=1500)
        assert acc >= 0.95
