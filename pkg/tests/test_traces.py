import statistics

import numpy as np
import pytest

from marprov.core import ContractViolation, FrameRecord
from marprov.demand import PolicyRunner, ReferencePolicy
from marprov.traces import (
    MODE_FEATURE_SETS,
    MODE_SIMILARITY_ONLY,
    ParseError,
    RegimeSchedule,
    Trace,
    WorldModel,
    generate_bernoulli_trace,
    generate_trace,
    read_trace,
    write_trace,
)

POLICY = ReferencePolicy()


def make_trace(regime_slots, seed=0, length=None, policy=POLICY):
    sch = RegimeSchedule(segments=regime_slots, seed=seed)
    n = length if length is not None else sch.total_slots * 10
    return generate_trace(WorldModel(), sch, policy, n, device_id="dev0")


class TestRegimeSchedule:
    def test_expands_segments_in_order(self):
        sch = RegimeSchedule(segments=(("stable", 2), ("burst", 1)))
        assert sch.slot_regimes() == ["stable", "stable", "burst"]
        assert sch.total_slots == 3

    def test_rejects_unknown_regime(self):
        with pytest.raises(ContractViolation):
            RegimeSchedule(segments=(("sprint", 2),))

    def test_rejects_nonpositive_length(self):
        with pytest.raises(ContractViolation):
            RegimeSchedule(segments=(("stable", 0),))


class TestGenerateTrace:
    def test_deterministic_bytes(self):
        a = write_trace(make_trace((("stable", 5), ("burst", 5)), seed=3))
        b = write_trace(make_trace((("stable", 5), ("burst", 5)), seed=3))
        assert a == b

    def test_seed_changes_trace(self):
        a = write_trace(make_trace((("burst", 10),), seed=0))
        b = write_trace(make_trace((("burst", 10),), seed=1))
        assert a != b

    def test_rejects_indivisible_length(self):
        sch = RegimeSchedule(segments=(("stable", 1),))
        with pytest.raises(ContractViolation):
            generate_trace(WorldModel(), sch, POLICY, 7, F=10)

    def test_rejects_empty_schedule(self):
        with pytest.raises(ContractViolation):
            generate_trace(WorldModel(), RegimeSchedule(segments=()), POLICY, 0)

    def test_rejects_schedule_length_mismatch(self):
        with pytest.raises(ContractViolation):
            make_trace((("stable", 10),), length=50)

    def test_stable_variance_below_walk_variance(self):
        stable = make_trace((("stable", 10),), seed=7, length=100)
        walk = make_trace((("walk", 10),), seed=7, length=100)
        assert statistics.variance(stable.slot_key_counts()) < statistics.variance(
            walk.slot_key_counts()
        )

    def test_burst_mean_exceeds_stable_mean(self):
        # the generator contract the switching tests lean on, >=100 slots each
        for seed in (0, 1, 2):
            burst = make_trace((("burst", 120),), seed=seed)
            stable = make_trace((("stable", 120),), seed=seed)
            assert statistics.mean(burst.slot_key_counts()) > statistics.mean(
                stable.slot_key_counts()
            )

    def test_labels_match_policy_replay(self):
        tr = make_trace((("stable", 6), ("burst", 4)), seed=5)
        runner = PolicyRunner(POLICY)
        replayed = [runner.step(fr.frame_id, fr.feature_points) for fr in tr.frames]
        assert replayed == [fr.is_key for fr in tr.frames]

    def test_feature_sets_are_view_windows(self):
        tr = make_trace((("walk", 3),), seed=2)
        w = WorldModel().view_width
        for fr in tr.frames:
            fps = fr.feature_points
            assert len(fps) == w
            assert max(fps) - min(fps) == w - 1


class TestBernoulliTrace:
    def test_slot_counts_near_lambda(self):
        tr = generate_bernoulli_trace(0.3, n_slots=2000, seed=1)
        mean = statistics.mean(tr.slot_key_counts())
        # Binomial(10, 0.3) mean 3.0, se ~ 0.032 over 2000 slots
        assert abs(mean - 3.0) < 0.15

    def test_rejects_bad_lambda(self):
        with pytest.raises(ContractViolation):
            generate_bernoulli_trace(1.5, n_slots=10)

    def test_deterministic(self):
        a = generate_bernoulli_trace(0.5, n_slots=20, seed=9)
        b = generate_bernoulli_trace(0.5, n_slots=20, seed=9)
        assert write_trace(a) == write_trace(b)


class TestRoundTrip:
    def test_hand_written_document(self):
        doc = (
            b"#trace device_id=cam7 frame_rate=25.0 mode=feature-sets F=3\n"
            b"0\t1\t10,11\n"
            b"1\t0\t11,12\n"
            b"2\t0\t12\n"
        )
        tr = read_trace(doc)
        assert tr.device_id == "cam7"
        assert len(tr.frames) == 3
        assert tr.frames[0].feature_points == frozenset({10, 11})
        assert write_trace(tr) == doc

    def test_generated_trace_round_trips(self):
        tr = make_trace((("stable", 3), ("burst", 2)), seed=11)
        data = write_trace(tr)
        assert read_trace(data) == tr
        assert write_trace(read_trace(data)) == data

    def test_gap_error_names_line(self):
        doc = (
            b"#trace device_id=d frame_rate=25.0 mode=feature-sets F=1\n"
            b"0\t0\t1\n"
            b"2\t0\t2\n"
        )
        with pytest.raises(ParseError, match="line 3"):
            read_trace(doc)

    def test_duplicate_id_rejected(self):
        doc = (
            b"#trace device_id=d frame_rate=25.0 mode=feature-sets F=1\n"
            b"0\t0\t1\n"
            b"0\t0\t2\n"
        )
        with pytest.raises(ParseError, match="line 3"):
            read_trace(doc)

    def test_unknown_mode_rejected(self):
        doc = b"#trace device_id=d frame_rate=25.0 mode=hologram F=1\n"
        with pytest.raises(ParseError, match="mode"):
            read_trace(doc)

    def test_malformed_line_rejected(self):
        doc = (
            b"#trace device_id=d frame_rate=25.0 mode=feature-sets F=1\n"
            b"0\t0\n"
        )
        with pytest.raises(ParseError, match="line 2"):
            read_trace(doc)

    def test_missing_file_names_path(self):
        with pytest.raises(ParseError, match="no/such/trace.txt"):
            read_trace("no/such/trace.txt")

    def test_similarity_only_round_trips(self):
        tr = Trace(
            device_id="s",
            frame_rate=30.0,
            frames=(FrameRecord(0, 1), FrameRecord(1, 0)),
            mode=MODE_SIMILARITY_ONLY,
            F=2,
            sim_weights={(0, 1): 0.625},
        )
        data = write_trace(tr)
        back = read_trace(data)
        assert back == tr
        assert write_trace(back) == data

    def test_thousand_random_traces_round_trip(self):
        rng = np.random.default_rng(2024)
        for i in range(1000):
            F = int(rng.integers(1, 5))
            n_slots = int(rng.integers(1, 4))
            n = F * n_slots
            keys = rng.integers(0, 2, n)
            mode = MODE_FEATURE_SETS if i % 2 == 0 else MODE_SIMILARITY_ONLY
            if mode == MODE_FEATURE_SETS:
                frames = tuple(
                    FrameRecord(
                        f,
                        int(keys[f]),
                        frozenset(int(x) for x in rng.integers(0, 50, rng.integers(1, 6))),
                    )
                    for f in range(n)
                )
                sims = None
            else:
                frames = tuple(FrameRecord(f, int(keys[f])) for f in range(n))
                sims = {
                    (f, g): float(np.round(rng.random(), 6))
                    for f in range(n)
                    for g in range(f + 1, n)
                    if rng.random() < 0.5
                }
            tr = Trace(
                device_id=f"r{i}",
                frame_rate=float(rng.choice([25.0, 29.97, 30.0, 59.94])),
                frames=frames,
                mode=mode,
                F=F,
                sim_weights=sims,
            )
            data = write_trace(tr)
            back = read_trace(data)
            assert back == tr
            assert write_trace(back) == data
