"""Config defaults, validation diagnostics, and round trips."""

import math
from dataclasses import replace

import pytest

from marprov.config import (
    ConfigError,
    ExperimentConfig,
    from_dict,
    from_yaml,
    load,
    to_dict,
    to_yaml,
    validate,
)
from marprov.demand import ReferencePolicy


class TestDefaults:
    def test_experiment_shape(self):
        cfg = ExperimentConfig()
        assert cfg.kind == "slam"
        assert cfg.F == 10
        assert cfg.slots == 210
        assert cfg.frame_rate == 25.0
        assert cfg.n_devices == 1

    def test_radio_parameters(self):
        r = ExperimentConfig().radio
        assert r.alpha == 5e6
        assert r.t_r == 0.02
        assert r.gamma_db == 15.0
        assert r.epsilon == 0.8
        assert r.rb_bandwidth == 180e3
        assert r.log_base == 2.0

    def test_estimation_and_switching(self):
        cfg = ExperimentConfig()
        assert cfg.estimation.tau == 50
        assert cfg.estimation.mode == "fine"
        assert (cfg.estimation.prior_p, cfg.estimation.prior_q,
                cfg.estimation.prior_lam) == (0.9, 0.9, 0.25)
        assert (cfg.switching.delta_high, cfg.switching.delta_low,
                cfg.switching.M) == (4, 2, 3)

    def test_predictor_windows(self):
        p = ExperimentConfig().predictor
        assert (p.x_window, p.t_window, p.min_support, p.calibration_window) == (
            20, 30, 3, 40,
        )
        assert p.noise == {"stable": 0.0, "walk": 0.0, "burst": 0.0}

    def test_generator_schedule_covers_default_slots(self):
        cfg = ExperimentConfig()
        assert cfg.generator.segments == (("stable", 50), ("burst", 20))
        assert cfg.generator.repeat == 3
        assert cfg.schedule_for(0, seed=1).total_slots == cfg.slots

    def test_generator_policy_floods_slots(self):
        # the generator's burst must outlast one slot; the policy class keeps
        # its own shorter default for plain replay use
        assert ExperimentConfig().generator.policy.burst_len == 11
        assert ReferencePolicy().burst_len == 3

    def test_default_config_validates(self):
        cfg = ExperimentConfig()
        assert validate(cfg) is cfg


class TestScheduleAndLambdas:
    def test_schedule_repeats_segments(self):
        cfg = ExperimentConfig()
        sched = cfg.schedule_for(0, seed=9)
        assert sched.segments == (("stable", 50), ("burst", 20)) * 3
        regimes = sched.slot_regimes()
        assert regimes[:50] == ["stable"] * 50
        assert regimes[50:70] == ["burst"] * 20

    def test_lambda_broadcast(self):
        cfg = replace(ExperimentConfig(), kind="channel", n_devices=4)
        assert cfg.resolved_lambdas() == (0.3, 0.3, 0.3, 0.3)

    def test_lambda_exact_list(self):
        cfg = from_dict({
            "kind": "channel", "n_devices": 3,
            "channel": {"lambdas": [0.1, 0.2, 0.3]},
        })
        assert cfg.resolved_lambdas() == (0.1, 0.2, 0.3)

    def test_lambda_length_mismatch(self):
        with pytest.raises(ConfigError, match="channel.lambdas"):
            from_dict({
                "kind": "channel", "n_devices": 3,
                "channel": {"lambdas": [0.1, 0.2]},
            })


class TestValidationDiagnostics:
    @pytest.mark.parametrize(
        "doc,key",
        [
            ({"kind": "frost"}, "kind"),
            ({"F": 0}, "F"),
            ({"slots": 0}, "slots"),
            ({"n_devices": 0}, "n_devices"),
            ({"radio": {"epsilon": 1.5}}, "epsilon"),
            ({"generator": {"segments": [["flying", 5]]}}, r"generator.segments\[0\]"),
            ({"generator": {"segments": [["stable", 0]]}}, r"generator.segments\[0\]"),
            ({"predictor": {"noise": {"hover": 0.1}}}, "predictor.noise.hover"),
            ({"predictor": {"noise": {"stable": 1.5}}}, "predictor.noise.stable"),
            ({"switching": {"delta_low": 9}}, "switching.delta_low"),
            ({"estimation": {"mode": "fuzzy"}}, "estimation.mode"),
            ({"slicing": {"mode": "geometric"}}, "slicing.mode"),
            ({"channel": {"params": "psychic"}}, "channel.params"),
            ({"channel": {"lambdas": [1.5]}}, r"channel.lambdas\[0\]"),
            ({"trace_files": ["/nope/missing.trace"]}, r"trace_files\[0\]"),
        ],
    )
    def test_bad_value_names_key(self, doc, key):
        with pytest.raises(ConfigError, match=key):
            from_dict(doc)

    def test_unknown_root_key(self):
        with pytest.raises(ConfigError, match="bogus: unknown key"):
            from_dict({"bogus": 1})

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError, match="radio.warp: unknown key"):
            from_dict({"radio": {"warp": 9}})

    def test_section_must_be_mapping(self):
        with pytest.raises(ConfigError, match="radio: expected a mapping"):
            from_dict({"radio": 5})

    def test_root_must_be_mapping(self):
        with pytest.raises(ConfigError, match="config root"):
            from_dict([1, 2])


class TestRoundTrips:
    def test_dict_round_trip_of_defaults(self):
        cfg = ExperimentConfig()
        assert from_dict(to_dict(cfg)) == cfg

    def test_dict_round_trip_of_overrides(self):
        cfg = from_dict({
            "kind": "channel",
            "slots": 90,
            "seed": 42,
            "n_devices": 2,
            "radio": {"epsilon": 0.9, "gamma_db": 12.5},
            "generator": {"segments": [["walk", 30]], "repeat": 3,
                          "policy": {"burst_len": 4}},
            "predictor": {"noise": {"burst": 0.25}},
            "estimation": {"mode": "coarse", "tau": 9},
            "slicing": {"mode": "paper-literal"},
            "channel": {"lambdas": [0.2, 0.6], "params": "estimated"},
        })
        assert from_dict(to_dict(cfg)) == cfg
        assert cfg.generator.policy.burst_len == 4
        assert cfg.predictor.noise == {"stable": 0.0, "walk": 0.0, "burst": 0.25}
        assert cfg.channel.lambdas == (0.2, 0.6)

    def test_yaml_round_trip(self):
        cfg = replace(ExperimentConfig(), seed=17, slots=210)
        assert from_yaml(to_yaml(cfg)) == cfg

    def test_natural_log_survives_yaml(self):
        cfg = from_dict({"radio": {"log_base": "e"}})
        assert cfg.radio.log_base == math.e
        again = from_yaml(to_yaml(cfg))
        assert again.radio.log_base == math.e

    def test_empty_yaml_gives_defaults(self):
        assert from_yaml("") == ExperimentConfig()

    def test_invalid_yaml(self):
        with pytest.raises(ConfigError, match="invalid YAML"):
            from_yaml("kind: [unclosed")

    def test_load_from_file(self, tmp_path):
        p = tmp_path / "exp.yaml"
        cfg = replace(ExperimentConfig(), seed=5)
        p.write_text(to_yaml(cfg), encoding="utf-8")
        assert load(p) == cfg

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="config file not found"):
            load(tmp_path / "absent.yaml")

    def test_partial_document_keeps_other_defaults(self):
        cfg = from_dict({"slots": 70, "generator": {"repeat": 1}})
        assert cfg.slots == 70
        assert cfg.generator.repeat == 1
        assert cfg.F == 10
        assert cfg.radio.epsilon == 0.8
        assert cfg.generator.segments == (("stable", 50), ("burst", 20))
