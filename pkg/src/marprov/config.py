"""Experiment configuration: defaults, validation, YAML round trip.

Every tunable the experiments use is visible here and overridable from a
config document; validation errors name the offending key with its section
path so a bad file fails loudly and precisely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .core import ContractViolation
from .demand import ReferencePolicy
from .provisioning import RadioConfig, SLICING_CLT, SLICING_PAPER_LITERAL
from .traces import REGIMES, RegimeSchedule, WorldModel

KIND_SLAM = "slam"
KIND_CHANNEL = "channel"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class PredictorSettings:
    """Windows and knobs of the two demand predictors."""

    x_window: int = 20
    t_window: int = 30
    min_support: int = 3
    calibration_window: int = 40
    noise: dict = field(
        default_factory=lambda: {"stable": 0.0, "walk": 0.0, "burst": 0.0}
    )


@dataclass(frozen=True)
class SwitchSettings:
    delta_high: int = 4
    delta_low: int = 2
    M: int = 3


@dataclass(frozen=True)
class EstimationSettings:
    """Channel-parameter estimation: window, granularity, and priors."""

    tau: int = 50
    mode: str = "fine"  # fine | coarse
    prior_p: float = 0.9
    prior_q: float = 0.9
    prior_lam: float = 0.25


@dataclass(frozen=True)
class SlicingSettings:
    mode: str = SLICING_CLT


@dataclass(frozen=True)
class ChannelSettings:
    """Channel-kind experiments: iid truth through a (p, q) prediction channel.

    ``params`` picks whether reservations use the true triple or the
    estimated one.  ``lambdas`` is broadcast to all devices when it has one
    entry; otherwise its length must equal n_devices.
    """

    lambdas: tuple = (0.3,)
    p: float = 0.85
    q: float = 0.9
    params: str = "true"  # true | estimated


@dataclass(frozen=True)
class GeneratorSettings:
    """Movement-regime trace synthesis for slam-kind experiments."""

    world: WorldModel = field(default_factory=WorldModel)
    segments: tuple = (("stable", 50), ("burst", 20))
    repeat: int = 3
    # burst_len=11 here (vs the policy's own default of 3): a tracking-loss
    # event must flood more than one slot of key frames or per-slot counts
    # never jump far enough for the switching detector to latch onto bursts.
    policy: ReferencePolicy = field(default_factory=lambda: ReferencePolicy(burst_len=11))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = KIND_SLAM
    F: int = 10
    frame_rate: float = 25.0
    n_devices: int = 1
    slots: int = 210
    seed: int = 0
    radio: RadioConfig = field(default_factory=RadioConfig)
    generator: GeneratorSettings = field(default_factory=GeneratorSettings)
    predictor: PredictorSettings = field(default_factory=PredictorSettings)
    switching: SwitchSettings = field(default_factory=SwitchSettings)
    estimation: EstimationSettings = field(default_factory=EstimationSettings)
    slicing: SlicingSettings = field(default_factory=SlicingSettings)
    channel: ChannelSettings = field(default_factory=ChannelSettings)
    trace_files: tuple = ()
    out_dir: str = "."

    def schedule_for(self, device: int, seed: int) -> RegimeSchedule:
        segs = tuple(self.generator.segments) * self.generator.repeat
        return RegimeSchedule(segments=segs, seed=seed)

    def resolved_lambdas(self) -> tuple:
        ls = tuple(self.channel.lambdas)
        if len(ls) == 1:
            return ls * self.n_devices
        if len(ls) != self.n_devices:
            raise ConfigError(
                f"channel.lambdas: expected 1 or {self.n_devices} entries, got {len(ls)}"
            )
        return ls


def _require(cond: bool, key: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{key}: {message}")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Range-check every field, naming the offending key on failure."""
    _require(cfg.kind in (KIND_SLAM, KIND_CHANNEL), "kind", f"unknown kind {cfg.kind!r}")
    _require(cfg.F >= 1, "F", "must be >= 1")
    _require(cfg.frame_rate > 0, "frame_rate", "must be positive")
    _require(cfg.n_devices >= 1, "n_devices", "must be >= 1")
    _require(cfg.slots >= 1, "slots", "must be >= 1")
    r = cfg.radio
    _require(r.alpha > 0, "radio.alpha", "must be positive")
    _require(r.t_r > 0, "radio.t_r", "must be positive")
    _require(0 < r.epsilon < 1, "radio.epsilon", "must lie in (0,1)")
    _require(r.rb_bandwidth > 0, "radio.rb_bandwidth", "must be positive")
    _require(r.log_base in (2.0, math.e), "radio.log_base", "must be 2 or e")
    g = cfg.generator
    _require(g.world.view_width > 0, "generator.world.view_width", "must be positive")
    _require(
        g.world.view_width <= g.world.fp_universe_size,
        "generator.world.view_width",
        "cannot exceed fp_universe_size",
    )
    _require(g.repeat >= 1, "generator.repeat", "must be >= 1")
    _require(len(g.segments) > 0, "generator.segments", "must not be empty")
    for i, (regime, dur) in enumerate(g.segments):
        _require(
            regime in REGIMES, f"generator.segments[{i}]", f"unknown regime {regime!r}"
        )
        _require(int(dur) > 0, f"generator.segments[{i}]", "duration must be positive")
    _require(
        0 < g.policy.theta_low < g.policy.theta_high < 1,
        "generator.policy",
        "need 0 < theta_low < theta_high < 1",
    )
    p = cfg.predictor
    _require(p.x_window >= 1, "predictor.x_window", "must be >= 1")
    _require(p.t_window >= 1, "predictor.t_window", "must be >= 1")
    _require(p.min_support >= 1, "predictor.min_support", "must be >= 1")
    _require(p.calibration_window >= 2, "predictor.calibration_window", "must be >= 2")
    for k, v in p.noise.items():
        _require(k in REGIMES, f"predictor.noise.{k}", "unknown regime")
        _require(0.0 <= v <= 1.0, f"predictor.noise.{k}", "must lie in [0,1]")
    s = cfg.switching
    _require(s.delta_low <= s.delta_high, "switching.delta_low", "must be <= delta_high")
    _require(s.M >= 1, "switching.M", "must be >= 1")
    e = cfg.estimation
    _require(e.tau >= 1, "estimation.tau", "must be >= 1")
    _require(e.mode in ("fine", "coarse"), "estimation.mode", f"unknown mode {e.mode!r}")
    for name in ("prior_p", "prior_q", "prior_lam"):
        _require(0.0 <= getattr(e, name) <= 1.0, f"estimation.{name}", "must lie in [0,1]")
    _require(
        cfg.slicing.mode in (SLICING_CLT, SLICING_PAPER_LITERAL),
        "slicing.mode",
        f"unknown mode {cfg.slicing.mode!r}",
    )
    c = cfg.channel
    for i, lam in enumerate(c.lambdas):
        _require(0.0 <= lam <= 1.0, f"channel.lambdas[{i}]", "must lie in [0,1]")
    _require(0.0 <= c.p <= 1.0, "channel.p", "must lie in [0,1]")
    _require(0.0 <= c.q <= 1.0, "channel.q", "must lie in [0,1]")
    _require(
        c.params in ("true", "estimated"), "channel.params", f"unknown choice {c.params!r}"
    )
    if cfg.kind == KIND_CHANNEL:
        cfg.resolved_lambdas()  # raises with the key name on length mismatch
    if cfg.trace_files:
        from pathlib import Path

        for i, tf in enumerate(cfg.trace_files):
            _require(Path(tf).exists(), f"trace_files[{i}]", f"no such file: {tf}")
    return cfg


def to_dict(cfg: ExperimentConfig) -> dict:
    """Plain nested-dict form with every default resolved."""
    d = {
        "kind": cfg.kind,
        "F": cfg.F,
        "frame_rate": cfg.frame_rate,
        "n_devices": cfg.n_devices,
        "slots": cfg.slots,
        "seed": cfg.seed,
        "radio": {
            "alpha": cfg.radio.alpha,
            "t_r": cfg.radio.t_r,
            "gamma_db": cfg.radio.gamma_db,
            "epsilon": cfg.radio.epsilon,
            "rb_bandwidth": cfg.radio.rb_bandwidth,
            "rb_duration": cfg.radio.rb_duration,
            "log_base": "e" if cfg.radio.log_base == math.e else 2,
        },
        "generator": {
            "world": {
                "fp_universe_size": cfg.generator.world.fp_universe_size,
                "view_width": cfg.generator.world.view_width,
                "step_half_width": dict(cfg.generator.world.step_half_width),
                "teleport_prob": dict(cfg.generator.world.teleport_prob),
            },
            "segments": [[r, d_] for r, d_ in cfg.generator.segments],
            "repeat": cfg.generator.repeat,
            "policy": {
                "theta_high": cfg.generator.policy.theta_high,
                "theta_low": cfg.generator.policy.theta_low,
                "burst_len": cfg.generator.policy.burst_len,
            },
        },
        "predictor": {
            "x_window": cfg.predictor.x_window,
            "t_window": cfg.predictor.t_window,
            "min_support": cfg.predictor.min_support,
            "calibration_window": cfg.predictor.calibration_window,
            "noise": dict(cfg.predictor.noise),
        },
        "switching": {
            "delta_high": cfg.switching.delta_high,
            "delta_low": cfg.switching.delta_low,
            "M": cfg.switching.M,
        },
        "estimation": {
            "tau": cfg.estimation.tau,
            "mode": cfg.estimation.mode,
            "prior_p": cfg.estimation.prior_p,
            "prior_q": cfg.estimation.prior_q,
            "prior_lam": cfg.estimation.prior_lam,
        },
        "slicing": {"mode": cfg.slicing.mode},
        "channel": {
            "lambdas": list(cfg.channel.lambdas),
            "p": cfg.channel.p,
            "q": cfg.channel.q,
            "params": cfg.channel.params,
        },
        "trace_files": list(cfg.trace_files),
        "out_dir": cfg.out_dir,
    }
    return d


def _section(d: dict, key: str, path: str) -> dict:
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return v


def from_dict(d: dict) -> ExperimentConfig:
    """Build a validated config from a nested dict; unknown keys are errors."""
    if not isinstance(d, dict):
        raise ConfigError("config root: expected a mapping")
    known = {
        "kind", "F", "frame_rate", "n_devices", "slots", "seed", "radio",
        "generator", "predictor", "switching", "estimation", "slicing",
        "channel", "trace_files", "out_dir",
    }
    for k in d:
        if k not in known:
            raise ConfigError(f"{k}: unknown key")
    defaults = ExperimentConfig()
    try:
        radio_d = _section(d, "radio", "radio")
        _check_keys(radio_d, "radio", {
            "alpha", "t_r", "gamma_db", "epsilon", "rb_bandwidth", "rb_duration",
            "log_base",
        })
        log_base_raw = radio_d.get("log_base", 2)
        log_base = math.e if log_base_raw in ("e", math.e) else float(log_base_raw)
        radio = RadioConfig(
            alpha=float(radio_d.get("alpha", defaults.radio.alpha)),
            t_r=float(radio_d.get("t_r", defaults.radio.t_r)),
            gamma_db=float(radio_d.get("gamma_db", defaults.radio.gamma_db)),
            epsilon=float(radio_d.get("epsilon", defaults.radio.epsilon)),
            rb_bandwidth=float(radio_d.get("rb_bandwidth", defaults.radio.rb_bandwidth)),
            rb_duration=float(radio_d.get("rb_duration", defaults.radio.rb_duration)),
            log_base=log_base,
        )
        gen_d = _section(d, "generator", "generator")
        _check_keys(gen_d, "generator", {"world", "segments", "repeat", "policy"})
        world_d = _section(gen_d, "world", "generator.world")
        _check_keys(world_d, "generator.world", {
            "fp_universe_size", "view_width", "step_half_width", "teleport_prob",
        })
        dw = defaults.generator.world
        world = WorldModel(
            fp_universe_size=int(world_d.get("fp_universe_size", dw.fp_universe_size)),
            view_width=int(world_d.get("view_width", dw.view_width)),
            step_half_width={
                **dw.step_half_width,
                **{k: int(v) for k, v in world_d.get("step_half_width", {}).items()},
            },
            teleport_prob={
                **dw.teleport_prob,
                **{k: float(v) for k, v in world_d.get("teleport_prob", {}).items()},
            },
        )
        pol_d = _section(gen_d, "policy", "generator.policy")
        _check_keys(pol_d, "generator.policy", {"theta_high", "theta_low", "burst_len"})
        dp = defaults.generator.policy
        policy = ReferencePolicy(
            theta_high=float(pol_d.get("theta_high", dp.theta_high)),
            theta_low=float(pol_d.get("theta_low", dp.theta_low)),
            burst_len=int(pol_d.get("burst_len", dp.burst_len)),
        )
        segments = gen_d.get("segments", [list(s) for s in defaults.generator.segments])
        generator = GeneratorSettings(
            world=world,
            segments=tuple((str(r), int(n)) for r, n in segments),
            repeat=int(gen_d.get("repeat", defaults.generator.repeat)),
            policy=policy,
        )
        pred_d = _section(d, "predictor", "predictor")
        _check_keys(pred_d, "predictor", {
            "x_window", "t_window", "min_support", "calibration_window", "noise",
        })
        dpr = defaults.predictor
        predictor = PredictorSettings(
            x_window=int(pred_d.get("x_window", dpr.x_window)),
            t_window=int(pred_d.get("t_window", dpr.t_window)),
            min_support=int(pred_d.get("min_support", dpr.min_support)),
            calibration_window=int(
                pred_d.get("calibration_window", dpr.calibration_window)
            ),
            noise={**dpr.noise, **{
                str(k): float(v) for k, v in pred_d.get("noise", {}).items()
            }},
        )
        sw_d = _section(d, "switching", "switching")
        _check_keys(sw_d, "switching", {"delta_high", "delta_low", "M"})
        dsw = defaults.switching
        switching = SwitchSettings(
            delta_high=int(sw_d.get("delta_high", dsw.delta_high)),
            delta_low=int(sw_d.get("delta_low", dsw.delta_low)),
            M=int(sw_d.get("M", dsw.M)),
        )
        est_d = _section(d, "estimation", "estimation")
        _check_keys(est_d, "estimation", {"tau", "mode", "prior_p", "prior_q", "prior_lam"})
        de = defaults.estimation
        estimation = EstimationSettings(
            tau=int(est_d.get("tau", de.tau)),
            mode=str(est_d.get("mode", de.mode)),
            prior_p=float(est_d.get("prior_p", de.prior_p)),
            prior_q=float(est_d.get("prior_q", de.prior_q)),
            prior_lam=float(est_d.get("prior_lam", de.prior_lam)),
        )
        sl_d = _section(d, "slicing", "slicing")
        _check_keys(sl_d, "slicing", {"mode"})
        slicing = SlicingSettings(mode=str(sl_d.get("mode", defaults.slicing.mode)))
        ch_d = _section(d, "channel", "channel")
        _check_keys(ch_d, "channel", {"lambdas", "p", "q", "params"})
        dc = defaults.channel
        lambdas_raw = ch_d.get("lambdas", list(dc.lambdas))
        if not isinstance(lambdas_raw, (list, tuple)):
            lambdas_raw = [lambdas_raw]
        channel = ChannelSettings(
            lambdas=tuple(float(x) for x in lambdas_raw),
            p=float(ch_d.get("p", dc.p)),
            q=float(ch_d.get("q", dc.q)),
            params=str(ch_d.get("params", dc.params)),
        )
        cfg = ExperimentConfig(
            kind=str(d.get("kind", defaults.kind)),
            F=int(d.get("F", defaults.F)),
            frame_rate=float(d.get("frame_rate", defaults.frame_rate)),
            n_devices=int(d.get("n_devices", defaults.n_devices)),
            slots=int(d.get("slots", defaults.slots)),
            seed=int(d.get("seed", defaults.seed)),
            radio=radio,
            generator=generator,
            predictor=predictor,
            switching=switching,
            estimation=estimation,
            slicing=slicing,
            channel=channel,
            trace_files=tuple(str(p) for p in d.get("trace_files", [])),
            out_dir=str(d.get("out_dir", defaults.out_dir)),
        )
    except ContractViolation as e:
        raise ConfigError(str(e)) from None
    return validate(cfg)


def _check_keys(d: dict, path: str, allowed: set) -> None:
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}: unknown key")


def to_yaml(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=True, default_flow_style=False)


def from_yaml(text: str) -> ExperimentConfig:
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config root: invalid YAML ({e})") from None
    if d is None:
        d = {}
    return from_dict(d)


def load(path) -> ExperimentConfig:
    from pathlib import Path

    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return from_yaml(p.read_text(encoding="utf-8"))
