"""Per-slot orchestration of prediction, switching, reservation and metrics.

Each device runs the same slot loop: update the model switcher from the last
two realized counts, predict the slot with the selected model, reserve for
the posterior ε-quantile of the predicted demand, observe the realized count,
then refresh the channel-parameter estimate over the trailing window.  A
slicing baseline sized from pooled population moments runs on the identical
realizations.  Metrics report keyframe-weighted timeliness (TUKF), the
provisioned/required resource-block ratio (RP), and over-provisioning.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig, KIND_CHANNEL, KIND_SLAM, validate
from .core import ContractViolation, DState, FrameGraph, SState
from .demand import (
    LinkPredictor,
    SuffixBackoffPredictor,
    _as_interval,
    _MapSimilarityIndex,
    fit_link_predictor,
    predict_slot,
)
from .provisioning import (
    ChannelParams,
    ProvisionDecision,
    RadioConfig,
    bandwidth_for_k,
    estimate_channel,
    estimate_population_moments,
    k_star,
    slicing_inner,
    slot_capacity_k,
    tnr,
    tpr,
)
from .switching import SwitchState, delta, msf_step, observe_count
from .traces import Trace, generate_trace, read_trace

CSV_HEADER = "slot,device,model_tag,A_hat,k_true,k_star,rb_provisioned,rb_required,timely"


@dataclass(frozen=True)
class SlotLog:
    """One device-slot outcome row; the CSV schema plus internal extras."""

    slot: int
    device: str
    model_tag: str
    a_hat: int
    k_true: int
    k_star: int
    rb_provisioned: int
    rb_required: int
    timely: int
    bandwidth_hz: float = 0.0
    regime: str = ""

    def csv_row(self) -> str:
        a_hat = "" if self.a_hat < 0 else str(self.a_hat)
        return (
            f"{self.slot},{self.device},{self.model_tag},{a_hat},{self.k_true},"
            f"{self.k_star},{self.rb_provisioned},{self.rb_required},{self.timely}"
        )


@dataclass(frozen=True)
class MetricsReport:
    """Aggregated outcome of one pipeline over all devices and slots."""

    mode: str
    tukf: float
    rp_ratio: float
    over_provisioned_rbs: int
    timely_slot_fraction: float
    per_device: dict
    per_slot: tuple

    def summary_text(self) -> str:
        lines = [
            f"mode: {self.mode}",
            f"tukf: {self.tukf!r}",
            f"rp_ratio: {self.rp_ratio!r}",
            f"over_provisioned_rbs: {self.over_provisioned_rbs}",
            f"timely_slot_fraction: {self.timely_slot_fraction!r}",
        ]
        for dev in sorted(self.per_device):
            m = self.per_device[dev]
            lines.append(
                f"device {dev}: tukf={m['tukf']!r} rp_ratio={m['rp_ratio']!r} "
                f"mean_rb={m['mean_rb']!r}"
            )
        return "\n".join(lines) + "\n"


def compute_metrics(logs: Sequence[SlotLog], mode: str) -> MetricsReport:
    """TUKF, RP ratio and over-provisioning from per-slot logs.

    TUKF weights each slot by its realized key count: a slot's key frames
    are all timely or all late.  A run with no key frames at all has
    TUKF 1.  RP is total provisioned over total required resource blocks.
    """
    key_total = 0
    key_timely = 0
    prov_total = 0
    req_total = 0
    over = 0
    timely_slots = 0
    per_device: dict = {}
    for row in logs:
        # per-slot accounting identity: provisioned = required + over - under
        o = max(0, row.rb_provisioned - row.rb_required)
        u = max(0, row.rb_required - row.rb_provisioned)
        assert row.rb_provisioned == row.rb_required + o - u
        key_total += row.k_true
        key_timely += row.k_true * row.timely
        prov_total += row.rb_provisioned
        req_total += row.rb_required
        over += o
        timely_slots += row.timely
        d = per_device.setdefault(
            row.device,
            {"keys": 0, "timely_keys": 0, "prov": 0, "req": 0, "slots": 0, "over": 0},
        )
        d["keys"] += row.k_true
        d["timely_keys"] += row.k_true * row.timely
        d["prov"] += row.rb_provisioned
        d["req"] += row.rb_required
        d["slots"] += 1
        d["over"] += o

    def ratio(num, den, empty=1.0):
        if den == 0:
            return empty if num == 0 else math.inf
        return num / den

    per_device_out = {
        dev: {
            "tukf": ratio(d["timely_keys"], d["keys"]),
            "rp_ratio": ratio(d["prov"], d["req"]),
            "mean_rb": d["prov"] / d["slots"] if d["slots"] else 0.0,
            "over_provisioned_rbs": d["over"],
        }
        for dev, d in per_device.items()
    }
    n = len(logs)
    return MetricsReport(
        mode=mode,
        tukf=ratio(key_timely, key_total),
        rp_ratio=ratio(prov_total, req_total),
        over_provisioned_rbs=over,
        timely_slot_fraction=timely_slots / n if n else 1.0,
        per_device=per_device_out,
        per_slot=tuple(logs),
    )


def aggregate_bandwidth(decisions: Sequence[ProvisionDecision]) -> float:
    """Total reserved bandwidth across devices for one slot."""
    return sum(d.bandwidth_hz for d in decisions)


def run_slot(device, t: int, r: RadioConfig) -> ProvisionDecision:
    """Execute one slot for one device; the device appends to its decision log."""
    device.step(t, r)
    return device.decisions[-1]


class DeviceRun:
    """One device's full pipeline state over a slam-kind trace.

    Holds the trace, the predictor stack (suffix estimator, link fit, policy
    replay of the device map), the switch state, per-tag channel parameters,
    and the decision log.  ``noise`` maps regime name to the probability of
    flipping each predicted action (emulating degraded predictor fidelity).
    """

    def __init__(
        self,
        trace: Trace,
        cfg: ExperimentConfig,
        noise_rng: np.random.Generator,
        regimes: Optional[Sequence[str]] = None,
    ):
        self.trace = trace
        self.cfg = cfg
        self.F = cfg.F
        self.device_id = trace.device_id
        self.noise_rng = noise_rng
        self.regimes = list(regimes) if regimes is not None else [""] * trace.n_slots
        self.switch = SwitchState(
            delta_high=cfg.switching.delta_high,
            delta_low=cfg.switching.delta_low,
            M=cfg.switching.M,
        )
        prior = dict(p=cfg.estimation.prior_p, q=cfg.estimation.prior_q,
                     lam=cfg.estimation.prior_lam)
        self.params = {
            "D": ChannelParams(model_tag="D", **prior),
            "S": ChannelParams(model_tag="S", **prior),
            "all": ChannelParams(model_tag="all", **prior),
        }
        self.suffix = SuffixBackoffPredictor(
            T_w=cfg.predictor.t_window, min_support=cfg.predictor.min_support
        )
        self.action_window: list = []
        self.est_window: list = []  # per-slot lists of (a, a_hat, tag)
        self.map_index = _MapSimilarityIndex()
        self._pending: Optional[tuple] = None  # (frame_id, fps) awaiting admission
        self.link = LinkPredictor(
            decay=0.5, calibration_window=cfg.predictor.calibration_window,
            degenerate=True,
        )
        self._positions = [_as_interval(fr.feature_points) for fr in trace.frames]
        self._counts = trace.slot_key_counts()
        self.decisions: list = []
        self.logs: list = []
        self._last_sim = 0.0
        self._last_sim_id: Optional[int] = None
        # pre-noise per-frame prediction hits, for calibration checks
        self.frame_hits = 0
        self.frame_total = 0

    def _thin_dstate(self, t: int) -> DState:
        last_fid = t * self.F - 1 if t > 0 else 0
        mg = FrameGraph([last_fid])
        sim, sid = self._last_sim, self._last_sim_id
        if self._pending is not None and self._pending[0] == last_fid:
            # the slot's final frame was keyed; it joins the map before the
            # first predicted frame, so the rollout starts from similarity 1
            # (sentinel id: only the weight and map non-emptiness matter)
            sim, sid = 1.0, last_fid - 1
        if sid is not None:
            mg.add_node(sid)
            if sid != last_fid:
                mg.set_weight(last_fid, sid, sim)
        wg = FrameGraph(
            range(max(0, last_fid - self.cfg.predictor.x_window + 1), max(0, last_fid) + 1)
        )
        return DState(map_graph=mg, window_graph=wg, frame_id=last_fid,
                      X=self.cfg.predictor.x_window)

    def step(self, t: int, r: RadioConfig) -> SlotLog:
        cfg = self.cfg
        F = self.F
        d = delta(self.switch)
        self.switch = msf_step(self.switch, d)
        tag = self.switch.model_tag

        if tag == "D":
            pv = predict_slot(
                "D", t, F, dstate=self._thin_dstate(t), link=self.link,
                policy=cfg.generator.policy,
            )
        else:
            pv = predict_slot(
                "S", t, F,
                sstate=SState(tuple(self.action_window), cfg.predictor.t_window),
                predictor=self.suffix,
            )
        a_hat = list(pv.values)
        # noise draws happen every slot so paired runs consume identical streams
        flips = self.noise_rng.random(F)
        eta = cfg.predictor.noise.get(self.regimes[t], 0.0) if self.regimes[t] else 0.0
        if eta > 0.0:
            a_hat = [a ^ (1 if u < eta else 0) for a, u in zip(a_hat, flips)]
        a_hat_total = sum(a_hat)

        c = self.params[tag] if cfg.estimation.mode == "fine" else self.params["all"]
        ks = k_star(a_hat_total, F, c, r.epsilon)
        b, rb = bandwidth_for_k(ks, r)

        k_true = self._counts[t]
        timely = 1 if k_true <= ks else 0
        _, rb_req = bandwidth_for_k(k_true, r)

        # realization bookkeeping: estimation window, switcher, predictors, map
        frames = self.trace.frames[t * F : (t + 1) * F]
        self.frame_hits += sum(
            1 for fr, raw in zip(frames, pv.values) if fr.is_key == raw
        )
        self.frame_total += F
        slot_triples = [
            (fr.is_key, ah, tag) for fr, ah in zip(frames, a_hat)
        ]
        self.est_window.append(slot_triples)
        if len(self.est_window) > cfg.estimation.tau:
            self.est_window.pop(0)
        flat = [x for slot in self.est_window for x in slot]
        if cfg.estimation.mode == "fine":
            self.params[tag] = estimate_channel(flat, "fine")[tag]
        else:
            self.params["all"] = estimate_channel(flat, "coarse")["all"]

        self.switch = observe_count(self.switch, k_true)
        for fr in frames:
            self.suffix.observe(tuple(self.action_window), fr.is_key)
            self.action_window.append(fr.is_key)
            if len(self.action_window) > cfg.predictor.t_window:
                self.action_window.pop(0)
            if self._pending is not None:
                pid, pfps = self._pending
                self.map_index.add(pfps, pid)
                self._pending = None
            if fr.is_key == 1:
                self._pending = (fr.frame_id, fr.feature_points)
        last = frames[-1]
        self._last_sim, self._last_sim_id = self.map_index.best_match(
            last.feature_points
        )
        end = (t + 1) * F
        lo = max(0, end - cfg.predictor.calibration_window)
        if end - lo >= 2:
            self.link = fit_link_predictor(
                self.trace.frames[lo:end],
                calibration_window=cfg.predictor.calibration_window,
                positions=self._positions[lo:end],
            )

        log = SlotLog(
            slot=t, device=self.device_id, model_tag=tag, a_hat=a_hat_total,
            k_true=k_true, k_star=ks, rb_provisioned=rb, rb_required=rb_req,
            timely=timely, bandwidth_hz=b, regime=self.regimes[t],
        )
        self.logs.append(log)
        self.decisions.append(
            ProvisionDecision(
                slot_index=t, k_star=ks, bandwidth_hz=b, rb_count=rb,
                mode="user-centric", timely=timely,
            )
        )
        return log


def _kstar_table(F: int, c: ChannelParams, epsilon: float):
    """k_star for every a_hat in [0, F], via vectorized pmf convolution."""
    if c.lam == 1.0:
        return np.full(F + 1, F, dtype=np.int64)
    if c.lam == 0.0:
        return np.zeros(F + 1, dtype=np.int64)
    r_tp, r_tn = tpr(c), tnr(c)
    ks = np.empty(F + 1, dtype=np.int64)
    for a in range(F + 1):
        py = _np_binom_pmf(a, r_tp)
        pz = _np_binom_pmf(F - a, 1.0 - r_tn)
        cdf = np.cumsum(np.convolve(py, pz))
        ks[a] = int(np.searchsorted(cdf, epsilon))
    return ks


def _np_binom_pmf(n: int, s: float) -> np.ndarray:
    if n == 0:
        return np.ones(1)
    if s <= 0.0:
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    if s >= 1.0:
        out = np.zeros(n + 1)
        out[-1] = 1.0
        return out
    k = np.arange(n + 1)
    lg = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, n + 1)))))
    logpmf = lg[n] - lg[k] - lg[n - k] + k * math.log(s) + (n - k) * math.log1p(-s)
    return np.exp(logpmf)


class ChannelDeviceRun:
    """Channel-kind device: iid Bernoulli truth through a (p, q) channel.

    Reservations use either the true triple or the running estimate; no
    demand models or switching are involved (the prediction channel itself
    is the object under study).
    """

    def __init__(
        self,
        device_id: str,
        lam: float,
        cfg: ExperimentConfig,
        rng: np.random.Generator,
    ):
        self.device_id = device_id
        self.lam = lam
        self.cfg = cfg
        self.F = cfg.F
        self.rng = rng
        self.true_params = ChannelParams(p=cfg.channel.p, q=cfg.channel.q, lam=lam)
        self.est_params = ChannelParams(
            p=cfg.estimation.prior_p, q=cfg.estimation.prior_q,
            lam=cfg.estimation.prior_lam,
        )
        self._table = None
        if cfg.channel.params == "true":
            self._table = _kstar_table(cfg.F, self.true_params, cfg.radio.epsilon)
        self.est_window: list = []
        self.logs: list = []
        self.decisions: list = []

    def step(self, t: int, r: RadioConfig) -> SlotLog:
        F = self.F
        a = (self.rng.random(F) < self.lam).astype(np.int64)
        u = self.rng.random(F)
        a_hat = np.where(a == 1, u < self.true_params.p, u >= self.true_params.q)
        a_hat = a_hat.astype(np.int64)
        a_hat_total = int(a_hat.sum())
        if self._table is not None:
            ks = int(self._table[a_hat_total])
        else:
            ks = k_star(a_hat_total, F, self.est_params, r.epsilon)
        b, rb = bandwidth_for_k(ks, r)
        k_true = int(a.sum())
        timely = 1 if k_true <= ks else 0
        _, rb_req = bandwidth_for_k(k_true, r)
        if self.cfg.channel.params == "estimated":
            self.est_window.append(list(zip(a.tolist(), a_hat.tolist(), ["all"] * F)))
            if len(self.est_window) > self.cfg.estimation.tau:
                self.est_window.pop(0)
            flat = [x for slot in self.est_window for x in slot]
            self.est_params = estimate_channel(flat, "coarse")["all"]
        log = SlotLog(
            slot=t, device=self.device_id, model_tag="all", a_hat=a_hat_total,
            k_true=k_true, k_star=ks, rb_provisioned=rb, rb_required=rb_req,
            timely=timely, bandwidth_hz=b, regime="",
        )
        self.logs.append(log)
        self.decisions.append(
            ProvisionDecision(
                slot_index=t, k_star=ks, bandwidth_hz=b, rb_count=rb,
                mode="user-centric", timely=timely,
            )
        )
        return log


def _slicing_pass(
    counts_by_slot: Sequence[Sequence[int]],
    uc_logs_by_slot: Sequence[Sequence[SlotLog]],
    cfg: ExperimentConfig,
) -> list:
    """Size the shared reservation per slot from pooled trailing moments.

    Slot 0 has no history and reserves the full per-slot demand F per device
    (conservative bootstrap); afterwards the per-device share covers the
    ceiled normal-quantile demand level at the mean SNR, and each device's
    slot is timely iff its realized count fits its share's capacity.
    """
    r = cfg.radio
    tau = cfg.estimation.tau
    n = cfg.n_devices
    logs = []
    for t, slot_counts in enumerate(counts_by_slot):
        if t == 0:
            cap = cfg.F
        else:
            lo = max(0, t - tau)
            pooled = [k for ts in counts_by_slot[lo:t] for k in ts]
            k_mean, k_var = estimate_population_moments(pooled)
            inner = slicing_inner(k_mean, k_var, n, r.epsilon, cfg.slicing.mode)
            cap = max(0, math.ceil(inner))
        share_b, share_rb = bandwidth_for_k(cap, r)
        capacity = slot_capacity_k(share_b, r)
        for dev_i, k_true in enumerate(slot_counts):
            uc = uc_logs_by_slot[t][dev_i]
            timely = 1 if k_true <= capacity else 0
            logs.append(
                SlotLog(
                    slot=t, device=uc.device, model_tag="-", a_hat=-1,
                    k_true=k_true, k_star=cap, rb_provisioned=share_rb,
                    rb_required=uc.rb_required, timely=timely,
                    bandwidth_hz=share_b, regime=uc.regime,
                )
            )
    return logs


def generate_device_traces(cfg: ExperimentConfig):
    """The traces run_experiment would synthesize for this config.

    Returns (traces, regimes) lists indexed by device.  Seeding reads each
    device's seed-sequence child without spawning, so a separate generate
    step and an in-run generation agree byte for byte.
    """
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_devices)
    traces = []
    regimes = []
    for i, child in enumerate(children):
        gen_seed = int(child.generate_state(1, dtype=np.uint64)[0])
        schedule = cfg.schedule_for(i, gen_seed)
        if schedule.total_slots != cfg.slots:
            raise ContractViolation(
                f"generator schedule covers {schedule.total_slots} slots; "
                f"config asks for {cfg.slots}"
            )
        traces.append(
            generate_trace(
                cfg.generator.world, schedule, cfg.generator.policy,
                length_frames=cfg.slots * cfg.F, F=cfg.F,
                device_id=f"dev{i}", frame_rate=cfg.frame_rate,
            )
        )
        regimes.append(schedule.slot_regimes())
    return traces, regimes


def run_experiment(cfg: ExperimentConfig):
    """Run both pipelines on identical realizations.

    Returns (user_centric_report, slicing_report).  Fully deterministic in
    (config, seed): every random stream is spawned from the config seed in a
    fixed order.
    """
    validate(cfg)
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.n_devices)
    devices = []
    if cfg.kind == KIND_SLAM:
        if cfg.trace_files:
            traces = [read_trace(p) for p in cfg.trace_files]
            if len(traces) != cfg.n_devices:
                raise ContractViolation(
                    f"{len(traces)} trace files for {cfg.n_devices} devices"
                )
            for tr in traces:
                if tr.F != cfg.F:
                    raise ContractViolation(
                        f"trace {tr.device_id}: F={tr.F} mismatches config F={cfg.F}"
                    )
                if tr.n_slots < cfg.slots:
                    raise ContractViolation(
                        f"trace {tr.device_id}: {tr.n_slots} slots < config {cfg.slots}"
                    )
            regimes = [None] * cfg.n_devices
        else:
            traces, regimes = generate_device_traces(cfg)
        for i, tr in enumerate(traces):
            noise_rng = np.random.default_rng(children[i].spawn(1)[0])
            devices.append(DeviceRun(tr, cfg, noise_rng, regimes=regimes[i]))
    elif cfg.kind == KIND_CHANNEL:
        lambdas = cfg.resolved_lambdas()
        for i, lam in enumerate(lambdas):
            rng = np.random.default_rng(children[i])
            devices.append(ChannelDeviceRun(f"dev{i}", lam, cfg, rng))
    else:
        raise ContractViolation(f"unknown experiment kind {cfg.kind!r}")

    uc_logs_by_slot = []
    counts_by_slot = []
    for t in range(cfg.slots):
        for dev in devices:
            run_slot(dev, t, cfg.radio)
        slot_logs = [dev.logs[t] for dev in devices]
        uc_logs_by_slot.append(slot_logs)
        counts_by_slot.append([lg.k_true for lg in slot_logs])
    uc_logs = [lg for slot in uc_logs_by_slot for lg in slot]
    sl_logs = _slicing_pass(counts_by_slot, uc_logs_by_slot, cfg)
    uc = compute_metrics(uc_logs, mode="user-centric")
    sl = compute_metrics(sl_logs, mode="slicing")
    return uc, sl


def per_slot_csv(report: MetricsReport) -> str:
    """The per-slot CSV document for one report; header plus one row per log."""
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for row in report.per_slot:
        out.write(row.csv_row() + "\n")
    return out.getvalue()
