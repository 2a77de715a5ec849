"""Demand modeling: the reference key-frame policy and the two slot predictors.

The policy concretizes "upload when the frame is novel yet overlapping" with
two similarity thresholds plus a relocalization burst.  The detailed (D)
predictor rolls the map-similarity state forward with a fitted geometric
link predictor; the simplified (S) predictor is a suffix back-off estimator
over the recent action window.  Both emit one prediction vector per slot.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .core import (
    ContractViolation,
    DState,
    FrameGraph,
    FrameRecord,
    SState,
    build_frame_graph,
    jaccard_similarity,
)


@dataclass(frozen=True)
class ReferencePolicy:
    """Thresholded key-frame selection.

    A frame is selected when its best map similarity falls in
    [theta_low, theta_high); below theta_low tracking is considered lost and
    the next ``burst_len`` frames (including the trigger) are force-selected.
    """

    theta_high: float = 0.9
    theta_low: float = 0.2
    burst_len: int = 3

    def __post_init__(self):
        if not (0.0 < self.theta_low < self.theta_high < 1.0):
            raise ContractViolation(
                f"need 0 < theta_low < theta_high < 1, got "
                f"({self.theta_low}, {self.theta_high})"
            )
        if self.burst_len < 1:
            raise ContractViolation("burst_len must be >= 1")


@dataclass(frozen=True)
class PolicyState:
    """Relocalization-burst progress: how many forced selections remain."""

    burst_remaining: int = 0


@dataclass(frozen=True)
class PredictionVector:
    """Predicted per-frame actions for one slot."""

    slot_index: int
    values: tuple
    model_tag: str

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if any(v not in (0, 1) for v in self.values):
            raise ContractViolation("predicted actions must be 0 or 1")
        if self.model_tag not in ("D", "S"):
            raise ContractViolation(f"unknown model tag {self.model_tag!r}")

    @property
    def a_hat_total(self) -> int:
        return sum(self.values)


def policy_decision(
    policy: ReferencePolicy,
    map_empty: bool,
    max_similarity: float,
    state: PolicyState,
) -> tuple:
    """One policy step from the already-computed best map similarity.

    Returns (action, next_state).  Rule order: bootstrap on an empty map;
    forced selection while a burst is active; then the similarity bands.
    """
    if map_empty:
        return 1, state
    if state.burst_remaining > 0:
        return 1, PolicyState(burst_remaining=state.burst_remaining - 1)
    if max_similarity >= policy.theta_high:
        return 0, state
    if max_similarity >= policy.theta_low:
        return 1, state
    # tracking lost: this frame triggers a burst covering burst_len frames total
    return 1, PolicyState(burst_remaining=policy.burst_len - 1)


def reference_policy_step(
    policy: ReferencePolicy,
    dstate: DState,
    f: int,
    state: Optional[PolicyState] = None,
) -> tuple:
    """Policy step for frame f given its D-state.

    Returns (action, next_state).  The map is read from dstate.map_graph,
    whose nodes are device_map ∪ {f}; the best similarity is the largest
    stored weight incident to f.
    """
    state = state or PolicyState()
    map_empty = len(dstate.map_graph.nodes - {f}) == 0
    max_sim = dstate.map_graph.max_incident_weight(f, default=0.0)
    return policy_decision(policy, map_empty, max_sim, state)


def _as_interval(fps) -> Optional[tuple]:
    """(start, width) when the id set is a contiguous integer range, else None."""
    if not fps:
        return None
    lo = min(fps)
    hi = max(fps)
    if hi - lo + 1 == len(fps):
        return lo, len(fps)
    return None


def interval_jaccard(a: tuple, b: tuple) -> float:
    """Jaccard coefficient of two contiguous id ranges given as (start, width).

    Identical to the set computation: intersection and union are integer
    counts, so the final division matches bit for bit.
    """
    lo = max(a[0], b[0])
    hi = min(a[0] + a[1], b[0] + b[1])
    inter = hi - lo
    if inter <= 0:
        return 0.0
    return inter / (a[1] + b[1] - inter)


class _MapSimilarityIndex:
    """Best Jaccard similarity from a query frame to a growing map.

    Fast path: when every feature set is a contiguous equal-width range the
    map is a sorted list of start positions and a query is a bisect plus two
    interval overlaps.  Any frame breaking that structure drops the whole
    index to exact set scans (fine for small hand-written traces).
    """

    def __init__(self):
        self._starts: list = []  # (position, frame_id), sorted by position
        self._width: Optional[int] = None
        self._exact: list = []  # fallback: (feature set, frame_id)
        self._interval_mode = True

    def __len__(self) -> int:
        return len(self._starts) if self._interval_mode else len(self._exact)

    def _demote(self):
        if self._interval_mode:
            self._exact = [
                (frozenset(range(s, s + self._width)), fid) for s, fid in self._starts
            ]
            self._interval_mode = False

    def add(self, fps, frame_id: int) -> None:
        iv = _as_interval(fps)
        if self._interval_mode and iv is not None and (
            self._width is None or iv[1] == self._width
        ):
            self._width = iv[1]
            bisect.insort(self._starts, (iv[0], frame_id))
            return
        self._demote()
        self._exact.append((frozenset(fps), frame_id))

    def best_match(self, fps) -> tuple:
        """(best similarity, frame_id of a maximizing map frame or None)."""
        if len(self) == 0:
            return 0.0, None
        iv = _as_interval(fps)
        if self._interval_mode and iv is not None and iv[1] == self._width:
            i = bisect.bisect_left(self._starts, (iv[0], -1))
            best, best_id = 0.0, None
            for j in (i - 1, i):
                if 0 <= j < len(self._starts):
                    s, fid = self._starts[j]
                    w = interval_jaccard(iv, (s, self._width))
                    if best_id is None or w > best:
                        best, best_id = w, fid
            return best, best_id
        self._demote()
        q = frozenset(fps)
        best, best_id = -1.0, None
        for m, fid in self._exact:
            w = jaccard_similarity(q, m)
            if w > best:
                best, best_id = w, fid
        return best, best_id

    def best_similarity(self, fps) -> float:
        return self.best_match(fps)[0]


class PolicyRunner:
    """Streams frames through the reference policy, maintaining the device map.

    The map admits frame f-1 while processing frame f when the action on
    f-1 was 1 (the recurrence's index shift), so a selection becomes visible
    to the policy exactly one frame later.  The trace generator and every
    replay share this one implementation.
    """

    def __init__(self, policy: ReferencePolicy):
        self.policy = policy
        self.state = PolicyState()
        self.map_ids: list = []
        self._index = _MapSimilarityIndex()
        self._pending: Optional[tuple] = None  # (frame_id, fps) awaiting admission
        self.last_max_similarity: float = 0.0

    def step(self, frame_id: int, feature_points) -> int:
        if self._pending is not None:
            pid, pfps = self._pending
            self.map_ids.append(pid)
            self._index.add(pfps, pid)
            self._pending = None
        map_empty = len(self._index) == 0
        max_sim = 0.0 if map_empty else self._index.best_similarity(feature_points)
        self.last_max_similarity = max_sim
        action, self.state = policy_decision(self.policy, map_empty, max_sim, self.state)
        if action == 1:
            self._pending = (frame_id, feature_points)
        return action

    def run(self, frames: Sequence[FrameRecord]) -> list:
        return [self.step(fr.frame_id, fr.feature_points) for fr in frames]


@dataclass(frozen=True)
class LinkPredictor:
    """Geometric similarity-decay model: predicted ε at frame distance d is decay^d."""

    decay: float
    calibration_window: int = 40
    degenerate: bool = False

    def __post_init__(self):
        if not (0.0 < self.decay < 1.0):
            raise ContractViolation(f"decay must lie in (0,1), got {self.decay}")


def fit_link_predictor(
    frames: Sequence[FrameRecord],
    calibration_window: int = 40,
    positions: Optional[Sequence] = None,
) -> LinkPredictor:
    """Fit the geometric decay rate from observed pairwise similarities.

    Least squares of log(mean ε at distance d) against d through the origin,
    over distances whose mean similarity is positive; the result is clamped
    to [0.01, 0.99].  All-zero similarities fall back to decay 0.5 with the
    degenerate flag set.

    ``positions`` may carry precomputed (start, width) interval forms of the
    frames' feature sets, aligned with ``frames``; otherwise they are
    derived (exact set arithmetic when a set is not contiguous).
    """
    if len(frames) < 2:
        raise ContractViolation("need at least 2 frames to fit the link predictor")
    frames = list(frames[-calibration_window:])
    if positions is None:
        ivs = [_as_interval(fr.feature_points) for fr in frames]
    else:
        ivs = list(positions[-calibration_window:])
    n = len(frames)
    sums = [0.0] * n
    counts = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            a, b = ivs[i], ivs[j]
            if a is not None and b is not None:
                w = interval_jaccard(a, b)
            else:
                w = jaccard_similarity(frames[i].feature_points, frames[j].feature_points)
            d = j - i
            sums[d] += w
            counts[d] += 1
    num = 0.0
    den = 0.0
    any_positive = False
    for d in range(1, n):
        if counts[d] == 0:
            continue
        mean = sums[d] / counts[d]
        if mean <= 0.0:
            continue
        any_positive = True
        num += d * math.log(mean)
        den += d * d
    if not any_positive:
        return LinkPredictor(
            decay=0.5, calibration_window=calibration_window, degenerate=True
        )
    decay = math.exp(num / den)
    decay = min(0.99, max(0.01, decay))
    return LinkPredictor(decay=decay, calibration_window=calibration_window)


def predict_detailed(
    dstate: DState,
    link: LinkPredictor,
    policy: ReferencePolicy,
    horizon: int,
    slot_index: int = 0,
) -> PredictionVector:
    """Roll the D-state forward ``horizon`` synthetic frames.

    Future frame δ's similarity to the real map is the last observed best
    similarity scaled by decay^δ; its similarity to a key frame predicted at
    offset δ' earlier in the rollout is decay^(δ-δ') once that frame has been
    admitted (one-frame lag, as in the real recurrence).  The reference
    policy, including its relocalization burst, runs on the predicted
    similarities; predicted selections extend a rollout-local copy of the map.
    """
    f = dstate.frame_id
    real_map_empty = len(dstate.map_graph.nodes - {f}) == 0
    s0 = dstate.map_graph.max_incident_weight(f, default=0.0)
    decay = link.decay
    state = PolicyState()
    admitted: list = []  # offsets of predicted key frames already in the map copy
    pending: Optional[int] = None
    values = []
    for delta in range(1, horizon + 1):
        if pending is not None:
            admitted.append(pending)
            pending = None
        sim = 0.0
        if not real_map_empty:
            sim = s0 * decay**delta
        if admitted:
            # newest admitted predicted key is the closest, hence the max
            sim = max(sim, decay ** (delta - admitted[-1]))
        map_empty = real_map_empty and not admitted
        action, state = policy_decision(policy, map_empty, sim, state)
        if action == 1:
            pending = delta
        values.append(action)
    return PredictionVector(slot_index=slot_index, values=tuple(values), model_tag="D")


class SuffixBackoffPredictor:
    """Suffix back-off estimator over (action window, next action) history.

    Prediction: find the longest suffix of the current window with at least
    ``min_support`` occurrences in history and threshold its empirical
    1-rate at 0.5 (ties predict 1); back off suffix by suffix, finally to
    the marginal rate.  Counting ignores history order entirely.
    """

    def __init__(self, T_w: int = 30, min_support: int = 3):
        if T_w < 1 or min_support < 1:
            raise ContractViolation("T_w and min_support must be >= 1")
        self.T_w = T_w
        self.min_support = min_support
        self._counts: dict = {}
        self._marginal = [0, 0]  # [n, ones]

    def observe(self, window, outcome: int) -> None:
        window = tuple(window)[-self.T_w :]
        outcome = int(outcome)
        for L in range(1, len(window) + 1):
            c = self._counts.setdefault(window[-L:], [0, 0])
            c[0] += 1
            c[1] += outcome
        self._marginal[0] += 1
        self._marginal[1] += outcome

    def predict(self, window) -> int:
        window = tuple(window)[-self.T_w :]
        for L in range(len(window), 0, -1):
            c = self._counts.get(window[-L:])
            if c is not None and c[0] >= self.min_support:
                return 1 if c[1] / c[0] >= 0.5 else 0
        n, ones = self._marginal
        rate = ones / n if n else 0.5
        return 1 if rate >= 0.5 else 0


def predict_simplified(
    sstate: SState,
    history: Sequence,
    min_support: int = 3,
) -> int:
    """One-frame prediction from explicit (pattern, outcome) history pairs.

    Pure-function form of :class:`SuffixBackoffPredictor`: the pairs are
    counted fresh, so any permutation of ``history`` predicts identically.
    """
    pred = SuffixBackoffPredictor(T_w=sstate.T_w, min_support=min_support)
    for pattern, outcome in history:
        pred.observe(pattern, outcome)
    return pred.predict(sstate.action_window)


def predict_slot_simplified(
    predictor: SuffixBackoffPredictor,
    sstate: SState,
    horizon: int,
    slot_index: int = 0,
) -> PredictionVector:
    """Autoregressive S-model slot prediction.

    Each predicted action is appended to a window copy and feeds the next
    step; the fitted history is left untouched (predictions are never
    training data).
    """
    window = list(sstate.action_window)
    values = []
    for _ in range(horizon):
        a = predictor.predict(tuple(window))
        values.append(a)
        window.append(a)
        window = window[-sstate.T_w :]
    return PredictionVector(slot_index=slot_index, values=tuple(values), model_tag="S")


def predict_slot(
    model_tag: str,
    slot_index: int,
    horizon: int,
    dstate: Optional[DState] = None,
    link: Optional[LinkPredictor] = None,
    policy: Optional[ReferencePolicy] = None,
    sstate: Optional[SState] = None,
    predictor: Optional[SuffixBackoffPredictor] = None,
) -> PredictionVector:
    """Dispatch the slot prediction to the model selected by the switcher."""
    if model_tag == "D":
        if dstate is None or link is None or policy is None:
            raise ContractViolation("detailed prediction needs dstate, link and policy")
        return predict_detailed(dstate, link, policy, horizon, slot_index=slot_index)
    if model_tag == "S":
        if sstate is None or predictor is None:
            raise ContractViolation("simplified prediction needs sstate and predictor")
        return predict_slot_simplified(predictor, sstate, horizon, slot_index=slot_index)
    raise ContractViolation(f"unknown model tag {model_tag!r}")


def build_dstate(
    window_frames: Sequence[FrameRecord],
    map_frames: Sequence[FrameRecord],
    current: FrameRecord,
    X: int = 20,
) -> DState:
    """Assemble a D-state for ``current`` with a dense map star.

    window_frames must be the frames preceding ``current`` (at most X are
    used); map_frames are the device-map members with their feature sets.
    """
    window = list(window_frames)[-X:]
    wg = build_frame_graph(window)
    mg = FrameGraph(fr.frame_id for fr in map_frames)
    mg.add_node(current.frame_id)
    for fr in map_frames:
        mg.set_weight(
            current.frame_id,
            fr.frame_id,
            jaccard_similarity(current.feature_points, fr.feature_points),
        )
    return DState(map_graph=mg, window_graph=wg, frame_id=current.frame_id, X=X)
