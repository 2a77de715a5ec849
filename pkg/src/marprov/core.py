"""Domain types and deterministic set/graph mechanics of the key-frame traffic model.

Frames carry ground-truth upload actions and feature-point sets; maps are
key-frame identity sets; similarity is the Jaccard coefficient of feature-point
sets.  Everything here is pure and value-like except :class:`MapState`
transitions, which return new states.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence


class ContractViolation(ValueError):
    """An operation was called outside its stated precondition."""


@dataclass(frozen=True)
class FrameRecord:
    """One camera frame.

    Parameters
    ----------
    frame_id : int
        Non-negative ordinal, strictly increasing and gapless within a trace.
    is_key : int
        Ground-truth upload action, 0 or 1.
    feature_points : frozenset
        Identifiers of feature points observed in the frame.  May be empty
        only when the owning trace declares similarity-only mode.
    """

    frame_id: int
    is_key: int
    feature_points: frozenset = frozenset()

    def __post_init__(self):
        if self.frame_id < 0:
            raise ContractViolation(f"frame_id must be non-negative, got {self.frame_id}")
        if self.is_key not in (0, 1):
            raise ContractViolation(f"is_key must be 0 or 1, got {self.is_key}")
        if not isinstance(self.feature_points, frozenset):
            object.__setattr__(self, "feature_points", frozenset(self.feature_points))


@dataclass(frozen=True)
class SlotWindow:
    """The F consecutive frames making up one provisioning slot.

    Slot t covers frame ids [t*F, (t+1)*F).
    """

    slot_index: int
    frames: tuple

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        f = self.frames
        if not f:
            raise ContractViolation("a slot must contain at least one frame")
        ids = [fr.frame_id for fr in f]
        if ids != list(range(ids[0], ids[0] + len(ids))):
            raise ContractViolation("slot frame_ids must be contiguous")
        if ids[0] != self.slot_index * len(f):
            raise ContractViolation(
                f"slot {self.slot_index} must start at frame {self.slot_index * len(f)}, "
                f"got {ids[0]}"
            )

    @property
    def F(self) -> int:
        return len(self.frames)


class FrameGraph:
    """Weighted undirected graph over frame identities.

    Weights live in [0, 1]; no self-edges; both endpoints of every stored
    edge must be nodes.  Storage is sparse: absent pairs read as weight 0.
    """

    def __init__(self, nodes: Iterable[int] = ()):
        self.nodes: set = set(nodes)
        self._weights: dict = {}

    @staticmethod
    def _key(f: int, g: int) -> tuple:
        return (f, g) if f < g else (g, f)

    def add_node(self, f: int) -> None:
        self.nodes.add(f)

    def set_weight(self, f: int, g: int, w: float) -> None:
        if f == g:
            raise ContractViolation("self-edges are not allowed")
        if f not in self.nodes or g not in self.nodes:
            raise ContractViolation(f"edge ({f},{g}) has an endpoint outside the node set")
        if not 0.0 <= w <= 1.0:
            raise ContractViolation(f"edge weight must lie in [0,1], got {w}")
        self._weights[self._key(f, g)] = w

    def weight(self, f: int, g: int) -> float:
        if f == g:
            raise ContractViolation("self-edges are not allowed")
        return self._weights.get(self._key(f, g), 0.0)

    def edges(self):
        """Iterate (f, g, weight) with f < g."""
        for (f, g), w in self._weights.items():
            yield f, g, w

    def incident_weights(self, f: int):
        """Iterate (other, weight) over stored edges touching f."""
        for (a, b), w in self._weights.items():
            if a == f:
                yield b, w
            elif b == f:
                yield a, w

    def max_incident_weight(self, f: int, default: float = 0.0) -> float:
        best = default
        found = False
        for _, w in self.incident_weights(f):
            best = w if not found or w > best else best
            found = True
        return best if found else default

    def __len__(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return len(self._weights)


@dataclass(frozen=True)
class MapState:
    """Edge-server 3D map, device 3D map, and the most recent cull set.

    All three are key-frame identity sets.  ``cull_set`` records what the
    last edge-map update removed.
    """

    edge_map: frozenset = frozenset()
    device_map: frozenset = frozenset()
    cull_set: frozenset = frozenset()

    def __post_init__(self):
        for name in ("edge_map", "device_map", "cull_set"):
            v = getattr(self, name)
            if not isinstance(v, frozenset):
                object.__setattr__(self, name, frozenset(v))


@dataclass(frozen=True)
class DState:
    """Detailed-predictor input: map graph plus the preceding-frame window graph.

    ``map_graph`` spans device_map ∪ {f}; how densely its edges are stored is
    up to the producer (the simulator stores only edges incident to f).
    ``window_graph`` spans exactly the min(X, f) frames preceding f.
    """

    map_graph: FrameGraph
    window_graph: FrameGraph
    frame_id: int
    X: int


@dataclass(frozen=True)
class SState:
    """Simplified-predictor input: the last T_w upload actions, most recent last.

    During warm-up the window is left-padded with zeros so its length is
    always exactly T_w.
    """

    action_window: tuple
    T_w: int

    def __post_init__(self):
        w = tuple(int(a) for a in self.action_window)
        if any(a not in (0, 1) for a in w):
            raise ContractViolation("action window entries must be 0 or 1")
        if len(w) > self.T_w:
            raise ContractViolation("action window longer than T_w")
        if len(w) < self.T_w:
            w = (0,) * (self.T_w - len(w)) + w
        object.__setattr__(self, "action_window", w)


def jaccard_similarity(a, b) -> float:
    """Jaccard coefficient |a∩b| / |a∪b| of two feature-point sets.

    Both sets empty returns 0.0: no shared observations.
    """
    if not a and not b:
        return 0.0
    a = a if isinstance(a, (set, frozenset)) else set(a)
    b = b if isinstance(b, (set, frozenset)) else set(b)
    inter = len(a & b)
    if inter == 0:
        return 0.0
    return inter / (len(a) + len(b) - inter)


def slot_key_count(slot: SlotWindow) -> int:
    """Realized number of key frames in the slot."""
    return sum(fr.is_key for fr in slot.frames)


def update_edge_map(state: MapState, uploaded, culled) -> MapState:
    """Apply one slot-end edge-map update: (edge_map ∪ uploaded) \\ culled."""
    uploaded = frozenset(uploaded)
    culled = frozenset(culled)
    if not culled <= (state.edge_map | uploaded):
        extra = sorted(culled - (state.edge_map | uploaded))
        raise ContractViolation(f"cull set contains frames not in the map: {extra}")
    return MapState(
        edge_map=(state.edge_map | uploaded) - culled,
        device_map=state.device_map,
        cull_set=culled,
    )


def update_device_map(state: MapState, f: int, a_prev: int) -> MapState:
    """Per-frame device-map update.

    The recurrence admits frame f-1 when the action on f-1 was 1; the index
    shift is deliberate (the frame admitted is the one just acted upon).
    """
    if a_prev not in (0, 1):
        raise ContractViolation(f"a_prev must be 0 or 1, got {a_prev}")
    if a_prev == 0 or f == 0:
        return state
    return MapState(
        edge_map=state.edge_map,
        device_map=state.device_map | {f - 1},
        cull_set=state.cull_set,
    )


def build_frame_graph(
    frames: Sequence[FrameRecord],
    sim_weights: Optional[Mapping] = None,
) -> FrameGraph:
    """Complete graph over the frames with Jaccard edge weights.

    In similarity-only mode pass ``sim_weights`` mapping unordered id pairs
    (as sorted tuples) to weights; a missing pair is an input error.
    """
    g = FrameGraph(fr.frame_id for fr in frames)
    for i, fa in enumerate(frames):
        for fb in frames[i + 1 :]:
            if sim_weights is not None:
                key = FrameGraph._key(fa.frame_id, fb.frame_id)
                if key not in sim_weights:
                    raise ContractViolation(
                        f"similarity-only mode is missing the pair weight for {key}"
                    )
                w = sim_weights[key]
            else:
                if not fa.feature_points and not fb.feature_points:
                    w = 0.0
                else:
                    w = jaccard_similarity(fa.feature_points, fb.feature_points)
            g.set_weight(fa.frame_id, fb.frame_id, w)
    return g


def select_cull_set(edge_map, capacity: int = 200) -> frozenset:
    """Sliding-capacity cull rule: when the map exceeds capacity, drop oldest first."""
    if capacity < 0:
        raise ContractViolation("capacity must be non-negative")
    overflow = len(edge_map) - capacity
    if overflow <= 0:
        return frozenset()
    return frozenset(sorted(edge_map)[:overflow])


def slots_of(frames: Sequence[FrameRecord], F: int):
    """Partition a gapless frame sequence into SlotWindows of width F."""
    if F <= 0:
        raise ContractViolation("F must be positive")
    if len(frames) % F != 0:
        raise ContractViolation(f"{len(frames)} frames do not divide into slots of {F}")
    return [
        SlotWindow(slot_index=t, frames=tuple(frames[t * F : (t + 1) * F]))
        for t in range(len(frames) // F)
    ]
