"""Synthetic trace generation and bit-exact trace serialization.

A camera walks an integer position line; each frame sees the ``view_width``
feature points starting at its position, so pairwise frame similarity decays
with camera displacement.  Movement regimes (stable / walk / burst) change
the displacement law per slot segment; key-frame labels come from running
the reference policy over the generated frames, the same implementation the
simulator replays.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import ContractViolation, FrameRecord
from .demand import PolicyRunner, ReferencePolicy

REGIMES = ("stable", "walk", "burst")

MODE_FEATURE_SETS = "feature-sets"
MODE_SIMILARITY_ONLY = "similarity-only"


class ParseError(ValueError):
    """Malformed trace document; the message names the offending line."""


@dataclass(frozen=True)
class RegimeSchedule:
    """Ordered movement-regime segments, in slots, plus the generation seed."""

    segments: tuple  # of (regime, duration_slots)
    seed: int = 0

    def __post_init__(self):
        segs = tuple((str(r), int(d)) for r, d in self.segments)
        object.__setattr__(self, "segments", segs)
        for r, d in segs:
            if r not in REGIMES:
                raise ContractViolation(f"unknown regime {r!r}")
            if d <= 0:
                raise ContractViolation("segment durations must be positive")

    @property
    def total_slots(self) -> int:
        return sum(d for _, d in self.segments)

    def slot_regimes(self) -> list:
        """Regime name for every slot, in order."""
        out = []
        for r, d in self.segments:
            out.extend([r] * d)
        return out


@dataclass(frozen=True)
class WorldModel:
    """Integer-line world: what a frame sees and how the camera moves.

    Displacements are uniform on [-half_width, +half_width] per regime;
    ``teleport_prob`` is the per-frame chance of a jump to a uniformly
    random position (tracking loss), nonzero only for bursts by default.
    """

    fp_universe_size: int = 100_000
    view_width: int = 400
    step_half_width: dict = field(
        default_factory=lambda: {"stable": 1, "walk": 5, "burst": 50}
    )
    teleport_prob: dict = field(
        default_factory=lambda: {"stable": 0.0, "walk": 0.0, "burst": 0.1}
    )

    def __post_init__(self):
        if self.fp_universe_size <= 0 or self.view_width <= 0:
            raise ContractViolation("world sizes must be positive")
        if self.view_width > self.fp_universe_size:
            raise ContractViolation("view_width cannot exceed fp_universe_size")
        for r in REGIMES:
            if r not in self.step_half_width or r not in self.teleport_prob:
                raise ContractViolation(f"missing movement law for regime {r!r}")
            if not 0.0 <= self.teleport_prob[r] <= 1.0:
                raise ContractViolation("teleport_prob must lie in [0,1]")


@dataclass(frozen=True)
class Trace:
    """One device's frame sequence plus the metadata the file header carries."""

    device_id: str
    frame_rate: float
    frames: tuple
    mode: str = MODE_FEATURE_SETS
    F: int = 10
    sim_weights: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.mode not in (MODE_FEATURE_SETS, MODE_SIMILARITY_ONLY):
            raise ContractViolation(f"unknown trace mode {self.mode!r}")
        if not self.device_id or any(c.isspace() for c in self.device_id):
            raise ContractViolation("device_id must be non-empty and whitespace-free")
        ids = [fr.frame_id for fr in self.frames]
        if ids != list(range(len(ids))):
            raise ContractViolation("trace frame_ids must be 0..n-1 gapless")
        if self.mode == MODE_FEATURE_SETS:
            for fr in self.frames:
                if not fr.feature_points:
                    raise ContractViolation(
                        f"frame {fr.frame_id}: empty feature set outside similarity-only mode"
                    )

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.device_id == other.device_id
            and self.frame_rate == other.frame_rate
            and self.frames == other.frames
            and self.mode == other.mode
            and self.F == other.F
            and self.sim_weights == other.sim_weights
        )

    @property
    def n_slots(self) -> int:
        return len(self.frames) // self.F

    def slot_key_counts(self) -> list:
        F = self.F
        return [
            sum(fr.is_key for fr in self.frames[t * F : (t + 1) * F])
            for t in range(self.n_slots)
        ]


def generate_trace(
    world: WorldModel,
    schedule: RegimeSchedule,
    policy: ReferencePolicy,
    length_frames: int,
    F: int = 10,
    device_id: str = "dev0",
    frame_rate: float = 25.0,
) -> Trace:
    """Generate a labeled trace; pure function of (world, schedule, policy, seed)."""
    if schedule.total_slots == 0 or not schedule.segments:
        raise ContractViolation("empty schedule generates an empty trace")
    if length_frames % F != 0:
        raise ContractViolation(f"length_frames={length_frames} not divisible by F={F}")
    if length_frames != schedule.total_slots * F:
        raise ContractViolation(
            f"schedule covers {schedule.total_slots} slots "
            f"but length_frames/F = {length_frames // F}"
        )
    rng = np.random.default_rng(schedule.seed)
    w = world.view_width
    pos_max = world.fp_universe_size - w
    pos = pos_max // 2
    regimes = schedule.slot_regimes()
    runner = PolicyRunner(policy)
    frames = []
    for fid in range(length_frames):
        regime = regimes[fid // F]
        if rng.random() < world.teleport_prob[regime]:
            pos = int(rng.integers(0, pos_max + 1))
        else:
            hw = world.step_half_width[regime]
            pos += int(rng.integers(-hw, hw + 1))
            pos = min(pos_max, max(0, pos))
        fps = frozenset(range(pos, pos + w))
        action = runner.step(fid, fps)
        frames.append(FrameRecord(frame_id=fid, is_key=action, feature_points=fps))
    return Trace(
        device_id=device_id,
        frame_rate=frame_rate,
        frames=tuple(frames),
        mode=MODE_FEATURE_SETS,
        F=F,
    )


def generate_bernoulli_trace(
    lam: float,
    n_slots: int,
    F: int = 10,
    seed: int = 0,
    device_id: str = "dev0",
    frame_rate: float = 25.0,
) -> Trace:
    """Trace whose key flags are iid Bernoulli(lam); for channel experiments.

    Feature sets are singletons so the feature-sets invariants hold; the
    similarity structure is deliberately meaningless here.
    """
    if not 0.0 <= lam <= 1.0:
        raise ContractViolation(f"lam must lie in [0,1], got {lam}")
    if n_slots <= 0 or F <= 0:
        raise ContractViolation("n_slots and F must be positive")
    rng = np.random.default_rng(seed)
    keys = (rng.random(n_slots * F) < lam).astype(int)
    frames = tuple(
        FrameRecord(frame_id=i, is_key=int(keys[i]), feature_points=frozenset((i,)))
        for i in range(n_slots * F)
    )
    return Trace(
        device_id=device_id,
        frame_rate=frame_rate,
        frames=frames,
        mode=MODE_FEATURE_SETS,
        F=F,
    )


_SIM_BLOCK = "sims"


def write_trace(trace: Trace) -> bytes:
    """Serialize to the line-delimited format; UTF-8, LF, bit-exact round trip."""
    out = io.StringIO()
    out.write(
        f"#trace device_id={trace.device_id} frame_rate={trace.frame_rate!r} "
        f"mode={trace.mode} F={trace.F}\n"
    )
    for fr in trace.frames:
        if trace.mode == MODE_FEATURE_SETS:
            third = ",".join(str(p) for p in sorted(fr.feature_points))
        else:
            third = _SIM_BLOCK
        out.write(f"{fr.frame_id}\t{fr.is_key}\t{third}\n")
    if trace.mode == MODE_SIMILARITY_ONLY:
        out.write(f"#{_SIM_BLOCK}\n")
        for (f, g), wgt in sorted((trace.sim_weights or {}).items()):
            out.write(f"{f}\t{g}\t{wgt!r}\n")
    return out.getvalue().encode("utf-8")


def read_trace(source: Union[str, Path, bytes, bytearray]) -> Trace:
    """Parse a trace document from a path or raw bytes.

    Raises :class:`ParseError` naming the first offending line on malformed
    input, duplicate or gapped frame_ids, or an unknown mode.
    """
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    else:
        p = Path(source)
        if not p.exists():
            raise ParseError(f"trace file not found: {p}")
        text = p.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith("#trace "):
        raise ParseError("line 1: missing '#trace' header")
    header: dict = {}
    for tok in lines[0][len("#trace ") :].split():
        if "=" not in tok:
            raise ParseError(f"line 1: malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        header[k] = v
    for k in ("device_id", "frame_rate", "mode", "F"):
        if k not in header:
            raise ParseError(f"line 1: header missing {k}")
    mode = header["mode"]
    if mode not in (MODE_FEATURE_SETS, MODE_SIMILARITY_ONLY):
        raise ParseError(f"line 1: unknown mode {mode!r}")
    try:
        frame_rate = float(header["frame_rate"])
        F = int(header["F"])
    except ValueError as e:
        raise ParseError(f"line 1: {e}") from None

    frames = []
    sim_weights: Optional[dict] = None
    in_sims = False
    expected_id = 0
    for ln, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            if mode == MODE_SIMILARITY_ONLY and line == f"#{_SIM_BLOCK}":
                in_sims = True
                sim_weights = {}
                continue
            raise ParseError(f"line {ln}: unexpected directive {line!r}")
        parts = line.split("\t")
        if in_sims:
            if len(parts) != 3:
                raise ParseError(f"line {ln}: similarity rows need 3 fields")
            try:
                f, g, wgt = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"line {ln}: malformed similarity row") from None
            if f == g:
                raise ParseError(f"line {ln}: self-similarity row")
            if not 0.0 <= wgt <= 1.0:
                raise ParseError(f"line {ln}: weight {wgt} outside [0,1]")
            sim_weights[(min(f, g), max(f, g))] = wgt
            continue
        if len(parts) != 3:
            raise ParseError(f"line {ln}: expected 3 tab-separated fields")
        try:
            fid = int(parts[0])
            is_key = int(parts[1])
        except ValueError:
            raise ParseError(f"line {ln}: malformed frame_id or is_key") from None
        if fid < expected_id:
            raise ParseError(f"line {ln}: duplicate or out-of-order frame_id {fid}")
        if fid > expected_id:
            raise ParseError(
                f"line {ln}: gap in frame_ids (expected {expected_id}, got {fid})"
            )
        expected_id += 1
        if is_key not in (0, 1):
            raise ParseError(f"line {ln}: is_key must be 0 or 1")
        if mode == MODE_FEATURE_SETS:
            if parts[2] == "":
                raise ParseError(
                    f"line {ln}: empty feature set outside similarity-only mode"
                )
            try:
                fps = frozenset(int(x) for x in parts[2].split(","))
            except ValueError:
                raise ParseError(f"line {ln}: malformed feature-point list") from None
        else:
            if parts[2] != _SIM_BLOCK:
                raise ParseError(
                    f"line {ln}: unknown similarity block reference {parts[2]!r}"
                )
            fps = frozenset()
        frames.append(FrameRecord(frame_id=fid, is_key=is_key, feature_points=fps))
    if mode == MODE_SIMILARITY_ONLY and sim_weights is None:
        sim_weights = {}
    return Trace(
        device_id=header["device_id"],
        frame_rate=frame_rate,
        frames=tuple(frames),
        mode=mode,
        F=F,
        sim_weights=sim_weights,
    )
