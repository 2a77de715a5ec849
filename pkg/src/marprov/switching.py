"""Model switching: hysteresis over the slot-to-slot key-count variation.

Δ is the absolute difference of the last two realized per-slot key counts.
Large variation snaps to the detailed model immediately; the switch to the
simplified model needs M accumulated low-variation slots.  Dead-band slots
change nothing, and in particular do not reset the counter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .core import ContractViolation


@dataclass(frozen=True)
class SwitchState:
    """Switcher state: model indicator h (1=detailed, 0=simplified), counter m."""

    h: int = 1
    m: int = 0
    delta_high: int = 4
    delta_low: int = 2
    M: int = 3
    last_two_counts: tuple = ()

    def __post_init__(self):
        if self.delta_low > self.delta_high:
            raise ContractViolation("need delta_low <= delta_high")
        if self.M < 1:
            raise ContractViolation("M must be >= 1")
        if self.h not in (0, 1):
            raise ContractViolation("h must be 0 or 1")
        if not 0 <= self.m < self.M:
            raise ContractViolation("m must satisfy 0 <= m < M")
        if len(self.last_two_counts) > 2:
            raise ContractViolation("last_two_counts keeps at most two entries")

    @property
    def model_tag(self) -> str:
        return "D" if self.h == 1 else "S"


def delta(state: SwitchState) -> int:
    """|k̃_{t-1} - k̃_{t-2}|, or 0 while fewer than two counts are known."""
    c = state.last_two_counts
    if len(c) < 2:
        return 0
    return abs(c[-1] - c[-2])


def msf_step(state: SwitchState, d: int) -> SwitchState:
    """One switching step for variation d; pure.

    d > delta_high: h=1, m=0.  d < delta_low: m grows and fires h=0, m=0 at M.
    Otherwise unchanged.
    """
    if d < 0:
        raise ContractViolation("variation must be non-negative")
    if d > state.delta_high:
        return replace(state, h=1, m=0)
    if d < state.delta_low:
        m = state.m + 1
        if m >= state.M:
            return replace(state, h=0, m=0)
        return replace(state, m=m)
    return state


def observe_count(state: SwitchState, k: int) -> SwitchState:
    """Record a realized slot key count into the two-count window."""
    if k < 0:
        raise ContractViolation("key counts are non-negative")
    return replace(state, last_two_counts=(state.last_two_counts + (k,))[-2:])
