"""Training-time queries: ratio schedule and frame-index remapping.

The schedule serves full trajectories for a warmup phase, then interleaves
pruned and full steps at a fixed cadence.  Remapping sends any original
frame index to the nearest retained frame at or after it, so supervision
targets stay valid under pruning.
"""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

from .cache import PruneCache
from .pruning import PrunedView


@dataclass(frozen=True)
class Schedule:
    """Ratio schedule: warmup at full ratio, then pruned_per_full pruned
    steps followed by one full step, repeating."""

    warmup_steps: int = 5000
    pruned_ratio: float = 0.2
    pruned_per_full: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "warmup_steps", int(self.warmup_steps))
        object.__setattr__(self, "pruned_ratio", float(self.pruned_ratio))
        object.__setattr__(self, "pruned_per_full", int(self.pruned_per_full))
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if not 0.0 < self.pruned_ratio <= 1.0:
            raise ValueError("pruned_ratio must be in (0, 1]")
        if self.pruned_per_full < 0:
            raise ValueError("pruned_per_full must be >= 0")


@dataclass(frozen=True)
class SampleRecord:
    """What a dataloader needs to serve one (step, trajectory, frame) query."""

    step: int
    trajectory_id: str
    active_ratio: float
    original_t: int
    remapped_t: int


def active_ratio(step: int, schedule: Schedule) -> float:
    """Ratio in force at a 1-based training step.

    Steps <= warmup_steps run full; afterwards each cycle of
    (pruned_per_full + 1) steps runs the pruned ratio first and ends with
    one full step.
    """
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    if step <= schedule.warmup_steps:
        return 1.0
    j = (step - schedule.warmup_steps - 1) % (schedule.pruned_per_full + 1)
    return schedule.pruned_ratio if j < schedule.pruned_per_full else 1.0


def remap(view: PrunedView, t: int) -> int:
    """Smallest retained index >= t, or the last retained index if none.

    Binary search over the sorted retained list; monotone in t and
    idempotent on retained frames.
    """
    if not 1 <= t <= view.num_frames:
        raise ValueError(f"frame index {t} outside [1, {view.num_frames}]")
    i = bisect_left(view.retained, t)
    if i < len(view.retained):
        return view.retained[i]
    return view.retained[-1]


def serve_sample(
    cache: PruneCache,
    schedule: Schedule,
    step: int,
    trajectory_id: str,
    t: int,
) -> SampleRecord:
    """Resolve the active ratio for a step and remap a frame through it."""
    ratio = active_ratio(step, schedule)
    entry = cache.entries.get(trajectory_id)
    if entry is None:
        raise KeyError(f"unknown trajectory id '{trajectory_id}'")
    view = entry.views.get(ratio)
    if view is None:
        have = ", ".join(repr(r) for r in sorted(entry.views))
        raise LookupError(f"ratio not precomputed: {ratio!r} (cache has {have})")
    return SampleRecord(
        step=int(step),
        trajectory_id=trajectory_id,
        active_ratio=ratio,
        original_t=int(t),
        remapped_t=remap(view, t),
    )
