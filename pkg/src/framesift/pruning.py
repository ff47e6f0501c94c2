"""Ratio-aware frame pruning.

Given a combined importance vector, keeps roughly a target fraction of
frames: a nearest-rank quantile threshold proposes candidates, a forced-keep
set protects boundary and transition frames, an exact count adjustment hits
the frame budget, and an optional gap-fill pass bounds the longest run of
dropped frames.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import int_ceil, int_floor
from .scoring import FrameScores
from .trajectory import Trajectory


@dataclass(frozen=True)
class PruneConfig:
    """Pruning knobs.

    Attributes:
        k_min: minimum number of retained frames per trajectory.
        preserve_transitions: protect first/last frames, gripper
            transitions, and top action-change frames from pruning.
        gap_fill: bound consecutive dropped runs by gap_factor / ratio.
        gap_factor: numerator of the maximum allowed retained-index gap.
        top_decile: fraction of frames protected by raw action change.
    """

    k_min: int = 8
    preserve_transitions: bool = True
    gap_fill: bool = True
    gap_factor: float = 2.0
    top_decile: float = 0.1

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_min", int(self.k_min))
        object.__setattr__(self, "gap_factor", float(self.gap_factor))
        object.__setattr__(self, "top_decile", float(self.top_decile))
        object.__setattr__(self, "preserve_transitions", bool(self.preserve_transitions))
        object.__setattr__(self, "gap_fill", bool(self.gap_fill))
        if self.k_min < 1:
            raise ValueError("k_min must be >= 1")
        if self.gap_factor <= 0:
            raise ValueError("gap_factor must be > 0")
        if not 0.0 <= self.top_decile <= 1.0:
            raise ValueError("top_decile must be in [0, 1]")


@dataclass(frozen=True)
class PrunedView:
    """The retained-frame index list for one trajectory at one ratio."""

    trajectory_id: str
    target_ratio: float
    retained: tuple[int, ...]
    num_frames: int
    actual_ratio: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "target_ratio", float(self.target_ratio))
        object.__setattr__(self, "retained", tuple(int(t) for t in self.retained))
        object.__setattr__(self, "num_frames", int(self.num_frames))
        r = self.retained
        if not r:
            raise ValueError("retained must be nonempty")
        if any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("retained indices must be strictly increasing")
        if r[0] < 1 or r[-1] > self.num_frames:
            raise ValueError(f"retained indices must lie in [1, {self.num_frames}]")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ValueError("target_ratio must be in (0, 1]")
        object.__setattr__(self, "actual_ratio", len(r) / self.num_frames)


def _check_ratio(r: float) -> float:
    r = float(r)
    if not 0.0 < r <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {r}")
    return r


def quantile_threshold(scores: np.ndarray, r: float) -> float:
    """Nearest-rank (1 - r) quantile of the scores.

    The threshold sits at ascending 1-based index max(1, ceil((1 - r) * T)),
    so r = 1 returns the minimum and every frame qualifies.
    """
    r = _check_ratio(r)
    x = np.asarray(scores, dtype=np.float64)
    if x.size < 1 or not np.all(np.isfinite(x)):
        raise ValueError("scores must be nonempty and finite")
    idx = max(1, int_ceil((1.0 - r) * x.size))
    return float(np.sort(x, kind="stable")[idx - 1])


def forced_keep_set(traj: Trajectory, scores: FrameScores, config: PruneConfig) -> set[int]:
    """Frames protected from pruning at every ratio.

    The union of the first and last frame, detected gripper transitions,
    and the ceil(top_decile * T) frames with the largest raw action change
    (ties resolved toward earlier frames).  Empty when transition
    preservation is disabled.
    """
    if not config.preserve_transitions:
        return set()
    T = traj.num_frames
    forced: set[int] = {1, T}
    forced.update(scores.gripper_transitions)
    n_dec = int_ceil(config.top_decile * T)
    if n_dec > 0:
        diffs = np.linalg.norm(np.diff(traj.actions, axis=0), axis=1)
        d = np.empty(T, dtype=np.float64)
        d[1:] = diffs
        d[0] = diffs[0]
        # primary key: d descending; tie key: frame ascending
        order = np.lexsort((np.arange(T), -d))
        forced.update(int(i) + 1 for i in order[:n_dec])
    return forced


def prune(
    scores: np.ndarray,
    r: float,
    forced: set[int],
    config: PruneConfig,
    trajectory_id: str = "",
) -> PrunedView:
    """Select retained frames for one target ratio.

    Candidates are frames scoring at or above the quantile threshold plus
    the forced set.  The candidate count is then adjusted to exactly
    max(K_r, |forced|) where K_r = min(T, max(k_min, floor(r * T))):
    surplus non-forced frames drop in ascending importance (ties drop the
    later frame first), deficits add the best excluded frames (ties take
    the earlier frame).  With gap_fill on, any retained-index gap larger
    than ceil(gap_factor / r) is filled with the most important frame
    inside it until no such gap remains.
    """
    r = _check_ratio(r)
    x = np.asarray(scores, dtype=np.float64)
    T = int(x.size)
    if T < 1 or not np.all(np.isfinite(x)):
        raise ValueError("scores must be nonempty and finite")
    for t in forced:
        if not 1 <= t <= T:
            raise ValueError(f"forced frame {t} outside [1, {T}]")

    k_r = min(T, max(config.k_min, int_floor(r * T)))
    theta = quantile_threshold(x, r)
    retained = set(int(i) + 1 for i in np.nonzero(x >= theta)[0])
    retained |= forced

    target = max(k_r, len(forced))
    if len(retained) > target:
        removable = sorted(
            (t for t in retained if t not in forced),
            key=lambda t: (x[t - 1], -t),
        )
        for t in removable:
            if len(retained) <= target:
                break
            retained.discard(t)
    elif len(retained) < k_r:
        additions = sorted(
            (t for t in range(1, T + 1) if t not in retained),
            key=lambda t: (-x[t - 1], t),
        )
        for t in additions:
            if len(retained) >= k_r:
                break
            retained.add(t)

    ordered = sorted(retained)
    if config.gap_fill:
        gap_bound = int_ceil(config.gap_factor / r)
        i = 0
        while i < len(ordered) - 1:
            u, w = ordered[i], ordered[i + 1]
            if w - u > gap_bound:
                inside = x[u : w - 1]
                ordered.insert(i + 1, u + 1 + int(np.argmax(inside)))
            else:
                i += 1

    return PrunedView(
        trajectory_id=trajectory_id,
        target_ratio=r,
        retained=tuple(ordered),
        num_frames=T,
    )
