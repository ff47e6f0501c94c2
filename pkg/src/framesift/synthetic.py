"""Seeded synthetic demonstration corpus with planted structure.

Every generated trajectory has piecewise constant-velocity arm motion, one
clean gripper transition at a known frame, a matching jump planted in its
sparse visual features, and a stage annotation near the transition's
normalized progress.  Useful for end-to-end tests where ground truth about
"the important frame" must be known exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import int_floor
from .scoring import uniform_sample_frames
from .trajectory import Dataset, Trajectory, VisualFeature

FEATURE_DIM = 16


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs for the synthetic corpus.

    Attributes:
        seed: master seed; trajectory i draws from a substream keyed by
            (seed, i), so contents do not depend on num_trajectories.
        num_trajectories: how many trajectories to emit.
        t_range: inclusive (min, max) trajectory length range.
        dims: action dimensionality.
        gripper_dim: 0-based gripper column, or None for no gripper.
        transition_progress: normalized position of the planted transition;
            the step lands at frame floor(transition_progress * T).
        noise_scale: gaussian noise on non-gripper action dims; 0 keeps the
            motion exactly piecewise constant-velocity.
    """

    seed: int = 0
    num_trajectories: int = 1
    t_range: tuple[int, int] = (60, 140)
    dims: int = 7
    gripper_dim: int | None = 6
    transition_progress: float = 0.6
    noise_scale: float = 0.02

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_range", (int(self.t_range[0]), int(self.t_range[1])))
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.num_trajectories < 1:
            raise ValueError("num_trajectories must be >= 1")
        lo, hi = self.t_range
        if lo < 2 or hi < lo:
            raise ValueError("t_range must satisfy 2 <= min <= max")
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.gripper_dim is not None and not 0 <= self.gripper_dim < self.dims:
            raise ValueError("gripper_dim must be in [0, dims)")
        if not 0.0 < self.transition_progress < 1.0:
            raise ValueError("transition_progress must be in (0, 1)")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")


def transition_frame(spec: GeneratorSpec, T: int) -> int:
    """Frame of the planted transition: floor(transition_progress * T),
    clamped into [2, T] so the step is visible as a frame-to-frame change."""
    return min(max(2, int_floor(spec.transition_progress * T)), T)


def _make_trajectory(spec: GeneratorSpec, index: int) -> Trajectory:
    rng = np.random.default_rng([spec.seed, index])
    lo, hi = spec.t_range
    T = int(rng.integers(lo, hi + 1))
    t_star = transition_frame(spec, T)
    t_idx = np.arange(1, T + 1, dtype=np.float64)

    actions = np.zeros((T, spec.dims), dtype=np.float64)
    arm_dims = [d for d in range(spec.dims) if d != spec.gripper_dim]
    for d in arm_dims:
        start = rng.uniform(-1.0, 1.0)
        v1, v2 = rng.uniform(-0.2, 0.2, size=2)
        before = np.minimum(t_idx, t_star) - 1.0
        after = np.maximum(t_idx - t_star, 0.0)
        actions[:, d] = start + v1 * before + v2 * after
    noise = rng.normal(0.0, 1.0, size=(T, len(arm_dims)))
    actions[:, arm_dims] += spec.noise_scale * noise
    if spec.gripper_dim is not None:
        actions[t_star - 1 :, spec.gripper_dim] = 1.0

    frames = uniform_sample_frames(T, FEATURE_DIM)
    amp = rng.uniform(0.2, 0.4, size=FEATURE_DIM)
    freq = rng.uniform(0.5, 2.0, size=FEATURE_DIM)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=FEATURE_DIM)
    jump = rng.uniform(0.8, 1.2, size=FEATURE_DIM)
    feats = []
    for f in frames:
        vec = amp * np.sin(2.0 * math.pi * freq * (f - 1) / T + phase)
        if f >= t_star:
            vec = vec + jump
        feats.append(VisualFeature(frame=int(f), vec=vec))

    center = float(np.clip(spec.transition_progress + rng.uniform(-0.02, 0.02), 0.0, 1.0))
    return Trajectory(
        id=f"syn-{index}",
        instruction=f"grasp the object and move it to the target zone (episode {index})",
        actions=actions,
        gripper_dims=(spec.gripper_dim,) if spec.gripper_dim is not None else (),
        visual_features=tuple(feats),
        stage_centers=(center,),
    )


def generate(spec: GeneratorSpec) -> Dataset:
    """Generate the corpus deterministically for a given spec."""
    trajectories = tuple(_make_trajectory(spec, i) for i in range(spec.num_trajectories))
    return Dataset(name=f"synthetic-{spec.seed}", trajectories=trajectories)
