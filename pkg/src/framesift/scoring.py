"""Per-frame importance scoring.

Combines three per-trajectory signals, each min-max normalized:

* action variation: local action change plus a short look-ahead variance,
* visual-action coherence: how much the visual stream moves per unit of
  action motion, estimated on sparse feature samples,
* task progress: density of a progress prior over normalized time.

A gripper-change factor then amplifies frames near gripper transitions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .trajectory import Trajectory

TPI_MODES = ("gmm", "gaussian", "none")

# provider(trajectory, frame_index) -> 1-d feature vector
FeatureProvider = Callable[[Trajectory, int], np.ndarray]


@dataclass(frozen=True)
class ImportanceConfig:
    """Scoring weights and knobs.

    Attributes:
        k: look-ahead window length for action variance.
        lam: weight of the look-ahead variance term.
        epsilon: denominator guard for coherence ratios.
        alpha, beta, gamma: mixing weights for the three normalized signals.
        gripper_weight: strength of the gripper-change amplification.
        vac_clip_percentile: coherence values above this per-trajectory
            percentile are clipped to it before normalization.
        vac_max_samples: at most this many frames are sampled for coherence.
        tpi_mode: "gmm" (fitted prior), "gaussian" (fixed bump), or "none".
        sigma_sq: variance of the gaussian progress bump.
    """

    k: int = 3
    lam: float = 0.1
    epsilon: float = 1e-6
    alpha: float = 0.6
    beta: float = 0.2
    gamma: float = 0.2
    gripper_weight: float = 1.0
    vac_clip_percentile: float = 95.0
    vac_max_samples: int = 16
    tpi_mode: str = "gaussian"
    sigma_sq: float = 0.2

    def __post_init__(self) -> None:
        object.__setattr__(self, "k", int(self.k))
        for name in ("lam", "epsilon", "alpha", "beta", "gamma", "gripper_weight",
                     "vac_clip_percentile", "sigma_sq"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "vac_max_samples", int(self.vac_max_samples))
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if min(self.alpha, self.beta, self.gamma) < 0 or self.alpha + self.beta + self.gamma <= 0:
            raise ValueError("alpha, beta, gamma must be >= 0 and sum to > 0")
        if self.gripper_weight < 0:
            raise ValueError("gripper_weight must be >= 0")
        if not 0 < self.vac_clip_percentile <= 100:
            raise ValueError("vac_clip_percentile must be in (0, 100]")
        if self.vac_max_samples < 2:
            raise ValueError("vac_max_samples must be >= 2")
        if self.tpi_mode not in TPI_MODES:
            raise ValueError(f"tpi_mode must be one of {TPI_MODES}")
        if self.sigma_sq <= 0:
            raise ValueError("sigma_sq must be > 0")


@dataclass(frozen=True, eq=False)
class FrameScores:
    """All per-frame score vectors for one trajectory (length T each)."""

    trajectory_id: str
    avi_raw: np.ndarray
    avi_norm: np.ndarray
    vac_raw: np.ndarray
    vac_norm: np.ndarray
    tpi_norm: np.ndarray
    gripper_signal_norm: np.ndarray
    gripper_transitions: tuple[int, ...]
    combined: np.ndarray
    flags: tuple[str, ...] = ()

    @property
    def num_frames(self) -> int:
        return int(self.combined.shape[0])


def minmax_normalize(scores: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]; a constant vector maps to all 0.5."""
    x = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("minmax_normalize: non-finite input")
    lo = float(x.min())
    hi = float(x.max())
    if hi > lo:
        return (x - lo) / (hi - lo)
    return np.full(x.shape, 0.5)


def compute_avi(actions: np.ndarray, k: int, lam: float) -> np.ndarray:
    """Action-variation importance: AVI(t) = d(t) + lam * mv(t).

    d(t) is the L2 action change from the previous frame with d(1) = d(2).
    mv(t) is the mean over dimensions of the population variance of the
    next min(k, T-t) actions; the window at t = T is empty and scores 0.
    """
    a = np.asarray(actions, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    T = a.shape[0]
    diffs = np.linalg.norm(np.diff(a, axis=0), axis=1)
    d = np.empty(T, dtype=np.float64)
    d[1:] = diffs
    d[0] = diffs[0]

    mv = np.zeros(T, dtype=np.float64)
    if T - k >= 1:
        # frames 1..T-k all have full k-wide windows; one strided pass
        windows = np.lib.stride_tricks.sliding_window_view(a, k, axis=0)
        mv[: T - k] = windows.var(axis=-1).mean(axis=1)[1:]
    for t in range(max(1, T - k + 1), T):
        mv[t - 1] = a[t:].var(axis=0).mean()
    return d + lam * mv


def uniform_sample_frames(T: int, max_samples: int) -> np.ndarray:
    """min(max_samples, T) distinct 1-based frame indices, always with 1 and T."""
    n = min(max_samples, T)
    return np.round(np.linspace(1, T, n)).astype(np.int64)


def compute_vac(
    traj: Trajectory,
    config: ImportanceConfig,
    provider: FeatureProvider | None = None,
) -> tuple[np.ndarray, list[str]]:
    """Visual-action coherence, interpolated to full trajectory length.

    Uses the trajectory's own sparse features when present; otherwise pulls
    features from `provider` at uniformly sampled frames.  Returns the raw
    (clipped, unnormalized) score vector plus any warning flags.  When fewer
    than two feature samples are usable the vector is all zeros and the
    trajectory is flagged; scoring never raises for feature problems.
    """
    T = traj.num_frames
    flags: list[str] = []

    if traj.visual_features:
        frames = np.array([vf.frame for vf in traj.visual_features], dtype=np.int64)
        vecs = np.stack([vf.vec for vf in traj.visual_features])
    elif provider is not None:
        frames = uniform_sample_frames(T, config.vac_max_samples)
        rows = []
        for t in frames:
            try:
                rows.append(np.asarray(provider(traj, int(t)), dtype=np.float64))
            except Exception as exc:
                flags.append(f"frame extraction failure at frame {int(t)}: {exc}")
                return np.zeros(T, dtype=np.float64), flags
        vecs = np.stack(rows)
    else:
        frames = np.empty(0, dtype=np.int64)
        vecs = np.empty((0, 0), dtype=np.float64)

    if frames.shape[0] < 2:
        flags.append("fewer than 2 visual feature samples; coherence disabled")
        return np.zeros(T, dtype=np.float64), flags

    dv = np.linalg.norm(np.diff(vecs, axis=0), axis=1)
    act = traj.actions[frames - 1]
    da = np.linalg.norm(np.diff(act, axis=0), axis=1)
    raw = np.empty(frames.shape[0], dtype=np.float64)
    raw[1:] = dv / (da + config.epsilon)
    raw[0] = raw[1]

    full = np.interp(np.arange(1, T + 1, dtype=np.float64), frames.astype(np.float64), raw)
    cap = np.percentile(full, config.vac_clip_percentile)
    return np.minimum(full, cap), flags


def compute_tpi_gaussian(T: int, sigma_sq: float) -> np.ndarray:
    """Fixed progress bump: exp(-(p - 0.5)^2 / sigma_sq), p = (t-1)/(T-1)."""
    p = np.arange(T, dtype=np.float64) / (T - 1)
    return np.exp(-((p - 0.5) ** 2) / sigma_sq)


def gripper_signal(
    actions: np.ndarray,
    gripper_dims: tuple[int, ...],
    avi_norm: np.ndarray,
) -> tuple[np.ndarray, tuple[int, ...]]:
    """Normalized gripper-change signal and detected transition frames.

    With no gripper dims the signal falls back to avi_norm and no frames are
    marked.  A transition is any frame whose raw gripper change exceeds half
    the per-dimension action range (floored at 1e-6).
    """
    if not gripper_dims:
        return np.array(avi_norm, dtype=np.float64, copy=True), ()
    g = np.asarray(actions, dtype=np.float64)[:, list(gripper_dims)]
    T = g.shape[0]
    raw = np.zeros(T, dtype=np.float64)
    raw[1:] = np.abs(np.diff(g, axis=0)).max(axis=1)
    tau = max(1e-6, 0.5 * float((g.max(axis=0) - g.min(axis=0)).max()))
    transitions = tuple(int(i) + 1 for i in np.nonzero(raw > tau)[0])
    return minmax_normalize(raw), transitions


def combine_importance(
    avi_norm: np.ndarray,
    vac_norm: np.ndarray,
    tpi_norm: np.ndarray,
    gripper_signal_norm: np.ndarray,
    config: ImportanceConfig,
) -> np.ndarray:
    base = config.alpha * avi_norm + config.beta * vac_norm + config.gamma * tpi_norm
    return base * (1.0 + config.gripper_weight * gripper_signal_norm)


def score_trajectory(
    traj: Trajectory,
    config: ImportanceConfig,
    prior=None,
    provider: FeatureProvider | None = None,
) -> FrameScores:
    """Compute every score vector for one trajectory.

    `prior` must be a fitted progress prior when config.tpi_mode == "gmm".
    Scoring depends only on this trajectory, so results are identical no
    matter what dataset the trajectory travels in.
    """
    avi_raw = compute_avi(traj.actions, config.k, config.lam)
    avi_norm = minmax_normalize(avi_raw)
    vac_raw, flags = compute_vac(traj, config, provider)
    vac_norm = minmax_normalize(vac_raw)

    T = traj.num_frames
    if config.tpi_mode == "gmm":
        if prior is None:
            raise ValueError("tpi_mode 'gmm' requires a fitted progress prior")
        from .progress import compute_tpi_gmm

        tpi_norm = compute_tpi_gmm(T, prior)
    elif config.tpi_mode == "gaussian":
        tpi_norm = compute_tpi_gaussian(T, config.sigma_sq)
    else:
        tpi_norm = np.full(T, 0.5, dtype=np.float64)

    gsig, transitions = gripper_signal(traj.actions, traj.gripper_dims, avi_norm)
    combined = combine_importance(avi_norm, vac_norm, tpi_norm, gsig, config)
    return FrameScores(
        trajectory_id=traj.id,
        avi_raw=avi_raw,
        avi_norm=avi_norm,
        vac_raw=vac_raw,
        vac_norm=vac_norm,
        tpi_norm=tpi_norm,
        gripper_signal_norm=gsig,
        gripper_transitions=transitions,
        combined=combined,
        flags=tuple(flags),
    )


class PixelStatProvider:
    """Built-in feature source for tests and demos.

    Synthesizes a grayscale image buffer from the frame's action state (a
    gradient background plus a bright blob positioned by the first two
    action values) and returns its row-major 8x8 block-mean downsample as a
    length-64 feature vector.  Deterministic in (trajectory, frame).
    """

    size = 64
    grid = 8

    def __call__(self, traj: Trajectory, frame: int) -> np.ndarray:
        a = traj.actions[frame - 1]
        s = self.size
        span = s - 16
        cx = 8 + span / (1.0 + np.exp(-float(a[0])))
        cy = 8 + span / (1.0 + np.exp(-float(a[1 % a.shape[0]])))
        yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)
        img = 0.2 + 0.3 * (xx + yy) / (2 * s)
        img += np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / 50.0)
        block = s // self.grid
        down = img.reshape(self.grid, block, self.grid, block).mean(axis=(1, 3))
        return down.reshape(-1)
