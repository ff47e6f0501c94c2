"""Configuration-hashed store of frame scores and pruned views.

A cache bundles, for every trajectory in a dataset, the per-frame score
vectors and the retained-index lists for a whole grid of target ratios.  It
is keyed by a SHA-256 hash of the canonical serialization of the full
configuration, so consumers can verify compatibility by exact hash equality
and reuse one cache for any subset of its ratios.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import repeat

import numpy as np

from .progress import GmmPrior
from .pruning import PruneConfig, PrunedView, forced_keep_set, prune
from .scoring import FeatureProvider, FrameScores, ImportanceConfig, score_trajectory
from .trajectory import Dataset, Trajectory, validate_trajectory

ENVELOPE_KEYS = frozenset({"config_hash", "config", "entries", "flags"})


class CacheFormatError(ValueError):
    """Raised for malformed or internally inconsistent cache files."""


class ConfigMismatchError(RuntimeError):
    """Raised when a cache was built under a different configuration."""


@dataclass(frozen=True)
class CacheConfig:
    """Everything that determines cache contents.

    Ratios are sorted and deduplicated at construction so logically equal
    configurations serialize, and therefore hash, identically.
    """

    importance: ImportanceConfig = ImportanceConfig()
    prune: PruneConfig = PruneConfig()
    ratios: tuple[float, ...] = (0.2, 1.0)
    prior: GmmPrior | None = None

    def __post_init__(self) -> None:
        ratios = tuple(sorted(set(float(r) for r in self.ratios)))
        if not ratios:
            raise ValueError("ratios must be nonempty")
        for r in ratios:
            if not 0.0 < r <= 1.0:
                raise ValueError(f"ratio {r} outside (0, 1]")
        object.__setattr__(self, "ratios", ratios)


@dataclass(frozen=True, eq=False)
class CacheEntry:
    """Scores, forced keeps, and per-ratio views for one trajectory."""

    scores: FrameScores
    forced: tuple[int, ...]
    views: dict[float, PrunedView]


@dataclass(frozen=True, eq=False)
class PruneCache:
    config_hash: str
    config: CacheConfig
    entries: dict[str, CacheEntry]

    @property
    def flags(self) -> dict[str, tuple[str, ...]]:
        """Preprocessing warnings keyed by trajectory id (flagged ones only)."""
        return {tid: e.scores.flags for tid, e in self.entries.items() if e.scores.flags}


def canonical_config_dict(config: CacheConfig) -> dict:
    imp = config.importance
    pr = config.prune
    d: dict = {
        "importance": {
            "k": imp.k,
            "lam": imp.lam,
            "epsilon": imp.epsilon,
            "alpha": imp.alpha,
            "beta": imp.beta,
            "gamma": imp.gamma,
            "gripper_weight": imp.gripper_weight,
            "vac_clip_percentile": imp.vac_clip_percentile,
            "vac_max_samples": imp.vac_max_samples,
            "tpi_mode": imp.tpi_mode,
            "sigma_sq": imp.sigma_sq,
        },
        "prune": {
            "k_min": pr.k_min,
            "preserve_transitions": pr.preserve_transitions,
            "gap_fill": pr.gap_fill,
            "gap_factor": pr.gap_factor,
            "top_decile": pr.top_decile,
        },
        "ratios": list(config.ratios),
        "prior": None,
    }
    if config.prior is not None:
        d["prior"] = {
            "weights": list(config.prior.weights),
            "means": list(config.prior.means),
            "variances": list(config.prior.variances),
            "fit_log_likelihood": config.prior.fit_log_likelihood,
        }
    return d


def canonical_config_json(config: CacheConfig) -> str:
    """Canonical bytes for hashing: sorted keys, shortest round-trip floats,
    no whitespace."""
    return json.dumps(canonical_config_dict(config), sort_keys=True, separators=(",", ":"))


def config_hash(config: CacheConfig) -> str:
    return hashlib.sha256(canonical_config_json(config).encode("utf-8")).hexdigest()


def config_from_dict(d: dict) -> CacheConfig:
    """Parse a config object (the cache's embedded schema) into CacheConfig.

    Missing sections fall back to defaults; unknown keys are rejected so a
    typo cannot silently produce a differently-hashed configuration.
    """
    if not isinstance(d, dict):
        raise CacheFormatError("config must be an object")
    unknown = set(d.keys()) - {"importance", "prune", "ratios", "prior"}
    if unknown:
        raise CacheFormatError(f"config has unknown keys {sorted(unknown)}")
    try:
        importance = ImportanceConfig(**d.get("importance", {}))
        prune_cfg = PruneConfig(**d.get("prune", {}))
        prior = None
        if d.get("prior") is not None:
            prior = GmmPrior(**d["prior"])
        ratios = tuple(d.get("ratios", (0.2, 1.0)))
        return CacheConfig(importance=importance, prune=prune_cfg, ratios=ratios, prior=prior)
    except TypeError as exc:
        raise CacheFormatError(f"invalid config: {exc}") from None


def _build_entry(traj: Trajectory, config: CacheConfig, provider: FeatureProvider | None) -> CacheEntry:
    problems = validate_trajectory(traj)
    if problems:
        raise ValueError(f"trajectory '{traj.id}': " + "; ".join(problems))
    scores = score_trajectory(traj, config.importance, config.prior, provider)
    forced = forced_keep_set(traj, scores, config.prune)
    views = {
        r: prune(scores.combined, r, forced, config.prune, trajectory_id=traj.id)
        for r in config.ratios
    }
    return CacheEntry(scores=scores, forced=tuple(sorted(forced)), views=views)


def build_cache(
    dataset: Dataset,
    config: CacheConfig,
    provider: FeatureProvider | None = None,
    jobs: int = 1,
) -> PruneCache:
    """Score and prune every trajectory at every configured ratio.

    Trajectories are independent, so jobs > 1 fans the work over a process
    pool; results merge in dataset order either way, keeping the cache
    deterministic.
    """
    if config.importance.tpi_mode == "gmm" and config.prior is None:
        raise ValueError("tpi_mode 'gmm' requires config.prior to be set")
    ids = [t.id for t in dataset]
    if len(set(ids)) != len(ids):
        raise ValueError("dataset contains duplicate trajectory ids")

    entries: dict[str, CacheEntry] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            built = list(pool.map(_build_entry, dataset.trajectories, repeat(config), repeat(provider)))
        for traj, entry in zip(dataset.trajectories, built):
            entries[traj.id] = entry
    else:
        for traj in dataset:
            entries[traj.id] = _build_entry(traj, config, provider)
    return PruneCache(config_hash=config_hash(config), config=config, entries=entries)


def _scores_dict(s: FrameScores) -> dict:
    return {
        "avi_raw": s.avi_raw.tolist(),
        "avi_norm": s.avi_norm.tolist(),
        "vac_raw": s.vac_raw.tolist(),
        "vac_norm": s.vac_norm.tolist(),
        "tpi_norm": s.tpi_norm.tolist(),
        "gripper_signal_norm": s.gripper_signal_norm.tolist(),
        "gripper_transitions": list(s.gripper_transitions),
        "combined": s.combined.tolist(),
    }


def save_cache(cache: PruneCache, path: str) -> None:
    """Write the cache as a single JSON document, atomically.

    Identical caches serialize to byte-identical files: keys are sorted and
    floats use shortest round-trip form.
    """
    envelope = {
        "config_hash": cache.config_hash,
        "config": canonical_config_dict(cache.config),
        "entries": {
            tid: {
                "scores": _scores_dict(e.scores),
                "forced": list(e.forced),
                "views": {
                    repr(r): {
                        "target_ratio": v.target_ratio,
                        "retained": list(v.retained),
                        "num_frames": v.num_frames,
                        "actual_ratio": v.actual_ratio,
                    }
                    for r, v in e.views.items()
                },
            }
            for tid, e in cache.entries.items()
        },
        "flags": {tid: list(fl) for tid, fl in cache.flags.items()},
    }
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fp:
            json.dump(envelope, fp, sort_keys=True, separators=(",", ":"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_cache(path: str, expected_config: CacheConfig | None = None) -> PruneCache:
    """Load a cache file, optionally verifying it against expected_config.

    Compatibility is exact hash equality; a mismatch raises
    ConfigMismatchError ("incompatible cache configuration").  Internal
    inconsistencies (stored hash not matching the embedded config, malformed
    views) raise CacheFormatError.
    """
    with open(path, "r", encoding="utf-8") as fp:
        try:
            envelope = json.load(fp)
        except json.JSONDecodeError as exc:
            raise CacheFormatError(f"malformed cache file: {exc.msg}") from None
    if not isinstance(envelope, dict) or set(envelope.keys()) != ENVELOPE_KEYS:
        raise CacheFormatError("cache file must contain exactly "
                               "config_hash, config, entries, flags")

    config = config_from_dict(envelope["config"])
    stored_hash = envelope["config_hash"]
    actual_hash = config_hash(config)
    if stored_hash != actual_hash:
        raise CacheFormatError("cache file corrupt: stored config_hash does not match "
                               "the embedded config")
    if expected_config is not None and config_hash(expected_config) != stored_hash:
        raise ConfigMismatchError(
            f"incompatible cache configuration: cache has {stored_hash[:12]}..., "
            f"expected {config_hash(expected_config)[:12]}..."
        )

    flags_map = envelope["flags"]
    entries: dict[str, CacheEntry] = {}
    try:
        for tid, raw in envelope["entries"].items():
            sd = raw["scores"]
            scores = FrameScores(
                trajectory_id=tid,
                avi_raw=np.asarray(sd["avi_raw"], dtype=np.float64),
                avi_norm=np.asarray(sd["avi_norm"], dtype=np.float64),
                vac_raw=np.asarray(sd["vac_raw"], dtype=np.float64),
                vac_norm=np.asarray(sd["vac_norm"], dtype=np.float64),
                tpi_norm=np.asarray(sd["tpi_norm"], dtype=np.float64),
                gripper_signal_norm=np.asarray(sd["gripper_signal_norm"], dtype=np.float64),
                gripper_transitions=tuple(sd["gripper_transitions"]),
                combined=np.asarray(sd["combined"], dtype=np.float64),
                flags=tuple(flags_map.get(tid, ())),
            )
            views: dict[float, PrunedView] = {}
            for key, vd in raw["views"].items():
                view = PrunedView(
                    trajectory_id=tid,
                    target_ratio=vd["target_ratio"],
                    retained=tuple(vd["retained"]),
                    num_frames=vd["num_frames"],
                )
                if float(key) != view.target_ratio or vd["actual_ratio"] != view.actual_ratio:
                    raise CacheFormatError(f"inconsistent view for trajectory '{tid}' "
                                           f"at ratio {key}")
                views[view.target_ratio] = view
            entries[tid] = CacheEntry(scores=scores, forced=tuple(raw["forced"]), views=views)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CacheFormatError):
            raise
        raise CacheFormatError(f"malformed cache entry: {exc}") from None
    return PruneCache(config_hash=stored_hash, config=config, entries=entries)
