"""framesift: importance-based frame selection for robot demonstrations.

Scores every frame of a demonstration trajectory, prunes each trajectory to
configurable retention ratios, caches the results keyed by a configuration
hash, and answers the two queries a training loop needs: which ratio is
active at a step, and where an original frame index lands after pruning.
"""
from .cache import (
    CacheConfig,
    CacheEntry,
    CacheFormatError,
    ConfigMismatchError,
    PruneCache,
    build_cache,
    canonical_config_json,
    config_from_dict,
    config_hash,
    load_cache,
    save_cache,
)
from .progress import GmmPrior, compute_tpi_gmm, evaluate_prior, fit_gmm_1d
from .pruning import PruneConfig, PrunedView, forced_keep_set, prune, quantile_threshold
from .sampling import SampleRecord, Schedule, active_ratio, remap, serve_sample
from .scoring import (
    FrameScores,
    ImportanceConfig,
    PixelStatProvider,
    combine_importance,
    compute_avi,
    compute_tpi_gaussian,
    compute_vac,
    gripper_signal,
    minmax_normalize,
    score_trajectory,
)
from .synthetic import GeneratorSpec, generate, transition_frame
from .trajectory import (
    Dataset,
    FstFormatError,
    Trajectory,
    VisualFeature,
    load_dataset,
    parse_trajectory_stream,
    save_dataset,
    validate_trajectory,
    write_trajectory_stream,
)

__version__ = "0.1.0"

__all__ = [
    "CacheConfig",
    "CacheEntry",
    "CacheFormatError",
    "ConfigMismatchError",
    "Dataset",
    "FrameScores",
    "FstFormatError",
    "GeneratorSpec",
    "GmmPrior",
    "ImportanceConfig",
    "PixelStatProvider",
    "PruneCache",
    "PruneConfig",
    "PrunedView",
    "SampleRecord",
    "Schedule",
    "Trajectory",
    "VisualFeature",
    "active_ratio",
    "build_cache",
    "canonical_config_json",
    "combine_importance",
    "compute_avi",
    "compute_tpi_gaussian",
    "compute_tpi_gmm",
    "compute_vac",
    "config_from_dict",
    "config_hash",
    "evaluate_prior",
    "fit_gmm_1d",
    "forced_keep_set",
    "generate",
    "gripper_signal",
    "load_cache",
    "load_dataset",
    "minmax_normalize",
    "parse_trajectory_stream",
    "prune",
    "quantile_threshold",
    "remap",
    "save_cache",
    "save_dataset",
    "score_trajectory",
    "serve_sample",
    "transition_frame",
    "validate_trajectory",
    "write_trajectory_stream",
]
