"""Command-line front end.

Every command is a thin shell over the library modules; identical inputs
through the CLI and direct calls give identical outputs.  Exit codes:
0 success, 1 usage error, 2 data error, 3 cache configuration mismatch.
Output files are written to a temp file and renamed, so a failing command
never leaves a partial file behind.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from ._util import int_ceil
from .cache import (
    CacheConfig,
    CacheFormatError,
    ConfigMismatchError,
    PruneCache,
    build_cache,
    config_from_dict,
    load_cache,
    save_cache,
)
from .progress import GmmPrior, fit_gmm_1d
from .pruning import forced_keep_set, prune
from .sampling import Schedule, active_ratio
from .sampling import remap as remap_frame
from .scoring import FrameScores, score_trajectory
from .synthetic import GeneratorSpec, generate
from .trajectory import Dataset, FstFormatError, load_dataset, save_dataset


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this tool reserves 2 for
    # data errors, so usage problems must exit 1
    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fp:
            fp.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(args) -> CacheConfig:
    config = CacheConfig()
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fp:
            config = config_from_dict(json.load(fp))
    if getattr(args, "ratios", None):
        ratios = tuple(float(r) for r in args.ratios.split(","))
        config = CacheConfig(importance=config.importance, prune=config.prune,
                             ratios=ratios, prior=config.prior)
    if getattr(args, "prior", None):
        with open(args.prior, "r", encoding="utf-8") as fp:
            prior = GmmPrior(**json.load(fp))
        config = CacheConfig(importance=config.importance, prune=config.prune,
                             ratios=config.ratios, prior=prior)
    return config


def _pick_trajectory(dataset: Dataset, trajectory_id: str):
    for traj in dataset:
        if traj.id == trajectory_id:
            return traj
    raise LookupError(f"unknown trajectory id '{trajectory_id}'")


def _load_cache_checked(args) -> PruneCache:
    """Load a cache; with --config, require exact configuration-hash match."""
    expected = None
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fp:
            expected = config_from_dict(json.load(fp))
    return load_cache(args.cache, expected_config=expected)


def _pick_view(cache: PruneCache, trajectory_id: str, ratio: float):
    entry = cache.entries.get(trajectory_id)
    if entry is None:
        raise LookupError(f"unknown trajectory id '{trajectory_id}'")
    view = entry.views.get(float(ratio))
    if view is None:
        have = ", ".join(repr(r) for r in sorted(entry.views))
        raise LookupError(f"ratio not precomputed: {ratio!r} (cache has {have})")
    return entry, view


def _score_rows(scores: FrameScores, prefix: str = "") -> list[str]:
    rows = []
    for i in range(scores.num_frames):
        rows.append(
            f"{prefix}{i + 1},{scores.avi_norm[i]},{scores.vac_norm[i]},"
            f"{scores.tpi_norm[i]},{scores.gripper_signal_norm[i]},{scores.combined[i]}"
        )
    return rows


def cmd_gen(args) -> int:
    spec = GeneratorSpec(
        seed=args.seed,
        num_trajectories=args.n,
        t_range=(args.t_min, args.t_max),
        dims=args.dims,
        gripper_dim=None if args.gripper_dim < 0 else args.gripper_dim,
        transition_progress=args.transition,
        noise_scale=args.noise,
    )
    save_dataset(generate(spec), args.out)
    print(f"wrote {args.n} trajectories to {args.out}")
    return 0


def cmd_fit_prior(args) -> int:
    dataset = load_dataset(args.input)
    n_subset = max(1, int_ceil(args.subset_fraction * len(dataset)))
    samples: list[float] = []
    for traj in dataset.trajectories[:n_subset]:
        if traj.stage_centers:
            samples.extend(traj.stage_centers)
    if len(samples) < args.M:
        raise ValueError(
            f"need at least {args.M} stage centers in the first {n_subset} "
            f"trajectories, found {len(samples)}"
        )
    prior = fit_gmm_1d(samples, args.M, tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    payload = {
        "weights": list(prior.weights),
        "means": list(prior.means),
        "variances": list(prior.variances),
        "fit_log_likelihood": prior.fit_log_likelihood,
    }
    _atomic_write_text(args.out, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"fit {args.M}-component prior on {len(samples)} stage centers "
          f"(log-likelihood {prior.fit_log_likelihood})")
    return 0


def cmd_build_cache(args) -> int:
    config = _load_config(args)
    dataset = load_dataset(args.input)
    cache = build_cache(dataset, config, jobs=args.jobs)
    save_cache(cache, args.out)
    print(f"cached {len(cache.entries)} trajectories at ratios "
          f"{list(config.ratios)} (config {cache.config_hash[:12]})")
    return 0


def cmd_score(args) -> int:
    config = _load_config(args)
    dataset = load_dataset(args.input)
    trajs = [_pick_trajectory(dataset, args.traj)] if args.traj else list(dataset)
    rows = ["trajectory_id,t,avi_norm,vac_norm,tpi_norm,gripper_signal,combined"]
    for traj in trajs:
        scores = score_trajectory(traj, config.importance, config.prior)
        rows.extend(_score_rows(scores, prefix=f"{traj.id},"))
    _atomic_write_text(args.csv, "\n".join(rows) + "\n")
    print(f"wrote {len(rows) - 1} rows to {args.csv}")
    return 0


def cmd_prune(args) -> int:
    config = _load_config(args)
    dataset = load_dataset(args.input)
    traj = _pick_trajectory(dataset, args.traj)
    scores = score_trajectory(traj, config.importance, config.prior)
    forced = forced_keep_set(traj, scores, config.prune)
    view = prune(scores.combined, args.ratio, forced, config.prune, trajectory_id=traj.id)
    print("retained=" + ",".join(str(t) for t in view.retained))
    print(f"actual_ratio={view.actual_ratio}")
    return 0


def cmd_inspect(args) -> int:
    cache = _load_cache_checked(args)
    entry, view = _pick_view(cache, args.traj, args.ratio)
    retained = set(view.retained)
    rows = ["t,avi_norm,vac_norm,tpi_norm,gripper_signal,combined,retained"]
    for i, base in enumerate(_score_rows(entry.scores)):
        rows.append(f"{base},{1 if i + 1 in retained else 0}")
    _atomic_write_text(args.csv, "\n".join(rows) + "\n")
    print(f"wrote {len(rows) - 1} rows to {args.csv}")
    return 0


def cmd_remap(args) -> int:
    cache = _load_cache_checked(args)
    _, view = _pick_view(cache, args.traj, args.ratio)
    s = remap_frame(view, args.t)
    print(f"trajectory_id={args.traj} active_ratio={view.target_ratio} "
          f"original_t={args.t} remapped_t={s}")
    return 0


def cmd_schedule(args) -> int:
    schedule = Schedule(warmup_steps=args.warmup, pruned_ratio=args.ratio,
                        pruned_per_full=args.cycle)
    for step in range(1, args.steps + 1):
        print(f"{step},{active_ratio(step, schedule)}")
    return 0


def cmd_stats(args) -> int:
    cache = _load_cache_checked(args)
    entries = cache.entries
    print(f"trajectories={len(entries)}")
    for r in cache.config.ratios:
        actuals = [e.views[r].actual_ratio for e in entries.values() if r in e.views]
        if not actuals:
            continue
        mean = sum(actuals) / len(actuals)
        print(f"ratio={r} mean_actual={mean} min_actual={min(actuals)} "
              f"max_actual={max(actuals)}")
    forced_counts = [len(e.forced) for e in entries.values()]
    if forced_counts:
        mean = sum(forced_counts) / len(forced_counts)
        print(f"forced_keeps mean={mean} min={min(forced_counts)} "
              f"max={max(forced_counts)}")
    flagged = sum(1 for _ in cache.flags)
    print(f"flagged={flagged}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="framesift",
                     description="Frame-importance scoring, pruning, and cache queries.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--t-min", type=int, default=60)
    p.add_argument("--t-max", type=int, default=140)
    p.add_argument("--dims", type=int, default=7)
    p.add_argument("--gripper-dim", type=int, default=6,
                   help="0-based gripper column; negative for none")
    p.add_argument("--transition", type=float, default=0.6)
    p.add_argument("--noise", type=float, default=0.02)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit-prior", help="fit the progress prior on stage annotations")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--subset-fraction", type=float, default=0.05)
    p.add_argument("--M", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit_prior)

    p = sub.add_parser("build-cache", help="score and prune a dataset at all ratios")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config file (cache's embedded schema)")
    p.add_argument("--ratios", help="comma-separated target ratios, overrides config")
    p.add_argument("--prior", help="JSON prior file from fit-prior")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_build_cache)

    p = sub.add_parser("score", help="emit per-frame importance curves as CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--traj", help="score only this trajectory id")
    p.add_argument("--config")
    p.add_argument("--prior")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("prune", help="print retained frames for one trajectory")
    p.add_argument("--input", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--config")
    p.add_argument("--prior")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("inspect", help="dump cached scores and retention as CSV")
    p.add_argument("--cache", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--config", help="require the cache to match this config exactly")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("remap", help="map an original frame index through a pruned view")
    p.add_argument("--cache", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--config", help="require the cache to match this config exactly")
    p.set_defaults(func=cmd_remap)

    p = sub.add_parser("schedule", help="print the active ratio per training step")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--warmup", type=int, default=5000)
    p.add_argument("--ratio", type=float, default=0.2)
    p.add_argument("--cycle", type=int, default=5)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("stats", help="summarize a cache")
    p.add_argument("--cache", required=True)
    p.add_argument("--config", help="require the cache to match this config exactly")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except KeyError as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except (FstFormatError, CacheFormatError, LookupError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
