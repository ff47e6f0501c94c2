"""Cache hashing, build, and round-trip tests."""
import numpy as np
import pytest

from framesift import (
    CacheConfig,
    ConfigMismatchError,
    Dataset,
    GeneratorSpec,
    GmmPrior,
    ImportanceConfig,
    PruneConfig,
    build_cache,
    canonical_config_json,
    config_from_dict,
    config_hash,
    generate,
    load_cache,
    save_cache,
)

# computed once with sha256sum over the handwritten canonical bytes, then pinned
DEFAULT_CONFIG_HASH = "4de14e3e4470ec0745c41508eebd6ec2d09732671d10d7d7cac9f144015bbe81"


def small_corpus(seed=3, n=6):
    return generate(GeneratorSpec(seed=seed, num_trajectories=n, t_range=(15, 45)))


def caches_equal(a, b) -> bool:
    if a.config_hash != b.config_hash or a.config != b.config:
        return False
    if set(a.entries) != set(b.entries) or a.flags != b.flags:
        return False
    for tid, ea in a.entries.items():
        eb = b.entries[tid]
        if ea.forced != eb.forced or ea.views != eb.views:
            return False
        sa, sb = ea.scores, eb.scores
        if sa.trajectory_id != sb.trajectory_id or sa.flags != sb.flags:
            return False
        if sa.gripper_transitions != sb.gripper_transitions:
            return False
        for name in ("avi_raw", "avi_norm", "vac_raw", "vac_norm",
                     "tpi_norm", "gripper_signal_norm", "combined"):
            if not np.array_equal(getattr(sa, name), getattr(sb, name)):
                return False
    return True


def test_default_config_hash_is_pinned():
    assert config_hash(CacheConfig()) == DEFAULT_CONFIG_HASH


def test_canonical_json_has_no_whitespace_and_sorted_keys():
    s = canonical_config_json(CacheConfig())
    assert " " not in s and "\n" not in s
    assert s.index('"importance"') < s.index('"prior"') < s.index('"prune"') < s.index('"ratios"')


def test_hash_deterministic_and_sensitive():
    base = CacheConfig()
    assert config_hash(base) == config_hash(CacheConfig())
    flipped = CacheConfig(importance=ImportanceConfig(lam=0.2))
    assert config_hash(flipped) != config_hash(base)
    assert len(config_hash(flipped)) == 64


def test_hash_ignores_ratio_order():
    a = CacheConfig(ratios=(1.0, 0.2, 0.5))
    b = CacheConfig(ratios=(0.2, 0.5, 1.0))
    assert config_hash(a) == config_hash(b)


def test_config_round_trips_through_dict():
    prior = GmmPrior(weights=(0.4, 0.6), means=(0.3, 0.8), variances=(0.01, 0.02),
                     fit_log_likelihood=-12.5)
    cfg = CacheConfig(importance=ImportanceConfig(k=5, lam=0.07),
                      prune=PruneConfig(k_min=4), ratios=(0.1, 0.4), prior=prior)
    import json

    back = config_from_dict(json.loads(canonical_config_json(cfg)))
    assert back == cfg
    assert canonical_config_json(back) == canonical_config_json(cfg)


def test_build_identity_at_ratio_one():
    ds = small_corpus(n=2)
    cache = build_cache(ds, CacheConfig(ratios=(1.0,)))
    for traj in ds:
        view = cache.entries[traj.id].views[1.0]
        assert view.retained == tuple(range(1, traj.num_frames + 1))
        assert view.actual_ratio == 1.0


def test_build_views_and_invariants():
    ds = small_corpus()
    cache = build_cache(ds, CacheConfig(ratios=(0.2, 1.0)))
    assert set(cache.entries) == {t.id for t in ds}
    for traj in ds:
        entry = cache.entries[traj.id]
        assert set(entry.views) == {0.2, 1.0}
        assert set(entry.forced).issubset(set(entry.views[0.2].retained))
        assert {1, traj.num_frames}.issubset(set(entry.views[0.2].retained))


def test_build_order_independent_per_trajectory():
    ds = small_corpus()
    shuffled = Dataset(name="p", trajectories=tuple(reversed(ds.trajectories)))
    a = build_cache(ds, CacheConfig())
    b = build_cache(shuffled, CacheConfig())
    for tid in a.entries:
        assert np.array_equal(a.entries[tid].scores.combined, b.entries[tid].scores.combined)
        assert a.entries[tid].views == b.entries[tid].views


def test_parallel_build_matches_serial():
    ds = small_corpus(n=4)
    serial = build_cache(ds, CacheConfig(), jobs=1)
    parallel = build_cache(ds, CacheConfig(), jobs=3)
    assert caches_equal(serial, parallel)


def test_duplicate_ids_rejected():
    ds = small_corpus(n=2)
    dup = Dataset(name="d", trajectories=(ds.trajectories[0], ds.trajectories[0]))
    with pytest.raises(ValueError, match="duplicate"):
        build_cache(dup, CacheConfig())


def test_gmm_mode_requires_prior_at_build():
    ds = small_corpus(n=1)
    cfg = CacheConfig(importance=ImportanceConfig(tpi_mode="gmm"))
    with pytest.raises(ValueError, match="prior"):
        build_cache(ds, cfg)


def test_save_load_round_trip_identity(tmp_path):
    ds = small_corpus()
    cache = build_cache(ds, CacheConfig(ratios=(0.2, 0.5, 1.0)))
    path = str(tmp_path / "cache.json")
    save_cache(cache, path)
    loaded = load_cache(path)
    assert caches_equal(cache, loaded)


def test_save_is_byte_deterministic(tmp_path):
    ds = small_corpus(n=3)
    p1 = str(tmp_path / "a.json")
    p2 = str(tmp_path / "b.json")
    save_cache(build_cache(ds, CacheConfig()), p1)
    save_cache(build_cache(ds, CacheConfig()), p2)
    with open(p1, "rb") as f1, open(p2, "rb") as f2:
        assert f1.read() == f2.read()


def test_load_verifies_expected_config(tmp_path):
    ds = small_corpus(n=2)
    path = str(tmp_path / "cache.json")
    save_cache(build_cache(ds, CacheConfig()), path)
    load_cache(path, expected_config=CacheConfig())  # exact match passes
    other = CacheConfig(prune=PruneConfig(k_min=9))
    with pytest.raises(ConfigMismatchError, match="incompatible cache configuration"):
        load_cache(path, expected_config=other)


def test_load_rejects_tampered_hash(tmp_path):
    from framesift import CacheFormatError

    ds = small_corpus(n=1)
    path = str(tmp_path / "cache.json")
    save_cache(build_cache(ds, CacheConfig()), path)
    with open(path, "r", encoding="utf-8") as fp:
        text = fp.read()
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(text.replace(DEFAULT_CONFIG_HASH, "0" * 64))
    with pytest.raises(CacheFormatError):
        load_cache(path)


def test_superset_cache_serves_ratio_subsets(tmp_path):
    from framesift import Schedule, serve_sample

    ds = small_corpus(n=2)
    cache = build_cache(ds, CacheConfig(ratios=(0.1, 0.2, 0.5, 1.0)))
    path = str(tmp_path / "cache.json")
    save_cache(cache, path)
    loaded = load_cache(path)
    sched = Schedule(warmup_steps=1, pruned_ratio=0.2, pruned_per_full=5)
    rec = serve_sample(loaded, sched, step=2, trajectory_id="syn-0", t=5)
    assert rec.active_ratio == 0.2
    rec_full = serve_sample(loaded, sched, step=7, trajectory_id="syn-0", t=5)
    assert rec_full.active_ratio == 1.0 and rec_full.remapped_t == 5


def test_flags_propagate_to_cache():
    # strip features so coherence is disabled and the trajectory gets flagged
    ds = small_corpus(n=2)
    stripped = Dataset(
        name="s",
        trajectories=tuple(
            type(t)(id=t.id, instruction=t.instruction, actions=t.actions,
                    gripper_dims=t.gripper_dims, visual_features=None,
                    stage_centers=t.stage_centers)
            for t in ds
        ),
    )
    cache = build_cache(stripped, CacheConfig())
    assert set(cache.flags) == {"syn-0", "syn-1"}
    for fl in cache.flags.values():
        assert any("feature" in f for f in fl)


def test_flags_survive_round_trip(tmp_path):
    ds = small_corpus(n=1)
    stripped = Dataset(
        name="s",
        trajectories=(
            type(ds.trajectories[0])(
                id="syn-0", instruction="", actions=ds.trajectories[0].actions,
                gripper_dims=ds.trajectories[0].gripper_dims,
            ),
        ),
    )
    cache = build_cache(stripped, CacheConfig())
    path = str(tmp_path / "c.json")
    save_cache(cache, path)
    assert load_cache(path).flags == cache.flags


def test_ratio_validation():
    with pytest.raises(ValueError):
        CacheConfig(ratios=())
    with pytest.raises(ValueError):
        CacheConfig(ratios=(0.0, 0.5))
    with pytest.raises(ValueError):
        CacheConfig(ratios=(0.5, 1.2))
