"""Importance scoring tests, oracle-first.

The action-variation score is checked against a straight-line per-element
recomputation that shares no code with the vectorized implementation.
"""
import numpy as np
import pytest

from framesift import (
    GeneratorSpec,
    ImportanceConfig,
    PixelStatProvider,
    Trajectory,
    VisualFeature,
    combine_importance,
    compute_avi,
    compute_tpi_gaussian,
    compute_vac,
    generate,
    gripper_signal,
    minmax_normalize,
    score_trajectory,
)


def avi_reference(actions, k, lam):
    """Independent brute-force oracle for the action-variation score."""
    a = np.asarray(actions, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    T = a.shape[0]
    out = np.zeros(T)
    for t in range(1, T + 1):
        if t == 1:
            d = float(np.linalg.norm(a[1] - a[0]))
        else:
            d = float(np.linalg.norm(a[t - 1] - a[t - 2]))
        window = a[t : min(t + k, T)]
        mv = float(np.var(window, axis=0).mean()) if window.shape[0] > 0 else 0.0
        out[t - 1] = d + lam * mv
    return out


def test_avi_worked_example():
    avi = compute_avi(np.array([0.0, 1.0, 3.0, 3.0, 3.0, 3.0]), k=3, lam=0.1)
    expected = np.array([1.0889, 1.0, 2.0, 0.0, 0.0, 0.0])
    assert np.allclose(avi, expected, atol=1e-4)
    # the first entry is exactly 1 + 0.1 * (8/9)
    assert abs(avi[0] - (1.0 + 0.1 * 8.0 / 9.0)) < 1e-12


def test_avi_constant_trajectory_is_zero():
    assert np.array_equal(compute_avi(np.full((9, 4), 2.5), 3, 0.1), np.zeros(9))


def test_avi_matches_reference_oracle():
    rng = np.random.default_rng(123)
    for _ in range(60):
        T = int(rng.integers(2, 51))
        D = int(rng.integers(1, 9))
        k = int(rng.integers(1, 7))
        lam = float(rng.uniform(0, 0.5))
        a = rng.normal(0, 2, size=(T, D))
        assert np.max(np.abs(compute_avi(a, k, lam) - avi_reference(a, k, lam))) <= 1e-9


def test_avi_last_frame_has_empty_window():
    a = np.array([[0.0], [5.0], [5.0]])
    avi = compute_avi(a, k=3, lam=10.0)
    assert avi[-1] == 0.0  # d(3)=0, window empty


def test_minmax_examples():
    assert np.array_equal(minmax_normalize(np.array([2.0, 4.0, 6.0])), [0.0, 0.5, 1.0])
    assert np.array_equal(minmax_normalize(np.array([3.0, 3.0, 3.0])), [0.5, 0.5, 0.5])


def test_minmax_rejects_non_finite():
    with pytest.raises(ValueError):
        minmax_normalize(np.array([0.0, np.nan]))


def test_minmax_bounds():
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.normal(size=17)
        y = minmax_normalize(x)
        assert y.min() == 0.0 and y.max() == 1.0


def _traj(actions, **kw):
    return Trajectory(id="t", instruction="", actions=np.asarray(actions, float), **kw)


def test_vac_two_sample_arithmetic():
    # dv = [3,4] (norm 5), da norm 2 -> raw ~ 2.5 at both samples
    actions = np.array([[0.0], [2.0]])
    feats = (VisualFeature(1, np.array([0.0, 0.0])), VisualFeature(2, np.array([3.0, 4.0])))
    traj = _traj(actions, visual_features=feats)
    vac, flags = compute_vac(traj, ImportanceConfig())
    assert flags == []
    assert np.allclose(vac, 2.5, atol=1e-5)


def test_vac_identical_features_zero():
    actions = np.random.default_rng(0).normal(size=(10, 2))
    feats = tuple(VisualFeature(f, np.ones(4)) for f in (1, 4, 8, 10))
    vac, _ = compute_vac(_traj(actions, visual_features=feats), ImportanceConfig())
    assert np.array_equal(vac, np.zeros(10))


def test_vac_clip_to_percentile():
    # constant actions, one big feature jump: one interpolated value 10x the rest
    T = 100
    actions = np.zeros((T, 1))
    vals = np.cumsum(np.ones(T))
    vals[50:] += 9.0  # one delta is 10, the others are 1
    feats = tuple(VisualFeature(i + 1, np.array([vals[i]])) for i in range(T))
    cfg = ImportanceConfig(vac_clip_percentile=95.0)
    vac, _ = compute_vac(_traj(actions, visual_features=feats), cfg)
    raw = np.empty(T)
    raw[1:] = np.abs(np.diff(vals)) / cfg.epsilon
    raw[0] = raw[1]
    assert vac.max() == np.percentile(raw, 95.0)
    assert vac.max() < raw.max()


def test_vac_interpolation_preserves_knots():
    rng = np.random.default_rng(2)
    actions = rng.normal(size=(30, 3))
    frames = (1, 7, 19, 30)
    feats = tuple(VisualFeature(f, rng.normal(size=5)) for f in frames)
    cfg = ImportanceConfig(vac_clip_percentile=100.0)  # disable clipping
    vac, _ = compute_vac(_traj(actions, visual_features=feats), cfg)
    vecs = np.stack([vf.vec for vf in feats])
    dv = np.linalg.norm(np.diff(vecs, axis=0), axis=1)
    da = np.linalg.norm(np.diff(actions[np.array(frames) - 1], axis=0), axis=1)
    raw = dv / (da + cfg.epsilon)
    raw = np.concatenate([[raw[0]], raw])
    for f, expect in zip(frames, raw):
        assert abs(vac[f - 1] - expect) < 1e-12


def test_vac_without_features_flags_and_zeroes():
    vac, flags = compute_vac(_traj(np.zeros((5, 1))), ImportanceConfig())
    assert np.array_equal(vac, np.zeros(5))
    assert len(flags) == 1


def test_vac_provider_failure_flags_trajectory():
    def bad_provider(traj, frame):
        raise IOError("decoder exploded")

    vac, flags = compute_vac(_traj(np.zeros((12, 1))), ImportanceConfig(), bad_provider)
    assert np.array_equal(vac, np.zeros(12))
    assert any("frame extraction failure" in f for f in flags)


def test_vac_provider_path_samples_at_most_max():
    calls = []

    def provider(traj, frame):
        calls.append(frame)
        return np.array([float(frame), 0.0])

    traj = _traj(np.random.default_rng(1).normal(size=(200, 2)))
    vac, flags = compute_vac(traj, ImportanceConfig(vac_max_samples=16), provider)
    assert flags == []
    assert len(calls) == 16
    assert calls[0] == 1 and calls[-1] == 200
    assert len(set(calls)) == 16


def test_tpi_gaussian_values():
    tpi = compute_tpi_gaussian(5, 0.2)
    assert abs(tpi[0] - np.exp(-1.25)) < 1e-12
    assert abs(tpi[2] - 1.0) < 1e-12
    assert abs(tpi[4] - np.exp(-1.25)) < 1e-12


def test_gripper_signal_step():
    a = np.zeros((8, 2))
    a[3:, 1] = 1.0  # step at frame 4
    sig, transitions = gripper_signal(a, (1,), np.zeros(8))
    assert transitions == (4,)
    assert sig[3] == 1.0
    assert np.all(sig[np.arange(8) != 3] == 0.0)


def test_gripper_signal_constant_dim():
    a = np.random.default_rng(0).normal(size=(10, 3))
    a[:, 2] = 0.7
    sig, transitions = gripper_signal(a, (2,), np.zeros(10))
    assert transitions == ()
    assert np.array_equal(sig, np.full(10, 0.5))


def test_gripper_signal_falls_back_to_avi():
    avi = np.linspace(0, 1, 6)
    sig, transitions = gripper_signal(np.zeros((6, 2)), (), avi)
    assert transitions == ()
    assert np.array_equal(sig, avi)


def test_combine_weights_example():
    cfg = ImportanceConfig(gripper_weight=0.0)
    combined = combine_importance(
        np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.5, 0.5]),
        np.array([0.0, 0.0]), cfg,
    )
    assert np.allclose(combined, [0.7, 0.3], atol=1e-12)


def test_combine_uniform_inputs():
    cfg = ImportanceConfig()
    half = np.full(4, 0.5)
    combined = combine_importance(half, half, half, half, cfg)
    assert np.allclose(combined, 0.75, atol=1e-12)


def test_score_trajectory_norm_ranges():
    ds = generate(GeneratorSpec(seed=9, num_trajectories=3, t_range=(20, 60)))
    for traj in ds:
        s = score_trajectory(traj, ImportanceConfig())
        for vec in (s.avi_norm, s.vac_norm, s.tpi_norm, s.gripper_signal_norm):
            assert vec.min() >= 0.0 and vec.max() <= 1.0
        assert np.all(np.isfinite(s.combined))
        assert s.combined.shape == (traj.num_frames,)


def test_score_trajectory_is_dataset_independent():
    ds = generate(GeneratorSpec(seed=4, num_trajectories=5, t_range=(15, 30)))
    cfg = ImportanceConfig()
    solo = score_trajectory(ds.trajectories[2], cfg)
    again = score_trajectory(ds.trajectories[2], cfg)
    assert np.array_equal(solo.combined, again.combined)


def test_score_without_features_gives_uniform_vac():
    traj = _traj(np.random.default_rng(3).normal(size=(10, 2)))
    s = score_trajectory(traj, ImportanceConfig())
    assert np.array_equal(s.vac_norm, np.full(10, 0.5))
    assert len(s.flags) == 1


def test_avi_only_config_ranks_like_raw_avi():
    rng = np.random.default_rng(11)
    traj = _traj(rng.normal(size=(25, 4)))
    cfg = ImportanceConfig(alpha=1.0, beta=0.0, gamma=0.0, gripper_weight=0.0, tpi_mode="none")
    s = score_trajectory(traj, cfg)
    raw = compute_avi(traj.actions, cfg.k, cfg.lam)
    assert np.array_equal(np.argsort(s.combined, kind="stable"), np.argsort(raw, kind="stable"))


def test_gmm_mode_requires_prior():
    traj = _traj(np.zeros((5, 1)))
    with pytest.raises(ValueError, match="prior"):
        score_trajectory(traj, ImportanceConfig(tpi_mode="gmm"))


def test_tpi_mode_none_is_uniform():
    traj = _traj(np.random.default_rng(0).normal(size=(7, 2)))
    s = score_trajectory(traj, ImportanceConfig(tpi_mode="none"))
    assert np.array_equal(s.tpi_norm, np.full(7, 0.5))


def test_pixel_provider_shape_and_determinism():
    provider = PixelStatProvider()
    traj = _traj(np.random.default_rng(8).normal(size=(6, 3)))
    a = provider(traj, 2)
    b = provider(traj, 2)
    assert a.shape == (64,)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, provider(traj, 5))


def test_config_validation():
    with pytest.raises(ValueError):
        ImportanceConfig(k=0)
    with pytest.raises(ValueError):
        ImportanceConfig(alpha=0.0, beta=0.0, gamma=0.0)
    with pytest.raises(ValueError):
        ImportanceConfig(vac_clip_percentile=0.0)
    with pytest.raises(ValueError):
        ImportanceConfig(tpi_mode="bogus")
    with pytest.raises(ValueError):
        ImportanceConfig(vac_max_samples=1)
