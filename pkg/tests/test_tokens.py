import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchor_motion import (
    FeatureVolume,
    Trajectory,
    ValidationError,
    build_motion_token,
    build_token_set,
    normalize_features,
    pairwise_distances,
    token_distance,
    token_set_from_features,
)
from anchor_motion.tokens import MotionToken


def make_volume(data, normalized=False):
    return FeatureVolume(data=np.asarray(data, dtype=np.float32), normalized=normalized)


def straight_trajectory(n, u, v, kf=1):
    pos = np.tile([u, v], (n, 1)).astype(np.float64)
    return Trajectory(positions=pos, valid=np.ones(n, dtype=bool), seed_keyframe=kf, seed_cell=(int(v), int(u)))


def unit_rows(rng, n, c):
    rows = rng.normal(size=(n, c))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# normalize_features
# ---------------------------------------------------------------------------


def test_normalize_constant_volume_is_zero():
    vol = make_volume(np.full((5, 3, 4, 2), 7.25))
    out = normalize_features(vol)
    assert out.normalized is True
    assert not out.data.any()


def test_normalize_two_frame_closed_form():
    a, b = 3.0, -1.0
    data = np.zeros((2, 1, 1, 1), dtype=np.float32)
    data[0] = a
    data[1] = b
    out = normalize_features(make_volume(data))
    assert out.data[0, 0, 0, 0] == pytest.approx((a - b) / 2)
    assert out.data[1, 0, 0, 0] == pytest.approx((b - a) / 2)


def test_normalize_temporal_mean_is_zero():
    rng = np.random.default_rng(8)
    out = normalize_features(make_volume(rng.normal(size=(6, 4, 4, 3))))
    assert np.abs(out.data.mean(axis=0)).max() < 1e-4


def test_normalize_rejects_double_normalization():
    vol = make_volume(np.zeros((2, 1, 1, 1)), normalized=True)
    with pytest.raises(ValidationError):
        normalize_features(vol)


# ---------------------------------------------------------------------------
# build_motion_token
# ---------------------------------------------------------------------------


def test_token_constant_one_hot_field():
    n, c = 4, 3
    data = np.zeros((n, 5, 5, c))
    data[..., 1] = 1.0
    vol = make_volume(data, normalized=True)
    token = build_motion_token(straight_trajectory(n, 2.0, 3.0), vol)
    expected = np.zeros(c)
    expected[1] = 1.0
    assert np.allclose(token.features, expected)


def test_token_integer_positions_reproduce_grid_values():
    rng = np.random.default_rng(4)
    data = rng.normal(size=(3, 6, 6, 5))
    vol = make_volume(data, normalized=True)
    token = build_motion_token(straight_trajectory(3, 4.0, 1.0), vol)
    for i in range(3):
        raw = np.asarray(data[i, 1, 4, :], dtype=np.float32).astype(np.float64)
        assert np.allclose(token.features[i], raw / np.linalg.norm(raw), atol=1e-6)


def test_token_fractional_position_bilinear_then_renormalize():
    # Halfway between e1 at (0,0) and e2 at (1,0): sample (e1+e2)/2, then
    # L2 normalization gives (e1+e2)/sqrt(2).
    n, c = 2, 4
    data = np.zeros((n, 2, 2, c))
    data[:, 0, 0, 0] = 1.0  # e1 at u=0
    data[:, 0, 1, 1] = 1.0  # e2 at u=1
    vol = make_volume(data, normalized=True)
    pos = np.tile([0.5, 0.0], (n, 1))
    token = build_motion_token(
        Trajectory(positions=pos, valid=np.ones(n, bool), seed_keyframe=1, seed_cell=(0, 0)), vol
    )
    expected = np.zeros(c)
    expected[0] = expected[1] = 1.0 / np.sqrt(2.0)
    assert np.allclose(token.features, expected)


def test_token_zero_feature_rows_stay_zero():
    vol = make_volume(np.zeros((3, 2, 2, 2)), normalized=True)
    token = build_motion_token(straight_trajectory(3, 1.0, 1.0), vol)
    assert not token.features.any()


def test_token_requires_normalized_volume():
    vol = make_volume(np.ones((2, 2, 2, 2)), normalized=False)
    with pytest.raises(ValidationError):
        build_motion_token(straight_trajectory(2, 0.0, 0.0), vol)


def test_token_length_mismatch():
    vol = make_volume(np.zeros((4, 2, 2, 2)), normalized=True)
    with pytest.raises(ValidationError):
        build_motion_token(straight_trajectory(3, 0.0, 0.0), vol)


def test_token_rows_are_unit_or_zero():
    rng = np.random.default_rng(13)
    vol = normalize_features(make_volume(rng.normal(size=(5, 4, 4, 6))))
    token = build_motion_token(
        Trajectory(
            positions=rng.uniform(0, 3, size=(5, 2)),
            valid=np.ones(5, bool),
            seed_keyframe=1,
            seed_cell=(0, 0),
        ),
        vol,
    )
    norms = np.linalg.norm(token.features, axis=1)
    assert ((np.abs(norms - 1.0) < 1e-5) | (norms == 0.0)).all()


# ---------------------------------------------------------------------------
# token_distance
# ---------------------------------------------------------------------------


def test_distance_identical_tokens_zero():
    rng = np.random.default_rng(1)
    rows = unit_rows(rng, 6, 8)
    a = MotionToken(0, rows)
    assert token_distance(a, MotionToken(1, rows.copy())) == pytest.approx(0.0, abs=1e-12)


def test_distance_orthogonal_is_one():
    n, c = 5, 4
    a = np.zeros((n, c))
    b = np.zeros((n, c))
    a[:, 0] = 1.0
    b[:, 1] = 1.0
    assert token_distance(MotionToken(0, a), MotionToken(1, b)) == pytest.approx(1.0)


def test_distance_antipodal_is_two():
    rng = np.random.default_rng(2)
    rows = unit_rows(rng, 7, 5)
    assert token_distance(MotionToken(0, rows), MotionToken(1, -rows)) == pytest.approx(2.0)


def test_distance_length_mismatch():
    with pytest.raises(ValidationError):
        token_distance(MotionToken(0, np.ones((3, 2))), MotionToken(1, np.ones((4, 2))))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 9), st.integers(1, 6))
def test_distance_contract_properties(seed, n, c):
    rng = np.random.default_rng(seed)
    a = MotionToken(0, unit_rows(rng, n, c))
    b = MotionToken(1, unit_rows(rng, n, c))
    dab = token_distance(a, b)
    dba = token_distance(b, a)
    assert abs(dab - dba) <= 1e-6
    assert 0.0 <= dab <= 2.0
    assert token_distance(a, a) <= 1e-6


# ---------------------------------------------------------------------------
# pairwise_distances
# ---------------------------------------------------------------------------


def test_pairwise_k1():
    stack = unit_rows(np.random.default_rng(3), 4, 3)[None]
    dist = pairwise_distances(token_set_from_features(stack))
    assert dist.shape == (1, 1)
    assert dist[0, 0] == 0.0


def test_pairwise_matches_per_pair_recomputation():
    rng = np.random.default_rng(10)
    stack = np.stack([unit_rows(rng, 5, 4) for _ in range(10)])
    tset = token_set_from_features(stack)
    dist = pairwise_distances(tset)
    for i in range(10):
        for j in range(10):
            expected = token_distance(tset.tokens[i], tset.tokens[j])
            assert dist[i, j] == pytest.approx(expected, abs=1e-9)
    assert np.allclose(dist, dist.T, atol=1e-6)
    assert not np.diagonal(dist).any()


def test_pairwise_permutation_equivariance():
    rng = np.random.default_rng(11)
    stack = np.stack([unit_rows(rng, 4, 4) for _ in range(8)])
    dist = pairwise_distances(token_set_from_features(stack))
    perm = rng.permutation(8)
    dist_p = pairwise_distances(token_set_from_features(stack[perm]))
    assert np.allclose(dist_p, dist[np.ix_(perm, perm)], atol=1e-12)


def test_pairwise_identical_across_thread_counts(monkeypatch):
    rng = np.random.default_rng(12)
    stack = np.stack([unit_rows(rng, 6, 8) for _ in range(300)])
    tset = token_set_from_features(stack)
    monkeypatch.setenv("ANCHOR_MOTION_THREADS", "1")
    one = pairwise_distances(tset)
    monkeypatch.setenv("ANCHOR_MOTION_THREADS", "8")
    eight = pairwise_distances(tset)
    assert np.array_equal(one, eight)


def test_build_token_set_matches_single_tokens():
    rng = np.random.default_rng(14)
    vol = normalize_features(make_volume(rng.normal(size=(4, 5, 5, 3))))
    from anchor_motion import FlowField, collect_trajectories

    zero = [FlowField(u=np.zeros((5, 5)), v=np.zeros((5, 5))) for _ in range(3)]
    tset = collect_trajectories(zero, zero)
    tokens = build_token_set(tset, vol)
    assert len(tokens) == len(tset)
    for i in (0, 7, 24):
        single = build_motion_token(tset.trajectories[i], vol, trajectory_index=i)
        assert np.allclose(tokens.tokens[i].features, single.features, atol=1e-12)
