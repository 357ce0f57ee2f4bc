"""Motion tokens: per-trajectory feature samples and the distance between them.

A motion token pairs a trajectory with the feature vector sampled at its
position in every frame.  Sampled vectors are L2-normalized per frame (exact
zero vectors stay zero) and the distance between two tokens is one minus the
average frame-wise inner product, which puts it in [0, 2] with self-distance
zero.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .formats import FeatureVolume
from .parallel import parallel_map
from .tracking import Trajectory, TrajectorySet, bilinear_sample
from .validation import check_token_stack

_PAIRWISE_BLOCK = 256  # fixed chunk size keeps results thread-count independent


def normalize_features(vol: FeatureVolume) -> FeatureVolume:
    """Subtract the per-location temporal mean from a raw feature volume."""
    if vol.normalized:
        raise ValidationError("feature volume is already normalized")
    data = np.asarray(vol.data, dtype=np.float64)
    centered = data - data.mean(axis=0, keepdims=True)
    return FeatureVolume(data=centered.astype(np.float32), normalized=True)


@dataclass
class MotionToken:
    """Feature samples along one trajectory: (N, C) unit (or zero) rows."""

    trajectory_index: int
    features: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValidationError(f"token features must be (N, C), got {self.features.shape}")


@dataclass
class MotionTokenSet:
    tokens: list
    trajectory_set: TrajectorySet | None
    n: int
    c: int

    def __len__(self) -> int:
        return len(self.tokens)

    def feature_stack(self) -> np.ndarray:
        """All token features as one (K, N, C) array."""
        return np.stack([t.features for t in self.tokens])


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return rows / safe


def _sample_along(positions: np.ndarray, vol: FeatureVolume) -> np.ndarray:
    """Bilinearly sample the per-frame feature grid along (..., N, 2) positions."""
    data = np.asarray(vol.data, dtype=np.float64)
    n = vol.frames
    out = np.empty(positions.shape[:-2] + (n, vol.channels), dtype=np.float64)
    for i in range(n):
        out[..., i, :] = bilinear_sample(data[i], positions[..., i, :])
    return out


def build_motion_token(traj: Trajectory, vol: FeatureVolume, trajectory_index: int = 0) -> MotionToken:
    """Sample the normalized feature volume along one trajectory."""
    if not vol.normalized:
        raise ValidationError("motion tokens require a normalized feature volume")
    if traj.positions.shape[0] != vol.frames:
        raise ValidationError(
            f"trajectory length {traj.positions.shape[0]} does not match volume frames {vol.frames}"
        )
    if traj.positions[:, 0].max() > vol.width - 1 + 1e-9 or traj.positions[:, 1].max() > vol.height - 1 + 1e-9:
        raise ValidationError("trajectory positions exceed the feature grid")
    sampled = _sample_along(traj.positions, vol)
    return MotionToken(trajectory_index=trajectory_index, features=_unit_rows(sampled))


def build_token_set(tset: TrajectorySet, vol: FeatureVolume) -> MotionTokenSet:
    """Build one motion token per trajectory, preserving trajectory order."""
    if not vol.normalized:
        raise ValidationError("motion tokens require a normalized feature volume")
    if tset.n != vol.frames:
        raise ValidationError(
            f"trajectory set has {tset.n} frames but volume has {vol.frames}"
        )
    if tset.h != vol.height or tset.w != vol.width:
        raise ValidationError(
            f"trajectory grid {tset.h}x{tset.w} does not match volume grid {vol.height}x{vol.width}"
        )
    stack = _unit_rows(_sample_along(tset.positions_stack(), vol))
    tokens = [MotionToken(trajectory_index=i, features=stack[i]) for i in range(len(tset))]
    return MotionTokenSet(tokens=tokens, trajectory_set=tset, n=vol.frames, c=vol.channels)


def token_set_from_features(features, trajectory_set: TrajectorySet | None = None) -> MotionTokenSet:
    """Wrap an already-normalized (K, N, C) feature stack as a token set."""
    stack = check_token_stack(features)
    tokens = [MotionToken(trajectory_index=i, features=stack[i]) for i in range(stack.shape[0])]
    return MotionTokenSet(
        tokens=tokens, trajectory_set=trajectory_set, n=stack.shape[1], c=stack.shape[2]
    )


def token_distance(a: MotionToken, b: MotionToken) -> float:
    """One minus the average frame-wise inner product; range [0, 2]."""
    if a.features.shape != b.features.shape:
        raise ValidationError(
            f"token shapes differ: {a.features.shape} vs {b.features.shape}"
        )
    d = 1.0 - float(np.einsum("nc,nc->", a.features, b.features)) / a.features.shape[0]
    return float(min(2.0, max(0.0, d)))


def _distance_block(args):
    block, stack = args
    n = stack.shape[1]
    # Accumulate frame products in fixed frame order so entries are
    # bit-identical regardless of chunking.
    acc = np.zeros((block.shape[0], stack.shape[0]), dtype=np.float64)
    for i in range(n):
        acc += block[:, i, :] @ stack[:, i, :].T
    return 1.0 - acc / n


def pairwise_distances(token_set: MotionTokenSet) -> np.ndarray:
    """Full K x K token distance matrix: symmetric, zero diagonal, in [0, 2]."""
    stack = token_set.feature_stack()
    k = stack.shape[0]
    blocks = [(stack[start : start + _PAIRWISE_BLOCK], stack) for start in range(0, k, _PAIRWISE_BLOCK)]
    dist = np.vstack(parallel_map(_distance_block, blocks))
    np.clip(dist, 0.0, 2.0, out=dist)
    dist = (dist + dist.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    return dist


def cross_distances(source: MotionTokenSet, target: MotionTokenSet) -> np.ndarray:
    """Distance from every source token (rows) to every target token (columns)."""
    if source.n != target.n or source.c != target.c:
        raise ValidationError(
            f"token sets are incompatible: ({source.n},{source.c}) vs ({target.n},{target.c})"
        )
    src = source.feature_stack()
    tgt = target.feature_stack()
    acc = np.zeros((src.shape[0], tgt.shape[0]), dtype=np.float64)
    for i in range(source.n):
        acc += src[:, i, :] @ tgt[:, i, :].T
    dist = 1.0 - acc / source.n
    np.clip(dist, 0.0, 2.0, out=dist)
    return dist
