"""Anchor realignment: match each anchor to the most feature-similar token of
a target video and relocate its injection onto that token's trajectory.

Matching is an independent argmin per anchor over the token distance, ties
breaking toward the lowest target index, so two anchors may legitimately map
to the same target token.
"""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import ValidationError
from .tokens import MotionTokenSet, cross_distances, token_set_from_features
from .tracking import TrajectorySet
from .validation import check_token_stack


@dataclass
class AlignmentMapping:
    """Per-anchor match: (source token index, target token index, distance)."""

    source_indices: np.ndarray  # (L,) int
    target_indices: np.ndarray  # (L,) int
    distances: np.ndarray  # (L,) float

    def __post_init__(self):
        self.source_indices = np.asarray(self.source_indices, dtype=np.intp)
        self.target_indices = np.asarray(self.target_indices, dtype=np.intp)
        self.distances = np.asarray(self.distances, dtype=np.float64)
        if not (
            self.source_indices.shape == self.target_indices.shape == self.distances.shape
        ):
            raise ValidationError("mapping arrays must have identical length")
        if not np.isfinite(self.distances).all():
            raise ValidationError("mapping distances must be finite")

    def __len__(self) -> int:
        return len(self.source_indices)


@dataclass
class InjectionSchedule:
    """Per-anchor trajectory and features ready for downstream injection.

    ``trajectories[k]`` is the active path for anchor k: the source path when
    ``alignment_applied`` is False, the matched target path otherwise.
    """

    n: int
    h: int
    w: int
    alignment_applied: bool
    source_indices: np.ndarray  # (L,)
    target_indices: np.ndarray | None  # (L,) or None when unaligned
    trajectories: np.ndarray  # (L, N, 2)
    features: np.ndarray  # (L, N, C)

    def __post_init__(self):
        self.trajectories = np.asarray(self.trajectories, dtype=np.float64)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.trajectories.ndim != 3 or self.trajectories.shape[2] != 2:
            raise ValidationError(
                f"schedule trajectories must be (L, N, 2), got {self.trajectories.shape}"
            )
        if self.trajectories.shape[1] != self.n:
            raise ValidationError("schedule trajectories do not span the frame count")
        u, v = self.trajectories[..., 0], self.trajectories[..., 1]
        if u.size and (u.min() < 0 or u.max() > self.w - 1 or v.min() < 0 or v.max() > self.h - 1):
            raise ValidationError("schedule trajectories leave the latent grid")
        if self.features.shape[:2] != self.trajectories.shape[:2]:
            raise ValidationError("schedule features do not match trajectories")


def match_anchors(
    anchor_indices, source_tokens: MotionTokenSet, target_tokens: MotionTokenSet
) -> AlignmentMapping:
    """Find each anchor's nearest target token by token distance."""
    if len(target_tokens) == 0:
        raise ValidationError("target token set is empty")
    anchor_indices = [int(i) for i in anchor_indices]
    for i in anchor_indices:
        if not 0 <= i < len(source_tokens):
            raise ValidationError(f"anchor index {i} outside source token set")
    anchor_stack = token_set_from_features(
        source_tokens.feature_stack()[anchor_indices]
    )
    dist = cross_distances(anchor_stack, target_tokens)
    matched = np.argmin(dist, axis=1)
    return AlignmentMapping(
        source_indices=np.asarray(anchor_indices),
        target_indices=matched,
        distances=dist[np.arange(len(anchor_indices)), matched],
    )


def relocate(
    anchor_features: np.ndarray,
    mapping: AlignmentMapping,
    target_trajectories: TrajectorySet,
) -> InjectionSchedule:
    """Build the aligned schedule: anchors keep their features but adopt the
    matched target trajectories."""
    features = check_token_stack(anchor_features, "anchor features")
    if features.shape[0] != len(mapping):
        raise ValidationError("one feature matrix per mapped anchor is required")
    k_tgt = len(target_trajectories.trajectories)
    for j in mapping.target_indices:
        if not 0 <= j < k_tgt:
            raise ValidationError(f"target index {j} outside target trajectory set")
    paths = np.stack(
        [target_trajectories.trajectories[j].positions for j in mapping.target_indices]
    )
    return InjectionSchedule(
        n=target_trajectories.n,
        h=target_trajectories.h,
        w=target_trajectories.w,
        alignment_applied=True,
        source_indices=np.asarray(mapping.source_indices),
        target_indices=np.asarray(mapping.target_indices),
        trajectories=paths,
        features=features,
    )


def unaligned_schedule(
    anchor_features: np.ndarray,
    anchor_indices,
    source_trajectories: np.ndarray,
    n: int,
    h: int,
    w: int,
) -> InjectionSchedule:
    """Schedule that keeps every anchor on its original source trajectory."""
    features = check_token_stack(anchor_features, "anchor features")
    return InjectionSchedule(
        n=n,
        h=h,
        w=w,
        alignment_applied=False,
        source_indices=np.asarray([int(i) for i in anchor_indices], dtype=np.intp),
        target_indices=None,
        trajectories=np.asarray(source_trajectories, dtype=np.float64),
        features=features,
    )


class AnchorTokenMatcher(BaseEstimator):
    """Nearest-token matcher with the scikit-learn fit/predict surface.

    ``fit`` stores the target token stack; ``predict`` returns, for each
    query token, the index of its nearest target token under the token
    distance.
    """

    def fit(self, X, y=None):
        self.target_features_ = check_token_stack(X, "target token features")
        return self

    def predict(self, X):
        if not hasattr(self, "target_features_"):
            raise NotFittedError("AnchorTokenMatcher is not fitted yet")
        queries = token_set_from_features(X)
        targets = token_set_from_features(self.target_features_)
        dist = cross_distances(queries, targets)
        return np.argmin(dist, axis=1)


# ---------------------------------------------------------------------------
# Schedule JSON round-trip
# ---------------------------------------------------------------------------


def schedule_to_dict(schedule: InjectionSchedule) -> dict:
    anchors = []
    for i in range(schedule.trajectories.shape[0]):
        anchors.append(
            {
                "source_index": int(schedule.source_indices[i]),
                "target_index": (
                    int(schedule.target_indices[i]) if schedule.target_indices is not None else None
                ),
                "trajectory": [[float(u), float(v)] for u, v in schedule.trajectories[i]],
                "features": [[float(x) for x in row] for row in schedule.features[i]],
            }
        )
    return {
        "n": schedule.n,
        "h": schedule.h,
        "w": schedule.w,
        "alignment_applied": schedule.alignment_applied,
        "anchors": anchors,
    }


def schedule_from_dict(payload: dict) -> InjectionSchedule:
    try:
        anchors = payload["anchors"]
        source_indices = np.asarray([a["source_index"] for a in anchors], dtype=np.intp)
        target_values = [a["target_index"] for a in anchors]
        trajectories = np.asarray([a["trajectory"] for a in anchors], dtype=np.float64)
        features = np.asarray([a["features"] for a in anchors], dtype=np.float64)
        applied = bool(payload["alignment_applied"])
        target_indices = (
            np.asarray([int(t) for t in target_values], dtype=np.intp)
            if applied
            else None
        )
        return InjectionSchedule(
            n=int(payload["n"]),
            h=int(payload["h"]),
            w=int(payload["w"]),
            alignment_applied=applied,
            source_indices=source_indices,
            target_indices=target_indices,
            trajectories=trajectories,
            features=features,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"malformed schedule JSON: {exc}") from exc


def save_schedule(schedule: InjectionSchedule, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schedule_to_dict(schedule), fh, indent=2)
        fh.write("\n")


def load_schedule(path) -> InjectionSchedule:
    with open(path, "r", encoding="utf-8") as fh:
        return schedule_from_dict(json.load(fh))
