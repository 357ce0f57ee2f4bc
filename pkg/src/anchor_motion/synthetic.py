"""Synthetic scenes with analytically known flows, features and masks.

Scenes are built from moving blobs: each blob follows an affine center path
(constant velocity per frame step), carries a distinct unit feature
signature, and paints both the pixel frames and the latent feature volume.
Flow files hold the exact displacement of each blob (zero background), or a
single global affine field when ``global_flow`` is set — the latter keeps
flow downsampling and bilinear advection exact, so tracked trajectories can
be checked against closed-form positions.

Latent cell (r, c) corresponds to the pixel block centered at
``(c * s + (s - 1) / 2, r * s + (s - 1) / 2)`` for pixel scale ``s``; all
conversions below use that convention.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .formats import (
    FeatureVolume,
    FlowField,
    FrameSequence,
    SubjectMask,
    write_feature_volume,
    write_flow,
    write_frame_sequence,
    write_mask,
)
from .tracking import default_keyframes

SIGNATURE_UNIT_ATOL = 1e-6


@dataclass
class Blob:
    center: tuple  # (u, v) latent coords at frame 1
    velocity: tuple  # (du, dv) latent units per frame step
    radius: float  # latent units
    feature_signature: np.ndarray  # unit C-vector
    color: tuple = (224, 64, 64)

    def __post_init__(self):
        self.feature_signature = np.asarray(self.feature_signature, dtype=np.float64)
        norm = np.linalg.norm(self.feature_signature)
        if abs(norm - 1.0) > SIGNATURE_UNIT_ATOL:
            raise ValidationError(f"blob feature signature must be unit length, norm={norm}")
        if self.radius <= 0:
            raise ValidationError("blob radius must be positive")

    def center_at(self, frame: int) -> np.ndarray:
        """Latent center at a 1-based frame index."""
        return np.asarray(self.center, dtype=np.float64) + np.asarray(
            self.velocity, dtype=np.float64
        ) * (frame - 1)


@dataclass
class GlobalAffineFlow:
    """Per-step latent displacement field d(p) = A p + t, constant over time."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=np.float64)

    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty], dtype=np.float64)


@dataclass
class SceneSpec:
    n_frames: int
    latent_h: int
    latent_w: int
    feature_dim: int
    blobs: list = field(default_factory=list)
    pixel_scale: int = 1
    background_signature: np.ndarray | None = None
    keyframes: tuple | None = None
    global_flow: GlobalAffineFlow | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_frames < 2:
            raise ValidationError("scenes need at least 2 frames")
        if self.latent_h < 1 or self.latent_w < 1 or self.feature_dim < 1:
            raise ValidationError("latent dimensions and feature dim must be >= 1")
        if self.pixel_scale < 1:
            raise ValidationError("pixel scale must be >= 1")
        if self.background_signature is None:
            self.background_signature = np.zeros(self.feature_dim, dtype=np.float64)
        else:
            self.background_signature = np.asarray(self.background_signature, dtype=np.float64)
        if self.background_signature.shape != (self.feature_dim,):
            raise ValidationError("background signature has the wrong dimension")
        if self.keyframes is None:
            self.keyframes = default_keyframes(self.n_frames)
        else:
            self.keyframes = tuple(sorted({int(k) for k in self.keyframes}))
            for kf in self.keyframes:
                if not 1 <= kf <= self.n_frames:
                    raise ValidationError(f"scene keyframe {kf} outside [1, {self.n_frames}]")
        for blob in self.blobs:
            if blob.feature_signature.shape != (self.feature_dim,):
                raise ValidationError("blob signature dimension does not match the scene")
        self._validate_geometry()

    def _validate_geometry(self):
        # In-frame paths, plus no overlap between blobs carrying (necessarily
        # distinct) signatures at any frame.
        for i, blob in enumerate(self.blobs):
            for other in self.blobs[i + 1 :]:
                if np.allclose(blob.feature_signature, other.feature_signature):
                    raise ValidationError("blob feature signatures must be pairwise distinct")
        for frame in range(1, self.n_frames + 1):
            centers = [blob.center_at(frame) for blob in self.blobs]
            for i, blob in enumerate(self.blobs):
                u, v = centers[i]
                if not (
                    blob.radius <= u <= self.latent_w - 1 - blob.radius
                    and blob.radius <= v <= self.latent_h - 1 - blob.radius
                ):
                    raise ValidationError(
                        f"blob {i} leaves the grid at frame {frame} (center {u}, {v})"
                    )
                for j in range(i + 1, len(self.blobs)):
                    gap = np.linalg.norm(centers[i] - centers[j])
                    if gap <= blob.radius + self.blobs[j].radius:
                        raise ValidationError(
                            f"blobs {i} and {j} overlap at frame {frame}; "
                            "their signatures would conflict"
                        )
        if self.global_flow is not None:
            step = np.eye(2) + self.global_flow.matrix()
            if abs(np.linalg.det(step)) < 1e-9:
                raise ValidationError("global flow step is not invertible")

    @property
    def pixel_h(self) -> int:
        return self.latent_h * self.pixel_scale

    @property
    def pixel_w(self) -> int:
        return self.latent_w * self.pixel_scale


def _support_mask(center: np.ndarray, radius: float, h: int, w: int) -> np.ndarray:
    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    return (cols - center[0]) ** 2 + (rows - center[1]) ** 2 <= radius**2


def blob_support_cells(spec: SceneSpec, blob_index: int, frame: int) -> np.ndarray:
    """Boolean latent grid of the cells a blob covers at one frame."""
    blob = spec.blobs[blob_index]
    return _support_mask(blob.center_at(frame), blob.radius, spec.latent_h, spec.latent_w)


def latent_to_pixel(spec: SceneSpec, latent_points: np.ndarray) -> np.ndarray:
    s = spec.pixel_scale
    return np.asarray(latent_points, dtype=np.float64) * s + (s - 1) / 2.0


def _global_flow_fields(spec: SceneSpec) -> tuple[FlowField, FlowField]:
    """Forward and backward pixel-resolution fields for the affine mode."""
    s = spec.pixel_scale
    a_mat = spec.global_flow.matrix()
    t_vec = spec.global_flow.translation()
    cols, rows = np.meshgrid(
        np.arange(spec.pixel_w, dtype=np.float64), np.arange(spec.pixel_h, dtype=np.float64)
    )
    lat_u = (cols - (s - 1) / 2.0) / s
    lat_v = (rows - (s - 1) / 2.0) / s

    fwd_u = s * (a_mat[0, 0] * lat_u + a_mat[0, 1] * lat_v + t_vec[0])
    fwd_v = s * (a_mat[1, 0] * lat_u + a_mat[1, 1] * lat_v + t_vec[1])

    # Backward field: where did the point at p come from under p -> (I+A)p + t?
    step_inv = np.linalg.inv(np.eye(2) + a_mat)
    m = step_inv - np.eye(2)
    offset = -step_inv @ t_vec
    bwd_u = s * (m[0, 0] * lat_u + m[0, 1] * lat_v + offset[0])
    bwd_v = s * (m[1, 0] * lat_u + m[1, 1] * lat_v + offset[1])
    return FlowField(u=fwd_u, v=fwd_v), FlowField(u=bwd_u, v=bwd_v)


def _blob_flow_fields(spec: SceneSpec) -> tuple[list, list]:
    s = spec.pixel_scale
    ph, pw = spec.pixel_h, spec.pixel_w
    fwd, bwd = [], []
    for frame in range(1, spec.n_frames):
        fu = np.zeros((ph, pw), dtype=np.float64)
        fv = np.zeros_like(fu)
        bu = np.zeros_like(fu)
        bv = np.zeros_like(fu)
        for blob in spec.blobs:
            vel = np.asarray(blob.velocity, dtype=np.float64) * s
            src_support = _support_mask(
                latent_to_pixel(spec, blob.center_at(frame)), blob.radius * s, ph, pw
            )
            dst_support = _support_mask(
                latent_to_pixel(spec, blob.center_at(frame + 1)), blob.radius * s, ph, pw
            )
            fu[src_support] = vel[0]
            fv[src_support] = vel[1]
            bu[dst_support] = -vel[0]
            bv[dst_support] = -vel[1]
        fwd.append(FlowField(u=fu, v=fv))
        bwd.append(FlowField(u=bu, v=bv))
    return fwd, bwd


def _render_frames(spec: SceneSpec) -> FrameSequence:
    rng = np.random.default_rng(spec.rng_seed)
    texture = rng.integers(16, 96, size=(spec.pixel_h, spec.pixel_w, 3), dtype=np.uint8)
    frames = np.empty((spec.n_frames, spec.pixel_h, spec.pixel_w, 3), dtype=np.uint8)

    # Integer global translation advects the texture exactly (wrap-around),
    # so warped frame differences vanish; anything else keeps a static
    # backdrop, which is fine for diagnostic imagery.
    shift_per_step = None
    if spec.global_flow is not None:
        gf = spec.global_flow
        t_px = np.array([gf.tx, gf.ty]) * spec.pixel_scale
        if not gf.matrix().any() and np.allclose(t_px, np.rint(t_px)):
            shift_per_step = np.rint(t_px).astype(int)

    for frame in range(1, spec.n_frames + 1):
        if shift_per_step is not None:
            total = shift_per_step * (frame - 1)
            canvas = np.roll(texture, shift=(total[1], total[0]), axis=(0, 1)).copy()
        else:
            canvas = texture.copy()
        for blob in spec.blobs:
            support = _support_mask(
                latent_to_pixel(spec, blob.center_at(frame)),
                blob.radius * spec.pixel_scale,
                spec.pixel_h,
                spec.pixel_w,
            )
            canvas[support] = np.asarray(blob.color, dtype=np.uint8)
        frames[frame - 1] = canvas
    return FrameSequence(frames=frames)


def generate_scene(spec: SceneSpec):
    """Produce (frames, fwd_flows, bwd_flows, raw feature volume, mask)."""
    if spec.global_flow is not None:
        fwd_field, bwd_field = _global_flow_fields(spec)
        fwd = [FlowField(u=fwd_field.u.copy(), v=fwd_field.v.copy()) for _ in range(spec.n_frames - 1)]
        bwd = [FlowField(u=bwd_field.u.copy(), v=bwd_field.v.copy()) for _ in range(spec.n_frames - 1)]
    else:
        fwd, bwd = _blob_flow_fields(spec)

    features = np.empty(
        (spec.n_frames, spec.latent_h, spec.latent_w, spec.feature_dim), dtype=np.float64
    )
    features[:] = spec.background_signature
    for frame in range(1, spec.n_frames + 1):
        for blob in spec.blobs:
            support = _support_mask(
                blob.center_at(frame), blob.radius, spec.latent_h, spec.latent_w
            )
            features[frame - 1][support] = blob.feature_signature

    mask = np.zeros((spec.latent_h, spec.latent_w), dtype=bool)
    for kf in spec.keyframes:
        for b in range(len(spec.blobs)):
            mask |= blob_support_cells(spec, b, kf)

    return (
        _render_frames(spec),
        fwd,
        bwd,
        FeatureVolume(data=features.astype(np.float32), normalized=False),
        SubjectMask(values=mask),
    )


# ---------------------------------------------------------------------------
# Ground truth
# ---------------------------------------------------------------------------


@dataclass
class SceneTruth:
    """Closed-form expectations derived from a scene spec alone."""

    blob_trajectories: np.ndarray  # (B, N, 2) latent centers per frame
    keyframes: tuple


def ground_truth(spec: SceneSpec) -> SceneTruth:
    trajectories = np.stack(
        [
            np.stack([blob.center_at(frame) for frame in range(1, spec.n_frames + 1)])
            for blob in spec.blobs
        ]
    ) if spec.blobs else np.zeros((0, spec.n_frames, 2))
    return SceneTruth(blob_trajectories=trajectories, keyframes=tuple(spec.keyframes))


def expected_anchor_count(spec: SceneSpec, tau: float, l_max: int = 64) -> int:
    """Anchor count the pipeline should select on this scene at threshold tau.

    Derived from pairwise signature distances: every masked trajectory's
    token collapses to its blob's signature class, so selection reduces to a
    greedy walk over the per-blob class distance matrix with class sizes as
    multiplicities.  Requires a single seed keyframe — with several
    keyframes the union mask seeds cells at frames where they are still
    background, which breaks the one-class-per-blob structure.
    """
    if len(spec.keyframes) != 1:
        raise ValidationError("anchor-count ground truth requires a single seed keyframe")
    if not spec.blobs:
        raise ValidationError("anchor-count ground truth requires at least one blob")
    kf = spec.keyframes[0]

    sizes = []
    first_cell_index = []
    for b in range(len(spec.blobs)):
        support = blob_support_cells(spec, b, kf)
        count = int(support.sum())
        if count == 0:
            raise ValidationError(f"blob {b} has no latent support at the seed keyframe")
        sizes.append(count)
        first_cell_index.append(int(np.argmax(support.ravel())))

    sigs = np.stack([blob.feature_signature for blob in spec.blobs])
    class_dist = 1.0 - sigs @ sigs.T
    np.fill_diagonal(class_dist, 0.0)

    n_classes = len(sizes)
    total = sum(sizes)
    weighted_row_sums = class_dist @ np.asarray(sizes, dtype=np.float64)
    order = sorted(range(n_classes), key=lambda c: (-weighted_row_sums[c], first_cell_index[c]))
    selected = [order[0]]
    count = 1
    limit = min(l_max, total)
    while count < limit:
        best_val, best_class = -np.inf, None
        for c in range(n_classes):
            if c in selected:
                remaining_duplicates = sizes[c] - 1 >= 1
                val = 0.0 if remaining_duplicates else None
            else:
                val = min(class_dist[c][s] for s in selected)
            if val is not None and val > best_val:
                best_val, best_class = val, c
        if best_class is None or best_val < tau:
            break
        count += 1
        if best_class not in selected:
            selected.append(best_class)
        else:
            sizes[best_class] -= 1
    return count


# ---------------------------------------------------------------------------
# Scene spec JSON and on-disk layout
# ---------------------------------------------------------------------------


def scene_spec_to_dict(spec: SceneSpec) -> dict:
    return {
        "n_frames": spec.n_frames,
        "latent_h": spec.latent_h,
        "latent_w": spec.latent_w,
        "feature_dim": spec.feature_dim,
        "pixel_scale": spec.pixel_scale,
        "rng_seed": spec.rng_seed,
        "keyframes": list(spec.keyframes),
        "background_signature": [float(x) for x in spec.background_signature],
        "global_flow": (
            None
            if spec.global_flow is None
            else {
                "a": spec.global_flow.a,
                "b": spec.global_flow.b,
                "c": spec.global_flow.c,
                "d": spec.global_flow.d,
                "tx": spec.global_flow.tx,
                "ty": spec.global_flow.ty,
            }
        ),
        "blobs": [
            {
                "center": [float(blob.center[0]), float(blob.center[1])],
                "velocity": [float(blob.velocity[0]), float(blob.velocity[1])],
                "radius": float(blob.radius),
                "feature_signature": [float(x) for x in blob.feature_signature],
                "color": [int(c) for c in blob.color],
            }
            for blob in spec.blobs
        ],
    }


def scene_spec_from_dict(payload: dict) -> SceneSpec:
    try:
        gf = payload.get("global_flow")
        return SceneSpec(
            n_frames=int(payload["n_frames"]),
            latent_h=int(payload["latent_h"]),
            latent_w=int(payload["latent_w"]),
            feature_dim=int(payload["feature_dim"]),
            pixel_scale=int(payload.get("pixel_scale", 1)),
            rng_seed=int(payload.get("rng_seed", 0)),
            keyframes=payload.get("keyframes"),
            background_signature=payload.get("background_signature"),
            global_flow=None if gf is None else GlobalAffineFlow(**gf),
            blobs=[
                Blob(
                    center=tuple(item["center"]),
                    velocity=tuple(item["velocity"]),
                    radius=float(item["radius"]),
                    feature_signature=item["feature_signature"],
                    color=tuple(item.get("color", (224, 64, 64))),
                )
                for item in payload.get("blobs", [])
            ],
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed scene spec: {exc}") from exc


def load_scene_spec(path) -> SceneSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return scene_spec_from_dict(json.load(fh))


def write_scene(spec: SceneSpec, out_dir) -> dict:
    """Render a scene to disk in the standard layout; returns the paths."""
    frames, fwd, bwd, volume, mask = generate_scene(spec)
    frames_dir = os.path.join(out_dir, "frames")
    flows_dir = os.path.join(out_dir, "flows")
    os.makedirs(frames_dir, exist_ok=True)
    os.makedirs(flows_dir, exist_ok=True)

    write_frame_sequence(frames, frames_dir)
    for i, (f, b) in enumerate(zip(fwd, bwd), start=1):
        write_flow(f, os.path.join(flows_dir, "fwd_%03d.flo" % i))
        write_flow(b, os.path.join(flows_dir, "bwd_%03d.flo" % i))
    feature_path = os.path.join(out_dir, "features.fmap")
    mask_path = os.path.join(out_dir, "mask.pgm")
    write_feature_volume(volume, feature_path)
    write_mask(mask, mask_path)

    truth = ground_truth(spec)
    with open(os.path.join(out_dir, "scene.json"), "w", encoding="utf-8") as fh:
        json.dump(scene_spec_to_dict(spec), fh, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "truth.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "keyframes": list(truth.keyframes),
                "blob_trajectories": [
                    [[float(u), float(v)] for u, v in path] for path in truth.blob_trajectories
                ],
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    return {
        "frames": frames_dir,
        "flows": flows_dir,
        "features": feature_path,
        "mask": mask_path,
    }
