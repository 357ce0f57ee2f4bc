"""Trajectory collection: seed every latent cell at a set of keyframes and
advect the seeds through downsampled bidirectional flow.

Coordinates are continuous latent-grid positions (u, v) = (column, row).
Frames and keyframes are 1-based throughout the public API.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import NoTrajectoriesError, ValidationError
from .formats import FlowField, SubjectMask
from .parallel import parallel_map
from .validation import check_positions


def default_keyframes(n_frames: int) -> tuple[int, ...]:
    """Default seed keyframes: first, middle and last frame."""
    if n_frames < 2:
        raise ValidationError(f"need at least 2 frames, got {n_frames}")
    return tuple(sorted({1, n_frames // 2, n_frames}))


@dataclass
class Trajectory:
    """One tracked point: per-frame latent positions plus validity flags.

    ``valid[i]`` is False from the first frame (in the tracking direction)
    whose unclamped position left the grid; positions themselves are clamped
    back onto the grid.
    """

    positions: np.ndarray  # (N, 2) float64, columns (u, v)
    valid: np.ndarray  # (N,) bool
    seed_keyframe: int  # 1-based
    seed_cell: tuple[int, int]  # (row, col)

    def __post_init__(self):
        self.positions = check_positions(self.positions)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != (self.positions.shape[0],):
            raise ValidationError("valid flags must have one entry per frame")
        if not self.valid[self.seed_keyframe - 1]:
            raise ValidationError("a trajectory must be valid at its seed keyframe")


@dataclass
class TrajectorySet:
    trajectories: list
    n: int
    h: int
    w: int

    def __len__(self) -> int:
        return len(self.trajectories)

    def positions_stack(self) -> np.ndarray:
        """All trajectory positions as one (K, N, 2) array."""
        return np.stack([t.positions for t in self.trajectories])


# ---------------------------------------------------------------------------
# Sampling and advection
# ---------------------------------------------------------------------------


def bilinear_sample(grid: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Sample a (H, W) or (H, W, C) grid at continuous (u, v) positions.

    Border handling clamps sample coordinates to the grid, so positions on
    the boundary are sampled exactly.
    """
    grid = np.asarray(grid, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    h, w = grid.shape[:2]
    u = np.clip(positions[..., 0], 0.0, w - 1.0)
    v = np.clip(positions[..., 1], 0.0, h - 1.0)
    u0 = np.floor(u).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = u - u0
    fv = v - v0
    if grid.ndim == 3:
        fu = fu[..., None]
        fv = fv[..., None]
    top = grid[v0, u0] * (1.0 - fu) + grid[v0, u1] * fu
    bottom = grid[v1, u0] * (1.0 - fu) + grid[v1, u1] * fu
    return top * (1.0 - fv) + bottom * fv


def advect(pos, flow: FlowField):
    """Move one (u, v) position by the bilinearly sampled flow at that position."""
    pos = np.asarray(pos, dtype=np.float64)
    moved = _advect_many(pos[None, :], flow)[0]
    return float(moved[0]), float(moved[1])


def _advect_many(positions: np.ndarray, flow: FlowField) -> np.ndarray:
    du = bilinear_sample(flow.u, positions)
    dv = bilinear_sample(flow.v, positions)
    return positions + np.stack([du, dv], axis=-1)


# ---------------------------------------------------------------------------
# Flow downsampling
# ---------------------------------------------------------------------------


def _area_mean(grid: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    h, w = grid.shape
    if h % target_h == 0 and w % target_w == 0:
        bh, bw = h // target_h, w // target_w
        return grid.reshape(target_h, bh, target_w, bw).mean(axis=(1, 3))
    # Uneven blocks: exact area averages via the integral image, treating each
    # source pixel as a unit cell.
    integral = np.zeros((h + 1, w + 1), dtype=np.float64)
    integral[1:, 1:] = grid.cumsum(axis=0).cumsum(axis=1)
    ys = np.linspace(0.0, h, target_h + 1)
    xs = np.linspace(0.0, w, target_w + 1)

    def interp_rows(at):
        lo = np.clip(np.floor(at).astype(np.intp), 0, h - 1)
        frac = at - lo
        return integral[lo] * (1.0 - frac)[:, None] + integral[lo + 1] * frac[:, None]

    rows = interp_rows(np.clip(ys, 0, h - 1e-12))
    lo = np.clip(np.floor(xs).astype(np.intp), 0, w - 1)
    frac = xs - lo
    corner = rows[:, lo] * (1.0 - frac) + rows[:, lo + 1] * frac
    sums = corner[1:, 1:] - corner[:-1, 1:] - corner[1:, :-1] + corner[:-1, :-1]
    area = np.outer(np.diff(ys), np.diff(xs))
    return sums / area


def downsample_flow(flow: FlowField, target_h: int, target_w: int) -> FlowField:
    """Block-average a flow field and rescale displacements to target units.

    Each output cell is the mean of its source block; u is scaled by
    ``target_w / source_w`` and v by ``target_h / source_h`` so displacements
    come out in target-grid units.
    """
    if target_h < 1 or target_w < 1:
        raise ValidationError("target dimensions must be >= 1")
    if target_h > flow.height or target_w > flow.width:
        raise ValidationError(
            f"target {target_h}x{target_w} exceeds source {flow.height}x{flow.width}"
        )
    su = target_w / flow.width
    sv = target_h / flow.height
    u = _area_mean(np.asarray(flow.u, dtype=np.float64), target_h, target_w) * su
    v = _area_mean(np.asarray(flow.v, dtype=np.float64), target_h, target_w) * sv
    return FlowField(u=u, v=v)


# ---------------------------------------------------------------------------
# Tracking
# ---------------------------------------------------------------------------


def _check_flow_lists(fwd_flows, bwd_flows):
    if not fwd_flows:
        raise ValidationError("need at least one forward flow field")
    if len(fwd_flows) != len(bwd_flows):
        raise ValidationError(
            f"forward/backward flow counts differ: {len(fwd_flows)} vs {len(bwd_flows)}"
        )
    h, w = fwd_flows[0].height, fwd_flows[0].width
    for f in list(fwd_flows) + list(bwd_flows):
        if f.height != h or f.width != w:
            raise ValidationError("all flow fields must share one resolution")
    return h, w


def track_from_keyframe(fwd_flows, bwd_flows, keyframe: int) -> list:
    """Track every latent cell from one keyframe through the whole video.

    ``fwd_flows[j]`` maps frame j+1 to frame j+2 and ``bwd_flows[j]`` maps
    frame j+2 back to frame j+1 (1-based frames).  Returns H*W trajectories
    in row-major seed order.
    """
    h, w = _check_flow_lists(fwd_flows, bwd_flows)
    n = len(fwd_flows) + 1
    if not 1 <= keyframe <= n:
        raise ValidationError(f"keyframe {keyframe} outside [1, {n}]")

    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    seeds = np.stack([cols.ravel(), rows.ravel()], axis=1)  # (HW, 2) as (u, v)
    k = seeds.shape[0]
    positions = np.empty((k, n, 2), dtype=np.float64)
    valid = np.ones((k, n), dtype=bool)
    positions[:, keyframe - 1] = seeds

    def sweep(step_flows, frame_indices):
        cur = seeds.copy()
        alive = np.ones(k, dtype=bool)
        for flow, idx in zip(step_flows, frame_indices):
            cur = _advect_many(cur, flow)
            exited = (
                (cur[:, 0] < 0.0) | (cur[:, 0] > w - 1.0) | (cur[:, 1] < 0.0) | (cur[:, 1] > h - 1.0)
            )
            alive &= ~exited
            np.clip(cur[:, 0], 0.0, w - 1.0, out=cur[:, 0])
            np.clip(cur[:, 1], 0.0, h - 1.0, out=cur[:, 1])
            positions[:, idx] = cur
            valid[:, idx] = alive

    # Forward from the keyframe, then backward; out-of-grid exits are sticky
    # per direction.
    sweep(
        [fwd_flows[i - 1] for i in range(keyframe, n)],
        [i for i in range(keyframe, n)],  # 0-based target frame indices
    )
    sweep(
        [bwd_flows[i - 2] for i in range(keyframe, 1, -1)],
        [i - 2 for i in range(keyframe, 1, -1)],
    )

    out = []
    for j in range(k):
        out.append(
            Trajectory(
                positions=positions[j],
                valid=valid[j],
                seed_keyframe=keyframe,
                seed_cell=(int(seeds[j, 1]), int(seeds[j, 0])),
            )
        )
    return out


def dedup_trajectories(trajectories) -> list:
    """Drop trajectories whose integer-rounded positions coincide at every frame.

    Input order decides the survivor: the first occurrence wins, so callers
    sort by (seed_keyframe, seed_cell) beforehand.
    """
    seen = {}
    for traj in trajectories:
        key = np.rint(traj.positions).astype(np.int64).tobytes()
        if key not in seen:
            seen[key] = traj
    return list(seen.values())


def collect_trajectories(fwd_flows, bwd_flows, keyframes=None, mask: SubjectMask | None = None) -> TrajectorySet:
    """Seed every latent cell at each keyframe, track, deduplicate, mask-filter.

    Raises NoTrajectoriesError when the mask removes everything.
    """
    h, w = _check_flow_lists(fwd_flows, bwd_flows)
    n = len(fwd_flows) + 1
    if keyframes is None:
        keyframes = default_keyframes(n)
    keyframes = sorted(set(int(k) for k in keyframes))
    if not keyframes:
        raise ValidationError("keyframe set must not be empty")
    for kf in keyframes:
        if not 1 <= kf <= n:
            raise ValidationError(f"keyframe {kf} outside [1, {n}]")
    if mask is not None and (mask.height != h or mask.width != w):
        raise ValidationError(
            f"mask {mask.height}x{mask.width} does not match latent grid {h}x{w}"
        )

    per_keyframe = parallel_map(lambda kf: track_from_keyframe(fwd_flows, bwd_flows, kf), keyframes)
    merged = [traj for tracks in per_keyframe for traj in tracks]
    deduped = dedup_trajectories(merged)
    if mask is not None:
        deduped = [t for t in deduped if mask.values[t.seed_cell[0], t.seed_cell[1]]]
    if not deduped:
        raise NoTrajectoriesError("no trajectories remain after mask filtering")
    return TrajectorySet(trajectories=deduped, n=n, h=h, w=w)


# ---------------------------------------------------------------------------
# JSON round-trip
# ---------------------------------------------------------------------------


def trajectory_set_to_dict(tset: TrajectorySet) -> dict:
    return {
        "n": tset.n,
        "h": tset.h,
        "w": tset.w,
        "trajectories": [
            {
                "seed_keyframe": t.seed_keyframe,
                "seed_cell": [t.seed_cell[0], t.seed_cell[1]],
                "positions": [[float(u), float(v)] for u, v in t.positions],
                "valid": [bool(b) for b in t.valid],
            }
            for t in tset.trajectories
        ],
    }


def trajectory_set_from_dict(payload: dict) -> TrajectorySet:
    try:
        trajectories = [
            Trajectory(
                positions=np.asarray(item["positions"], dtype=np.float64),
                valid=np.asarray(item["valid"], dtype=bool),
                seed_keyframe=int(item["seed_keyframe"]),
                seed_cell=(int(item["seed_cell"][0]), int(item["seed_cell"][1])),
            )
            for item in payload["trajectories"]
        ]
        return TrajectorySet(
            trajectories=trajectories, n=int(payload["n"]), h=int(payload["h"]), w=int(payload["w"])
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"malformed trajectory JSON: {exc}") from exc


def save_trajectory_set(tset: TrajectorySet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trajectory_set_to_dict(tset), fh, indent=2)
        fh.write("\n")


def load_trajectory_set(path) -> TrajectorySet:
    with open(path, "r", encoding="utf-8") as fh:
        return trajectory_set_from_dict(json.load(fh))
