"""Command-line frontend.

Subcommands: ``synth``, ``track``, ``select``, ``align``, ``metrics``.
Exit codes: 0 success, 2 input/configuration error, 3 empty-result
condition.  All outputs are deterministic for fixed inputs, seed and any
``ANCHOR_MOTION_THREADS`` setting.
"""

import argparse
import glob
import json
import os
import re
import sys

import numpy as np

from .alignment import (
    AlignmentMapping,
    match_anchors,
    relocate,
    save_schedule,
    unaligned_schedule,
)
from .errors import AnchorMotionError, NoTrajectoriesError, ValidationError
from .formats import (
    read_feature_volume,
    read_flow,
    read_frame_sequence,
    read_mask,
    write_frame,
)
from .metrics import (
    MetricReport,
    detection_f1,
    flow_similarity,
    parse_boxes_jsonl,
    save_report,
    warp_error,
)
from .selection import (
    DEFAULT_L_MAX,
    DEFAULT_TAU,
    anchors_to_dict,
    audit_selection,
    fps_select,
    load_anchors,
    random_select,
    save_anchors,
)
from .tokens import build_token_set, normalize_features, pairwise_distances, token_set_from_features
from .tracking import (
    collect_trajectories,
    default_keyframes,
    downsample_flow,
    load_trajectory_set,
    save_trajectory_set,
)
from .synthetic import load_scene_spec, write_scene

OVERLAY_COLOR = (255, 32, 32)
OVERLAY_DOT_RADIUS = 1


def _read_flow_dir(directory):
    """Read fwd_NNN.flo / bwd_NNN.flo pairs; numbering must be contiguous from 1."""

    def indexed(prefix):
        found = {}
        for path in glob.glob(os.path.join(directory, f"{prefix}_*.flo")):
            match = re.fullmatch(rf"{prefix}_(\d+)\.flo", os.path.basename(path))
            if match:
                found[int(match.group(1))] = path
        if not found:
            raise ValidationError(f"no {prefix}_*.flo files in {directory}")
        expected = list(range(1, len(found) + 1))
        if sorted(found) != expected:
            raise ValidationError(f"{prefix} flow numbering in {directory} is not contiguous from 1")
        return [read_flow(found[i]) for i in expected]

    fwd = indexed("fwd")
    bwd = indexed("bwd")
    if len(fwd) != len(bwd):
        raise ValidationError(
            f"forward/backward flow counts differ in {directory}: {len(fwd)} vs {len(bwd)}"
        )
    return fwd, bwd


def _read_frames_dir(directory):
    paths = sorted(glob.glob(os.path.join(directory, "frame_*.ppm")))
    if not paths:
        raise ValidationError(f"no frame_*.ppm files in {directory}")
    return read_frame_sequence(paths)


def _parse_keyframes(raw: str | None, n_frames: int):
    if raw is None:
        return default_keyframes(n_frames)
    try:
        values = tuple(sorted({int(part) for part in raw.split(",") if part.strip()}))
    except ValueError:
        raise ValidationError(f"cannot parse keyframes {raw!r}") from None
    if not values:
        raise ValidationError("keyframe list is empty")
    return values


def _draw_overlay(canvas: np.ndarray, positions: np.ndarray) -> None:
    h, w = canvas.shape[:2]
    for u, v in positions:
        cu, cv = int(round(u)), int(round(v))
        lo_v = max(0, cv - OVERLAY_DOT_RADIUS)
        hi_v = min(h, cv + OVERLAY_DOT_RADIUS + 1)
        lo_u = max(0, cu - OVERLAY_DOT_RADIUS)
        hi_u = min(w, cu + OVERLAY_DOT_RADIUS + 1)
        canvas[lo_v:hi_v, lo_u:hi_u] = OVERLAY_COLOR


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = load_scene_spec(args.spec)
    os.makedirs(args.out, exist_ok=True)
    write_scene(spec, args.out)
    return 0


def cmd_track(args) -> int:
    fwd, bwd = _read_flow_dir(args.flows)
    n = len(fwd) + 1
    keyframes = _parse_keyframes(args.keyframes, n)
    fwd = [downsample_flow(f, args.latent_h, args.latent_w) for f in fwd]
    bwd = [downsample_flow(f, args.latent_h, args.latent_w) for f in bwd]
    mask = read_mask(args.mask) if args.mask else None
    tset = collect_trajectories(fwd, bwd, keyframes=keyframes, mask=mask)

    os.makedirs(args.out, exist_ok=True)
    save_trajectory_set(tset, os.path.join(args.out, "trajectories.json"))

    frames = _read_frames_dir(args.frames) if args.frames else None
    positions = tset.positions_stack()
    overlay_dir = os.path.join(args.out, "overlays")
    os.makedirs(overlay_dir, exist_ok=True)
    for i in range(n):
        if frames is not None:
            canvas = frames.frames[i].copy()
            scale = frames.width / tset.w
            pts = positions[:, i, :] * scale + (scale - 1) / 2.0
        else:
            canvas = np.zeros((tset.h, tset.w, 3), dtype=np.uint8)
            pts = positions[:, i, :]
        _draw_overlay(canvas, pts)
        write_frame(canvas, os.path.join(overlay_dir, "overlay_%03d.ppm" % (i + 1)))
    return 0


def cmd_select(args) -> int:
    tset = load_trajectory_set(args.trajectories)
    volume = read_feature_volume(args.features)
    if not volume.normalized:
        volume = normalize_features(volume)
    tokens = build_token_set(tset, volume)

    if args.strategy == "external-feature":
        if not args.external_features:
            raise ValidationError("strategy external-feature requires --external-features")
        ext = read_feature_volume(args.external_features)
        if not ext.normalized:
            ext = normalize_features(ext)
        dist = pairwise_distances(build_token_set(tset, ext))
    else:
        dist = pairwise_distances(tokens)

    audit_ok = None
    if args.strategy == "fps":
        anchors = fps_select(dist, tau=args.tau, l_max=args.l_max)
        audit_ok = audit_selection(anchors, dist)
    elif args.strategy == "random":
        anchors = random_select(dist, tau=args.tau, l_max=args.l_max, rng=np.random.default_rng(args.seed))
    elif args.strategy == "external-feature":
        anchors = fps_select(dist, tau=args.tau, l_max=args.l_max)
        anchors.seed_rule = "max-row-sum/external-feature"
        audit_ok = audit_selection(anchors, dist)
    else:
        raise ValidationError(f"unknown strategy {args.strategy!r}")

    payload = anchors_to_dict(anchors, tokens, strategy=args.strategy, audit_ok=audit_ok)
    save_anchors(payload, args.out)
    return 0


def cmd_align(args) -> int:
    anchors_file = load_anchors(args.anchors)
    features = anchors_file.token_features
    if args.no_align:
        schedule = unaligned_schedule(
            anchor_features=features,
            anchor_indices=anchors_file.anchors.indices,
            source_trajectories=anchors_file.trajectories,
            n=anchors_file.n,
            h=anchors_file.h,
            w=anchors_file.w,
        )
        save_schedule(schedule, args.out)
        return 0

    if not args.target_features or not args.target_trajectories:
        raise ValidationError("alignment requires --target-features and --target-trajectories")
    target_tset = load_trajectory_set(args.target_trajectories)
    target_volume = read_feature_volume(args.target_features)
    if not target_volume.normalized:
        target_volume = normalize_features(target_volume)
    target_tokens = build_token_set(target_tset, target_volume)

    if features.shape[1] != target_tokens.n or features.shape[2] != target_tokens.c:
        raise ValidationError(
            f"anchor tokens ({features.shape[1]},{features.shape[2]}) are incompatible "
            f"with target tokens ({target_tokens.n},{target_tokens.c})"
        )
    source_tokens = token_set_from_features(features)
    matched = match_anchors(range(len(source_tokens)), source_tokens, target_tokens)
    # Report source indices as the anchors' original token indices, not
    # positions within the anchor list.
    mapping = AlignmentMapping(
        source_indices=np.asarray(anchors_file.anchors.indices, dtype=np.intp),
        target_indices=matched.target_indices,
        distances=matched.distances,
    )
    schedule = relocate(features, mapping, target_tset)
    save_schedule(schedule, args.out)
    return 0


def cmd_metrics(args) -> int:
    report = MetricReport()
    if args.src_flows and args.edit_flows:
        src, _ = _read_flow_dir(args.src_flows)
        edit, _ = _read_flow_dir(args.edit_flows)
        result = flow_similarity(src, edit)
        report.flow_similarity = result.value
        report.flow_similarity_degenerate = result.degenerate
    if args.src_flows and args.edit_frames:
        src, _ = _read_flow_dir(args.src_flows)
        frames = _read_frames_dir(args.edit_frames)
        report.warp_error_scaled = warp_error(src, frames)
    if args.gt_boxes and args.pred_boxes:
        gt = parse_boxes_jsonl(args.gt_boxes)
        pred = parse_boxes_jsonl(args.pred_boxes)
        precision, recall, f1 = detection_f1(gt, pred, iou_thresh=args.iou_thresh)
        report.precision = precision
        report.recall = recall
        report.f1 = f1
    save_report(report, args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchor-motion",
        description="Anchor-token motion representation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic scene to disk")
    p.add_argument("--spec", required=True, help="scene spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="collect latent trajectories from flow files")
    p.add_argument("--flows", required=True, help="directory of fwd_*.flo / bwd_*.flo")
    p.add_argument("--latent-h", type=int, required=True)
    p.add_argument("--latent-w", type=int, required=True)
    p.add_argument("--mask", help="subject mask PGM (P5)")
    p.add_argument("--frames", help="frame directory for overlay rendering")
    p.add_argument("--keyframes", help="comma-separated 1-based keyframes (default: 1,N/2,N)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("select", help="select anchor tokens from trajectories + features")
    p.add_argument("--trajectories", required=True, help="trajectories JSON")
    p.add_argument("--features", required=True, help="feature volume (.fmap)")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--l-max", type=int, default=DEFAULT_L_MAX)
    p.add_argument(
        "--strategy", choices=["fps", "random", "external-feature"], default="fps"
    )
    p.add_argument("--external-features", help=".fmap used by the external-feature strategy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="anchors JSON path")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("align", help="realign anchors onto a target video")
    p.add_argument("--anchors", required=True, help="anchors JSON")
    p.add_argument("--target-features", help="target feature volume (.fmap)")
    p.add_argument("--target-trajectories", help="target trajectories JSON")
    p.add_argument("--no-align", action="store_true", help="keep source trajectories")
    p.add_argument("--out", required=True, help="schedule JSON path")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("metrics", help="compute motion/edit metrics")
    p.add_argument("--src-flows", help="source flow directory")
    p.add_argument("--edit-flows", help="edited-video flow directory")
    p.add_argument("--edit-frames", help="edited-video frame directory")
    p.add_argument("--gt-boxes", help="ground-truth boxes JSONL")
    p.add_argument("--pred-boxes", help="predicted boxes JSONL")
    p.add_argument("--iou-thresh", type=float, default=0.5)
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoTrajectoriesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (AnchorMotionError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
