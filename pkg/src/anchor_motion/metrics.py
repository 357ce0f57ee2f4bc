"""Numeric evaluation metrics: flow similarity, warp error, detection F1.

* Flow similarity: mean cosine between source and edited flow vectors over
  all frame pairs and pixels; pixels where either vector is near zero are
  skipped.  When every pixel is skipped the result is degenerate: 1.0 when
  both videos are static, 0.0 otherwise.
* Warp error: each frame i+1 is backward-warped onto frame i using the
  source flow; the mean squared difference over in-bounds pixels (channels
  in [0, 255]) is averaged over frame pairs and reported scaled by 1e-4.
* Detection F1: per-frame greedy IoU matching of predictions to ground-truth
  boxes, pooled precision/recall, harmonic mean.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .formats import FrameSequence
from .tracking import bilinear_sample

ZERO_NORM_EPS = 1e-8
WARP_ERROR_SCALE = 1e-4


@dataclass
class FlowSimilarityResult:
    value: float
    degenerate: bool
    compared_pixels: int


@dataclass
class DetectionBox:
    frame: int
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    label: str = ""

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(
                f"degenerate box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass
class MetricReport:
    flow_similarity: float | None = None
    flow_similarity_degenerate: bool | None = None
    warp_error_scaled: float | None = None
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None

    def to_dict(self) -> dict:
        return {
            "flow_similarity": self.flow_similarity,
            "flow_similarity_degenerate": self.flow_similarity_degenerate,
            "warp_error_scaled": self.warp_error_scaled,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def _check_flow_pairing(src_flows, edit_flows):
    if len(src_flows) != len(edit_flows) or not src_flows:
        raise ValidationError(
            f"flow lists must be nonempty and equal length, got {len(src_flows)} vs {len(edit_flows)}"
        )
    for a, b in zip(src_flows, edit_flows):
        if a.height != b.height or a.width != b.width:
            raise ValidationError("flow dimensions differ between source and edit")


def flow_similarity(src_flows, edit_flows) -> FlowSimilarityResult:
    """Mean cosine similarity between matched flow vectors."""
    _check_flow_pairing(src_flows, edit_flows)
    total = 0.0
    count = 0
    all_zero = True
    for src, edit in zip(src_flows, edit_flows):
        su = np.asarray(src.u, dtype=np.float64)
        sv = np.asarray(src.v, dtype=np.float64)
        eu = np.asarray(edit.u, dtype=np.float64)
        ev = np.asarray(edit.v, dtype=np.float64)
        sn = np.hypot(su, sv)
        en = np.hypot(eu, ev)
        if sn.max() >= ZERO_NORM_EPS or en.max() >= ZERO_NORM_EPS:
            all_zero = False
        keep = (sn >= ZERO_NORM_EPS) & (en >= ZERO_NORM_EPS)
        if keep.any():
            cos = (su[keep] * eu[keep] + sv[keep] * ev[keep]) / (sn[keep] * en[keep])
            total += float(cos.sum())
            count += int(keep.sum())
    if count == 0:
        return FlowSimilarityResult(value=1.0 if all_zero else 0.0, degenerate=True, compared_pixels=0)
    return FlowSimilarityResult(value=total / count, degenerate=False, compared_pixels=count)


def warp_error(src_flows, edit_frames: FrameSequence) -> float:
    """Backward-warp consistency error of a video under the source flow."""
    if edit_frames.count < 2:
        raise ValidationError("warp error needs at least 2 frames")
    if len(src_flows) != edit_frames.count - 1:
        raise ValidationError(
            f"need N-1 flows for N frames, got {len(src_flows)} for {edit_frames.count}"
        )
    h, w = edit_frames.height, edit_frames.width
    for f in src_flows:
        if f.height != h or f.width != w:
            raise ValidationError("flow resolution does not match the frames")

    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    pair_errors = []
    for i, flow in enumerate(src_flows):
        sample_u = cols + np.asarray(flow.u, dtype=np.float64)
        sample_v = rows + np.asarray(flow.v, dtype=np.float64)
        in_bounds = (sample_u >= 0) & (sample_u <= w - 1) & (sample_v >= 0) & (sample_v <= h - 1)
        if not in_bounds.any():
            continue
        positions = np.stack([sample_u, sample_v], axis=-1)
        warped = bilinear_sample(edit_frames.frames[i + 1].astype(np.float64), positions)
        diff = warped - edit_frames.frames[i].astype(np.float64)
        pair_errors.append(float(np.mean(diff[in_bounds] ** 2)))
    if not pair_errors:
        return 0.0
    return float(np.mean(pair_errors)) * WARP_ERROR_SCALE


def box_iou(a: DetectionBox, b: DetectionBox) -> float:
    ix = max(0.0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    iy = max(0.0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def detection_f1(gt, pred, iou_thresh: float = 0.5) -> tuple[float, float, float]:
    """Pooled precision/recall/F1 with per-frame greedy IoU matching.

    Within each frame, candidate (prediction, ground-truth) pairs are taken
    in descending IoU order; each box matches at most once and a match needs
    IoU strictly above ``iou_thresh``.  Empty sets give zero, never NaN.
    """
    gt = list(gt)
    pred = list(pred)
    frames = sorted({b.frame for b in gt} | {b.frame for b in pred})
    matches = 0
    for frame in frames:
        frame_gt = [b for b in gt if b.frame == frame]
        frame_pred = [b for b in pred if b.frame == frame]
        candidates = []
        for pi, p in enumerate(frame_pred):
            for gi, g in enumerate(frame_gt):
                iou = box_iou(p, g)
                if iou > iou_thresh:
                    candidates.append((-iou, pi, gi))
        candidates.sort()
        used_pred: set = set()
        used_gt: set = set()
        for _, pi, gi in candidates:
            if pi in used_pred or gi in used_gt:
                continue
            used_pred.add(pi)
            used_gt.add(gi)
            matches += 1
    precision = matches / len(pred) if pred else 0.0
    recall = matches / len(gt) if gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def parse_boxes_jsonl(path) -> list:
    """Read detection boxes from a JSON-lines file."""
    boxes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                boxes.append(
                    DetectionBox(
                        frame=int(row["frame"]),
                        x_min=float(row["x_min"]),
                        y_min=float(row["y_min"]),
                        x_max=float(row["x_max"]),
                        y_max=float(row["y_max"]),
                        label=str(row.get("label", "")),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: malformed box record: {exc}") from exc
    return boxes


def save_report(report: MetricReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
