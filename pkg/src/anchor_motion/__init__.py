"""Anchor-token motion representation toolkit.

Collect point trajectories from optical flow, build motion tokens from
per-frame feature volumes, select a sparse diverse anchor set by farthest
point sampling with an adaptive stop threshold, realign anchors onto a new
subject, and score motion/edit metrics.
"""

from .alignment import (
    AlignmentMapping,
    AnchorTokenMatcher,
    InjectionSchedule,
    load_schedule,
    match_anchors,
    relocate,
    save_schedule,
    schedule_from_dict,
    schedule_to_dict,
    unaligned_schedule,
)
from .errors import (
    AnchorMotionError,
    CorruptionError,
    FormatError,
    NoTrajectoriesError,
    ValidationError,
)
from .formats import (
    FeatureVolume,
    FlowField,
    FrameSequence,
    SubjectMask,
    read_feature_volume,
    read_flow,
    read_frame,
    read_frame_sequence,
    read_mask,
    write_feature_volume,
    write_flow,
    write_frame,
    write_frame_sequence,
    write_mask,
)
from .metrics import (
    DetectionBox,
    FlowSimilarityResult,
    MetricReport,
    box_iou,
    detection_f1,
    flow_similarity,
    parse_boxes_jsonl,
    warp_error,
)
from .selection import (
    DEFAULT_L_MAX,
    DEFAULT_TAU,
    AnchorSet,
    FarthestPointSampler,
    anchors_to_dict,
    audit_selection,
    fps_select,
    load_anchors,
    random_select,
)
from .synthetic import (
    Blob,
    GlobalAffineFlow,
    SceneSpec,
    blob_support_cells,
    expected_anchor_count,
    generate_scene,
    ground_truth,
    write_scene,
)
from .tokens import (
    MotionToken,
    MotionTokenSet,
    build_motion_token,
    build_token_set,
    cross_distances,
    normalize_features,
    pairwise_distances,
    token_distance,
    token_set_from_features,
)
from .tracking import (
    Trajectory,
    TrajectorySet,
    advect,
    bilinear_sample,
    collect_trajectories,
    dedup_trajectories,
    default_keyframes,
    downsample_flow,
    load_trajectory_set,
    save_trajectory_set,
    track_from_keyframe,
)

__version__ = "0.1.0"
