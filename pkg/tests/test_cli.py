import json

import numpy as np
import pytest

from anchor_motion import load_anchors, load_schedule, load_trajectory_set
from anchor_motion.cli import build_parser, main
from anchor_motion.synthetic import scene_spec_to_dict
from scenes import displaced_target_scene, static_scene, two_blob_scene


def write_spec(spec, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_spec_to_dict(spec), fh)


@pytest.fixture()
def scene_dir(tmp_path):
    spec_path = tmp_path / "scene.json"
    write_spec(two_blob_scene(), spec_path)
    out = tmp_path / "scene"
    assert main(["synth", "--spec", str(spec_path), "--out", str(out)]) == 0
    return out


def run_track(scene, out, extra=()):
    args = [
        "track",
        "--flows",
        str(scene / "flows"),
        "--latent-h",
        "24",
        "--latent-w",
        "24",
        "--mask",
        str(scene / "mask.pgm"),
        "--keyframes",
        "1",
        "--out",
        str(out),
        *extra,
    ]
    return main(args)


def test_cli_defaults_match_documented_values():
    parser = build_parser()
    args = parser.parse_args(["select", "--trajectories", "t", "--features", "f", "--out", "o"])
    assert args.tau == 0.65
    assert args.l_max == 64
    assert args.strategy == "fps"


def test_synth_writes_scene(scene_dir):
    assert (scene_dir / "features.fmap").exists()
    assert (scene_dir / "mask.pgm").exists()
    assert len(list((scene_dir / "flows").glob("fwd_*.flo"))) == 11


def test_synth_deterministic(tmp_path):
    spec_path = tmp_path / "scene.json"
    write_spec(two_blob_scene(), spec_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--spec", str(spec_path), "--out", str(out1)]) == 0
    assert main(["synth", "--spec", str(spec_path), "--out", str(out2)]) == 0
    for rel in ["features.fmap", "mask.pgm", "flows/fwd_003.flo", "frames/frame_002.ppm"]:
        assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes()


def test_synth_invalid_spec_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"n_frames\": 1}")
    assert main(["synth", "--spec", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_track_writes_trajectories_and_overlays(scene_dir, tmp_path):
    out = tmp_path / "track"
    assert run_track(scene_dir, out, extra=("--frames", str(scene_dir / "frames"))) == 0
    tset = load_trajectory_set(out / "trajectories.json")
    assert len(tset) == 26  # two radius-2 latent disks of 13 cells each
    overlays = sorted((out / "overlays").glob("overlay_*.ppm"))
    assert len(overlays) == 12


def test_track_static_scene_dedups_to_grid(tmp_path):
    spec_path = tmp_path / "scene.json"
    write_spec(static_scene(latent=8, pixel_scale=2), spec_path)
    scene = tmp_path / "scene"
    assert main(["synth", "--spec", str(spec_path), "--out", str(scene)]) == 0
    out = tmp_path / "track"
    args = [
        "track",
        "--flows",
        str(scene / "flows"),
        "--latent-h",
        "8",
        "--latent-w",
        "8",
        "--out",
        str(out),
    ]
    assert main(args) == 0
    tset = load_trajectory_set(out / "trajectories.json")
    assert len(tset) == 64
    assert all(np.allclose(t.positions, t.positions[0]) for t in tset.trajectories)


def test_track_rerun_byte_identical(scene_dir, tmp_path):
    out1, out2 = tmp_path / "t1", tmp_path / "t2"
    assert run_track(scene_dir, out1) == 0
    assert run_track(scene_dir, out2) == 0
    assert (out1 / "trajectories.json").read_bytes() == (out2 / "trajectories.json").read_bytes()


def test_track_all_false_mask_exit_3(scene_dir, tmp_path):
    mask_path = tmp_path / "empty.pgm"
    mask_path.write_bytes(b"P5\n24 24\n255\n" + bytes(24 * 24))
    args = [
        "track",
        "--flows",
        str(scene_dir / "flows"),
        "--latent-h",
        "24",
        "--latent-w",
        "24",
        "--mask",
        str(mask_path),
        "--out",
        str(tmp_path / "t"),
    ]
    assert main(args) == 3


def test_track_missing_flows_exit_2(tmp_path):
    args = [
        "track",
        "--flows",
        str(tmp_path / "nowhere"),
        "--latent-h",
        "8",
        "--latent-w",
        "8",
        "--out",
        str(tmp_path / "t"),
    ]
    assert main(args) == 2


def select_pipeline(scene, tmp_path, extra=()):
    track_out = tmp_path / "track"
    assert run_track(scene, track_out) == 0
    anchors_path = tmp_path / "anchors.json"
    args = [
        "select",
        "--trajectories",
        str(track_out / "trajectories.json"),
        "--features",
        str(scene / "features.fmap"),
        "--tau",
        "0.5",
        "--out",
        str(anchors_path),
        *extra,
    ]
    assert main(args) == 0
    return anchors_path, track_out


def test_select_two_blob_scene_two_anchors(scene_dir, tmp_path):
    anchors_path, _ = select_pipeline(scene_dir, tmp_path)
    anchors = load_anchors(anchors_path)
    assert anchors.anchors.indices and len(anchors.anchors.indices) == 2
    assert anchors.audit_ok is True
    assert anchors.strategy == "fps"


def test_select_huge_tau_single_anchor(scene_dir, tmp_path):
    track_out = tmp_path / "track"
    assert run_track(scene_dir, track_out) == 0
    anchors_path = tmp_path / "anchors.json"
    args = [
        "select",
        "--trajectories",
        str(track_out / "trajectories.json"),
        "--features",
        str(scene_dir / "features.fmap"),
        "--tau",
        "10",
        "--out",
        str(anchors_path),
    ]
    assert main(args) == 0
    assert len(load_anchors(anchors_path).anchors.indices) == 1


def test_select_random_strategy_reproducible(scene_dir, tmp_path):
    a, _ = select_pipeline(scene_dir, tmp_path, extra=("--strategy", "random", "--seed", "11"))
    content_a = a.read_bytes()
    b_dir = tmp_path / "again"
    b_dir.mkdir()
    b, _ = select_pipeline(scene_dir, b_dir, extra=("--strategy", "random", "--seed", "11"))
    assert content_a == b.read_bytes()


def test_select_external_strategy_requires_volume(scene_dir, tmp_path):
    track_out = tmp_path / "track"
    assert run_track(scene_dir, track_out) == 0
    args = [
        "select",
        "--trajectories",
        str(track_out / "trajectories.json"),
        "--features",
        str(scene_dir / "features.fmap"),
        "--strategy",
        "external-feature",
        "--out",
        str(tmp_path / "anchors.json"),
    ]
    assert main(args) == 2


def test_select_external_strategy_with_volume(scene_dir, tmp_path):
    anchors_path, _ = select_pipeline(
        scene_dir,
        tmp_path,
        extra=("--strategy", "external-feature", "--external-features", str(scene_dir / "features.fmap")),
    )
    anchors = load_anchors(anchors_path)
    assert anchors.strategy == "external-feature"
    assert len(anchors.anchors.indices) == 2


def target_scene(tmp_path):
    spec_path = tmp_path / "target_spec.json"
    write_spec(displaced_target_scene(), spec_path)
    out = tmp_path / "target"
    assert main(["synth", "--spec", str(spec_path), "--out", str(out)]) == 0
    return out


def test_align_identity_on_source_scene(scene_dir, tmp_path):
    anchors_path, track_out = select_pipeline(scene_dir, tmp_path)
    schedule_path = tmp_path / "schedule.json"
    args = [
        "align",
        "--anchors",
        str(anchors_path),
        "--target-features",
        str(scene_dir / "features.fmap"),
        "--target-trajectories",
        str(track_out / "trajectories.json"),
        "--out",
        str(schedule_path),
    ]
    assert main(args) == 0
    schedule = load_schedule(schedule_path)
    anchors = load_anchors(anchors_path)
    assert schedule.alignment_applied is True
    # self-alignment at distance zero keeps each anchor on its own class
    assert np.allclose(schedule.features, anchors.token_features)


def test_align_no_align_keeps_source_paths(scene_dir, tmp_path):
    anchors_path, _ = select_pipeline(scene_dir, tmp_path)
    schedule_path = tmp_path / "schedule.json"
    assert main(["align", "--anchors", str(anchors_path), "--no-align", "--out", str(schedule_path)]) == 0
    schedule = load_schedule(schedule_path)
    anchors = load_anchors(anchors_path)
    assert schedule.alignment_applied is False
    assert np.array_equal(schedule.trajectories, anchors.trajectories)


def test_align_dim_mismatch_exit_2(scene_dir, tmp_path):
    anchors_path, track_out = select_pipeline(scene_dir, tmp_path)
    # target volume with a different channel count
    from anchor_motion import FeatureVolume, write_feature_volume

    bad = tmp_path / "bad.fmap"
    write_feature_volume(FeatureVolume(data=np.zeros((12, 24, 24, 3), dtype=np.float32)), bad)
    args = [
        "align",
        "--anchors",
        str(anchors_path),
        "--target-features",
        str(bad),
        "--target-trajectories",
        str(track_out / "trajectories.json"),
        "--out",
        str(tmp_path / "s.json"),
    ]
    assert main(args) == 2


def test_metrics_full_report(scene_dir, tmp_path):
    gt = tmp_path / "gt.jsonl"
    pred = tmp_path / "pred.jsonl"
    gt.write_text(
        '{"frame": 1, "x_min": 0, "y_min": 0, "x_max": 2, "y_max": 2}\n'
        '{"frame": 1, "x_min": 5, "y_min": 5, "x_max": 7, "y_max": 7}\n'
    )
    pred.write_text('{"frame": 1, "x_min": 0, "y_min": 0, "x_max": 2, "y_max": 2}\n')
    report_path = tmp_path / "report.json"
    args = [
        "metrics",
        "--src-flows",
        str(scene_dir / "flows"),
        "--edit-flows",
        str(scene_dir / "flows"),
        "--edit-frames",
        str(scene_dir / "frames"),
        "--gt-boxes",
        str(gt),
        "--pred-boxes",
        str(pred),
        "--out",
        str(report_path),
    ]
    assert main(args) == 0
    report = json.loads(report_path.read_text())
    assert report["flow_similarity"] == pytest.approx(1.0, abs=1e-6)
    assert report["flow_similarity_degenerate"] is False
    assert report["warp_error_scaled"] is not None
    assert report["f1"] == pytest.approx(2.0 / 3.0, abs=1e-9)


def test_metrics_partial_inputs_yield_nulls(tmp_path, scene_dir):
    report_path = tmp_path / "report.json"
    args = [
        "metrics",
        "--src-flows",
        str(scene_dir / "flows"),
        "--edit-flows",
        str(scene_dir / "flows"),
        "--out",
        str(report_path),
    ]
    assert main(args) == 0
    report = json.loads(report_path.read_text())
    assert report["warp_error_scaled"] is None
    assert report["precision"] is None
    assert report["flow_similarity"] is not None


def test_metrics_malformed_boxes_exit_2(tmp_path, scene_dir):
    gt = tmp_path / "gt.jsonl"
    gt.write_text("not json\n")
    args = [
        "metrics",
        "--gt-boxes",
        str(gt),
        "--pred-boxes",
        str(gt),
        "--out",
        str(tmp_path / "r.json"),
    ]
    assert main(args) == 2
