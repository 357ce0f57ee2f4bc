import numpy as np
import pytest

from anchor_motion import (
    CorruptionError,
    FeatureVolume,
    FlowField,
    FormatError,
    SubjectMask,
    ValidationError,
    read_feature_volume,
    read_flow,
    read_frame,
    read_mask,
    write_feature_volume,
    write_flow,
    write_frame,
    write_mask,
)


def test_flow_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(7)
    flow = FlowField(u=rng.normal(size=(5, 9)), v=rng.normal(size=(5, 9)))
    path = tmp_path / "f.flo"
    write_flow(flow, path)
    back = read_flow(path)
    assert back.u.dtype == np.float32
    assert np.array_equal(back.u, flow.u)
    assert np.array_equal(back.v, flow.v)


def test_flow_write_deterministic(tmp_path):
    flow = FlowField(u=np.ones((3, 4)), v=np.full((3, 4), -2.5))
    a, b = tmp_path / "a.flo", tmp_path / "b.flo"
    write_flow(flow, a)
    write_flow(flow, b)
    assert a.read_bytes() == b.read_bytes()


def test_flow_zero_2x2_byte_layout(tmp_path):
    # magic (4) + width (4) + height (4) + 2*2*2 float32 = 44 bytes
    path = tmp_path / "zero.flo"
    path.write_bytes(b"PIEH" + np.array([2, 2], dtype="<i4").tobytes() + b"\x00" * 32)
    assert path.stat().st_size == 44
    flow = read_flow(path)
    assert flow.width == 2 and flow.height == 2
    assert not flow.u.any() and not flow.v.any()


def test_flow_bad_magic(tmp_path):
    path = tmp_path / "bad.flo"
    path.write_bytes(b"XXXX" + np.array([1, 1], dtype="<i4").tobytes() + b"\x00" * 8)
    with pytest.raises(FormatError):
        read_flow(path)


def test_flow_truncated_payload(tmp_path):
    path = tmp_path / "trunc.flo"
    path.write_bytes(b"PIEH" + np.array([2, 2], dtype="<i4").tobytes() + b"\x00" * 28)
    with pytest.raises(CorruptionError):
        read_flow(path)


def test_flow_nan_rejected_and_nothing_written(tmp_path):
    with pytest.raises(ValidationError):
        FlowField(u=np.array([[np.nan]]), v=np.zeros((1, 1)))
    assert list(tmp_path.iterdir()) == []


def test_flow_nonfinite_file_rejected(tmp_path):
    payload = np.full(8, np.inf, dtype="<f4").tobytes()
    path = tmp_path / "inf.flo"
    path.write_bytes(b"PIEH" + np.array([2, 2], dtype="<i4").tobytes() + payload)
    with pytest.raises(ValidationError):
        read_flow(path)


def test_feature_volume_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    vol = FeatureVolume(data=rng.normal(size=(4, 8, 8, 16)), normalized=False)
    path = tmp_path / "v.fmap"
    write_feature_volume(vol, path)
    back = read_feature_volume(path)
    assert back.normalized is False
    assert np.array_equal(back.data, vol.data)
    write_feature_volume(back, tmp_path / "v2.fmap")
    assert (tmp_path / "v.fmap").read_bytes() == (tmp_path / "v2.fmap").read_bytes()


def test_feature_volume_normalized_flag_round_trip(tmp_path):
    vol = FeatureVolume(data=np.zeros((2, 1, 1, 1)), normalized=True)
    path = tmp_path / "n.fmap"
    write_feature_volume(vol, path)
    assert read_feature_volume(path).normalized is True


def test_feature_volume_zero_frames_header(tmp_path):
    header = (
        b"FMAP"
        + np.array([1], dtype="<u4").tobytes()
        + np.array([0, 2, 2, 1], dtype="<u4").tobytes()
        + b"\x00"
    )
    path = tmp_path / "zero.fmap"
    path.write_bytes(header)
    with pytest.raises(ValidationError):
        read_feature_volume(path)


def test_feature_volume_truncated_by_one_value(tmp_path):
    vol = FeatureVolume(data=np.arange(2 * 2 * 2 * 2, dtype=np.float32).reshape(2, 2, 2, 2))
    path = tmp_path / "t.fmap"
    write_feature_volume(vol, path)
    clipped = path.read_bytes()[:-4]
    bad = tmp_path / "bad.fmap"
    bad.write_bytes(clipped)
    with pytest.raises(CorruptionError):
        read_feature_volume(bad)


def test_feature_volume_version_mismatch(tmp_path):
    vol = FeatureVolume(data=np.zeros((2, 1, 1, 1)))
    path = tmp_path / "v.fmap"
    write_feature_volume(vol, path)
    raw = bytearray(path.read_bytes())
    raw[4] = 9
    bad = tmp_path / "bad.fmap"
    bad.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        read_feature_volume(bad)


def test_mask_all_true_all_false(tmp_path):
    for fill, expect in ((255, True), (0, False)):
        path = tmp_path / f"m{fill}.pgm"
        path.write_bytes(b"P5\n3 2\n255\n" + bytes([fill] * 6))
        mask = read_mask(path)
        assert mask.values.shape == (2, 3)
        assert (mask.values == expect).all()


def test_mask_checkerboard(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([255, 0, 0, 255]))
    mask = read_mask(path)
    assert mask.values.tolist() == [[True, False], [False, True]]


def test_mask_round_trip(tmp_path):
    mask = SubjectMask(values=np.array([[True, False], [False, True], [True, True]]))
    path = tmp_path / "m.pgm"
    write_mask(mask, path)
    assert np.array_equal(read_mask(path).values, mask.values)


def test_mask_rejects_ppm_header(tmp_path):
    path = tmp_path / "notmask.pgm"
    path.write_bytes(b"P6\n1 1\n255\n" + bytes(3))
    with pytest.raises(FormatError):
        read_mask(path)


def test_mask_zero_dimension(tmp_path):
    path = tmp_path / "z.pgm"
    path.write_bytes(b"P5\n0 2\n255\n")
    with pytest.raises(ValidationError):
        read_mask(path)


def test_frame_round_trip_with_comment_header(tmp_path):
    image = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    path = tmp_path / "f.ppm"
    write_frame(image, path)
    assert np.array_equal(read_frame(path), image)
    commented = tmp_path / "c.ppm"
    commented.write_bytes(b"P6\n# a comment\n3 2\n255\n" + image.tobytes())
    assert np.array_equal(read_frame(commented), image)
