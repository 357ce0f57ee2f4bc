"""Domain containers and their on-disk formats.

Binary layouts (all multi-byte values little-endian):

* Flow files: 4-byte magic ``PIEH``, int32 width, int32 height, then
  ``2 * width * height`` float32 values interleaved (u, v) in row-major
  order.  This is the layout most flow estimators already emit.
* Feature volumes (``.fmap``): 4-byte magic ``FMAP``, uint32 version (=1),
  uint32 N, H, W, C, uint8 normalized flag, then ``N*H*W*C`` float32 values
  in frame-major, row-major, channel-last order.
* Subject masks: binary PGM (P5), nonzero pixel = inside subject.
* Frames: binary PPM (P6), 8-bit channels.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptionError, FormatError, ValidationError

FLOW_MAGIC = b"PIEH"
FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass
class FlowField:
    """Dense per-pixel displacement between one frame pair.

    ``u`` is horizontal displacement, ``v`` vertical, both in pixels per
    frame step, stored as float32 grids of identical shape.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=np.float32)
        self.v = np.ascontiguousarray(self.v, dtype=np.float32)
        if self.u.ndim != 2 or self.u.shape != self.v.shape:
            raise ValidationError(
                f"u and v must be 2-d grids of identical shape, got {self.u.shape} vs {self.v.shape}"
            )
        if self.height < 1 or self.width < 1:
            raise ValidationError("flow grid must be at least 1x1")
        if not (np.isfinite(self.u).all() and np.isfinite(self.v).all()):
            raise ValidationError("flow contains non-finite values")

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]


@dataclass
class FeatureVolume:
    """Per-frame feature grids for one video: shape (N, H, W, C), float32.

    ``normalized`` records whether the temporal mean has already been
    subtracted per location/channel.
    """

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 4:
            raise ValidationError(f"feature volume must be 4-d (N,H,W,C), got {self.data.shape}")
        n, h, w, c = self.data.shape
        if n < 2:
            raise ValidationError(f"feature volume needs at least 2 frames, got {n}")
        if min(h, w, c) < 1:
            raise ValidationError(f"feature volume dims must be >= 1, got {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValidationError("feature volume contains non-finite values")

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]


@dataclass
class SubjectMask:
    """Boolean latent-resolution mask, True = inside the subject."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=bool)
        if self.values.ndim != 2:
            raise ValidationError(f"mask must be 2-d, got {self.values.shape}")
        if self.height < 1 or self.width < 1:
            raise ValidationError("mask must be at least 1x1")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class FrameSequence:
    """Video frames as one uint8 array of shape (N, H, W, 3)."""

    frames: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.uint8)
        if self.frames.ndim != 4 or self.frames.shape[3] != 3:
            raise ValidationError(f"frames must have shape (N,H,W,3), got {self.frames.shape}")
        if self.frames.shape[0] < 2:
            raise ValidationError("a frame sequence needs at least 2 frames")

    @property
    def count(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


# ---------------------------------------------------------------------------
# Flow files
# ---------------------------------------------------------------------------


def read_flow(path) -> FlowField:
    """Read a flow file, validating magic, payload size and finiteness."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != FLOW_MAGIC:
        raise FormatError(f"{path}: bad flow magic {raw[:4]!r}, expected {FLOW_MAGIC!r}")
    if len(raw) < 12:
        raise CorruptionError(f"{path}: flow header truncated ({len(raw)} bytes)")
    width, height = np.frombuffer(raw, dtype="<i4", count=2, offset=4)
    if width < 1 or height < 1:
        raise ValidationError(f"{path}: invalid flow dimensions {width}x{height}")
    expected = 12 + 8 * int(width) * int(height)
    if len(raw) != expected:
        raise CorruptionError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(int(height), int(width), 2)
    if not np.isfinite(data).all():
        raise ValidationError(f"{path}: flow payload contains non-finite values")
    return FlowField(u=data[:, :, 0].copy(), v=data[:, :, 1].copy())


def write_flow(flow: FlowField, path) -> None:
    """Write a flow file; output bytes are deterministic for equal inputs."""
    interleaved = np.empty((flow.height, flow.width, 2), dtype="<f4")
    interleaved[:, :, 0] = flow.u
    interleaved[:, :, 1] = flow.v
    header = FLOW_MAGIC + np.array([flow.width, flow.height], dtype="<i4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(interleaved.tobytes())


# ---------------------------------------------------------------------------
# Feature volumes
# ---------------------------------------------------------------------------


def read_feature_volume(path) -> FeatureVolume:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != FMAP_MAGIC:
        raise FormatError(f"{path}: bad feature-volume magic {raw[:4]!r}")
    if len(raw) < 25:
        raise CorruptionError(f"{path}: feature-volume header truncated ({len(raw)} bytes)")
    version = int(np.frombuffer(raw, dtype="<u4", count=1, offset=4)[0])
    if version != FMAP_VERSION:
        raise FormatError(f"{path}: unsupported feature-volume version {version}")
    n, h, w, c = (int(x) for x in np.frombuffer(raw, dtype="<u4", count=4, offset=8))
    normalized = bool(raw[24])
    if n == 0 or h == 0 or w == 0 or c == 0:
        raise ValidationError(f"{path}: zero dimension in header N={n} H={h} W={w} C={c}")
    expected = 25 + 4 * n * h * w * c
    if len(raw) != expected:
        raise CorruptionError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=25).reshape(n, h, w, c)
    if not np.isfinite(data).all():
        raise ValidationError(f"{path}: feature payload contains non-finite values")
    return FeatureVolume(data=data.copy(), normalized=normalized)


def write_feature_volume(vol: FeatureVolume, path) -> None:
    header = (
        FMAP_MAGIC
        + np.array([FMAP_VERSION], dtype="<u4").tobytes()
        + np.array([vol.frames, vol.height, vol.width, vol.channels], dtype="<u4").tobytes()
        + bytes([1 if vol.normalized else 0])
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(vol.data.astype("<f4", copy=False).tobytes())


# ---------------------------------------------------------------------------
# PGM / PPM
# ---------------------------------------------------------------------------


def _read_pnm_header(raw: bytes, path) -> tuple[bytes, int, int, int, int]:
    """Parse a binary PNM header; returns (kind, width, height, maxval, offset)."""
    if raw[:2] not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a binary PGM/PPM file (header {raw[:2]!r})")
    kind = raw[:2]
    fields = []
    pos = 2
    while len(fields) < 3:
        if pos >= len(raw):
            raise CorruptionError(f"{path}: header truncated")
        ch = raw[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(raw) and raw[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(raw[start:pos]))
        else:
            raise FormatError(f"{path}: unexpected byte {ch!r} in header")
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValidationError(f"{path}: zero image dimension {width}x{height}")
    if not 0 < maxval < 256:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    return kind, width, height, maxval, pos


def read_mask(path) -> SubjectMask:
    """Read a binary PGM; any nonzero pixel counts as inside the subject."""
    with open(path, "rb") as fh:
        raw = fh.read()
    kind, width, height, _, offset = _read_pnm_header(raw, path)
    if kind != b"P5":
        raise FormatError(f"{path}: expected P5 graymap, got {kind!r}")
    if len(raw) - offset < width * height:
        raise CorruptionError(f"{path}: pixel payload truncated")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=offset)
    return SubjectMask(values=pixels.reshape(height, width) != 0)


def write_mask(mask: SubjectMask, path) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P5\n{mask.width} {mask.height}\n255\n".encode())
        fh.write((mask.values.astype(np.uint8) * 255).tobytes())


def read_frame(path) -> np.ndarray:
    """Read one binary PPM frame as an (H, W, 3) uint8 array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    kind, width, height, _, offset = _read_pnm_header(raw, path)
    if kind != b"P6":
        raise FormatError(f"{path}: expected P6 pixmap, got {kind!r}")
    if len(raw) - offset < 3 * width * height:
        raise CorruptionError(f"{path}: pixel payload truncated")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=3 * width * height, offset=offset)
    return pixels.reshape(height, width, 3).copy()


def write_frame(image: np.ndarray, path) -> None:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"frame must have shape (H,W,3), got {image.shape}")
    with open(path, "wb") as fh:
        fh.write(f"P6\n{image.shape[1]} {image.shape[0]}\n255\n".encode())
        fh.write(image.tobytes())


def read_frame_sequence(paths) -> FrameSequence:
    """Read an ordered list of PPM files into one sequence."""
    frames = [read_frame(p) for p in paths]
    if len(frames) < 2:
        raise ValidationError("a frame sequence needs at least 2 frames")
    shape = frames[0].shape
    for p, f in zip(paths, frames):
        if f.shape != shape:
            raise ValidationError(f"{p}: frame shape {f.shape} differs from first frame {shape}")
    return FrameSequence(frames=np.stack(frames))


def write_frame_sequence(seq: FrameSequence, directory, pattern: str = "frame_%03d.ppm") -> list:
    """Write frames as numbered PPM files (1-based); returns the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i in range(seq.count):
        p = os.path.join(directory, pattern % (i + 1))
        write_frame(seq.frames[i], p)
        paths.append(p)
    return paths
