"""Depth frame representation, raster/sidecar I/O, and height-field conversion.

Depth rasters are 16-bit binary PGM (P5, maxval 65535, big-endian samples) so
they stay viewable in standard image tools.  Calibration and the frame id live
in a JSON sidecar next to the raster.  Depth values are millimeters from the
camera plane; 0 is the invalid-pixel sentinel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BoundsError,
    MalformedHeaderError,
    MissingSidecarError,
    TruncatedPayloadError,
)

INVALID_DEPTH = 0


@dataclass(frozen=True)
class Calibration:
    """Sensor geometry: camera height above the floor and ground resolution."""

    sensor_height_mm: float
    scale_mm_per_px: float

    def __post_init__(self) -> None:
        if self.sensor_height_mm <= 0 or self.scale_mm_per_px <= 0:
            raise ValueError("calibration values must be strictly positive")


@dataclass(frozen=True)
class DepthFrame:
    """A 16-bit depth raster in millimeters, row-major, 0 = invalid pixel."""

    width: int
    height: int
    depth: np.ndarray  # uint16, shape (height, width)
    frame_id: str

    def __post_init__(self) -> None:
        if self.depth.shape != (self.height, self.width):
            raise ValueError("depth array shape must be (height, width)")
        if self.depth.dtype != np.uint16:
            raise ValueError("depth array must be uint16")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DepthFrame):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.frame_id == other.frame_id
            and np.array_equal(self.depth, other.depth)
        )


@dataclass(frozen=True)
class HeightField:
    """Height above the floor in millimeters, with a validity mask."""

    width: int
    height: int
    h: np.ndarray      # float64, shape (height, width)
    valid: np.ndarray  # bool, shape (height, width)

    def __post_init__(self) -> None:
        if self.h.shape != (self.height, self.width):
            raise ValueError("height array shape must be (height, width)")
        if self.valid.shape != self.h.shape:
            raise ValueError("valid mask shape must match height array")


@dataclass
class AnnotationSet:
    """Hand-annotated pedestrian positions for one frame, integer pixels."""

    frame_id: str
    points: list[tuple[int, int]] = field(default_factory=list)

    def validate_bounds(self, width: int, height: int) -> None:
        for x, y in self.points:
            if not (0 <= x < width and 0 <= y < height):
                raise BoundsError(
                    f"annotation ({x},{y}) outside {width}x{height} frame "
                    f"{self.frame_id!r}"
                )


def _sidecar_path(raster_path: Path) -> Path:
    return raster_path.with_suffix(".json")


def load_frame(path: str | Path) -> DepthFrame:
    """Load a 16-bit P5 raster plus its JSON sidecar into a DepthFrame.

    Raises MalformedHeaderError, TruncatedPayloadError, or MissingSidecarError
    for the three distinct failure modes.
    """
    path = Path(path)
    raw = path.read_bytes()
    if not raw.startswith(b"P5\n"):
        raise MalformedHeaderError(f"{path}: not a P5 raster")
    try:
        nl1 = raw.index(b"\n", 3)
        nl2 = raw.index(b"\n", nl1 + 1)
        dims = raw[3:nl1].split()
        width, height = int(dims[0]), int(dims[1])
        maxval = int(raw[nl1 + 1:nl2])
    except (ValueError, IndexError) as exc:
        raise MalformedHeaderError(f"{path}: unparseable header") from exc
    if len(dims) != 2 or width <= 0 or height <= 0 or maxval != 65535:
        raise MalformedHeaderError(
            f"{path}: expected '<w> <h>' dims and maxval 65535"
        )
    payload = raw[nl2 + 1:]
    if len(payload) != 2 * width * height:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(payload)} bytes, "
            f"expected {2 * width * height}"
        )
    depth = np.frombuffer(payload, dtype=">u2").astype(np.uint16)
    depth = depth.reshape(height, width)

    sidecar = _sidecar_path(path)
    try:
        meta = json.loads(sidecar.read_text())
        frame_id = str(meta["frame_id"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise MissingSidecarError(f"{sidecar}: missing or invalid sidecar") from exc
    return DepthFrame(width=width, height=height, depth=depth, frame_id=frame_id)


def load_calibration(path: str | Path) -> Calibration:
    """Read the Calibration stored in a raster's JSON sidecar."""
    sidecar = _sidecar_path(Path(path))
    try:
        meta = json.loads(sidecar.read_text())
        return Calibration(
            sensor_height_mm=float(meta["sensor_height_mm"]),
            scale_mm_per_px=float(meta["scale_mm_per_px"]),
        )
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise MissingSidecarError(f"{sidecar}: missing or invalid sidecar") from exc


def save_frame(frame: DepthFrame, path: str | Path, calib: Calibration) -> None:
    """Write the raster and its sidecar; bit-exact round-trip with load_frame."""
    path = Path(path)
    header = f"P5\n{frame.width} {frame.height}\n65535\n".encode("ascii")
    payload = frame.depth.astype(">u2").tobytes()
    path.write_bytes(header + payload)
    meta = {
        "frame_id": frame.frame_id,
        "sensor_height_mm": calib.sensor_height_mm,
        "scale_mm_per_px": calib.scale_mm_per_px,
    }
    _sidecar_path(path).write_text(json.dumps(meta, sort_keys=True) + "\n")


def to_height_field(frame: DepthFrame, calib: Calibration) -> HeightField:
    """Convert sensor depth to height above the floor.

    h = sensor_height - depth for valid pixels, clamped below at 0 (sensor
    noise below the floor plane is common and harmless).  Invalid pixels stay
    invalid.
    """
    valid = frame.depth != INVALID_DEPTH
    h = calib.sensor_height_mm - frame.depth.astype(np.float64)
    np.clip(h, 0.0, None, out=h)
    h[~valid] = 0.0
    return HeightField(width=frame.width, height=frame.height, h=h, valid=valid)


def load_annotations(path: str | Path) -> dict[str, AnnotationSet]:
    """Read a JSON-lines annotation file into per-frame AnnotationSets."""
    out: dict[str, AnnotationSet] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            points = [(int(x), int(y)) for x, y in obj["points"]]
            out[obj["frame_id"]] = AnnotationSet(
                frame_id=obj["frame_id"], points=points
            )
    return out


def save_annotations(sets: list[AnnotationSet], path: str | Path) -> None:
    """Write AnnotationSets as JSON-lines, one object per frame."""
    with open(path, "w", encoding="utf-8") as f:
        for ann in sets:
            obj = {
                "frame_id": ann.frame_id,
                "points": [[int(x), int(y)] for x, y in ann.points],
            }
            f.write(json.dumps(obj) + "\n")
