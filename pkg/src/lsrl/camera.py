"""Synthetic forward camera: ground-plane perspective scanline render."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .track import TrackSpec

# fixed palette and projection constants
SKY = (135, 206, 235)
HAZE = (172, 192, 203)
ROAD = (96, 96, 96)
EDGE = (240, 240, 240)
GRASS = (34, 139, 34)

HORIZON_FRAC = 0.4  # sky above this fraction of image height
CAMERA_HEIGHT = 0.5  # meters above ground plane
MAX_DEPTH = 35.0  # meters; farther ground fades to haze
EDGE_BAND = 0.15  # meters; white line half-width around the road edge

MIN_SIDE = 8


@dataclass
class Frame:
    """8-bit RGB image, stored row-major as an (H, W, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ConfigError(f"Frame expects (H, W, 3) uint8, got {px.shape} {px.dtype}")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 3

    def tobytes(self) -> bytes:
        return np.ascontiguousarray(self.pixels).tobytes()

    @classmethod
    def frombytes(cls, data: bytes, width: int, height: int) -> "Frame":
        expected = width * height * 3
        if len(data) != expected:
            raise ConfigError(f"Frame data length {len(data)}, expected {expected}")
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3).copy())


def _polyline_distance(points: np.ndarray, track: TrackSpec) -> np.ndarray:
    """Unsigned distance from each (P, 2) point to the closed centerline."""
    start = track._seg_start  # (S, 2)
    d = track._seg_dir
    length = track._seg_len
    rel = points[:, None, :] - start[None, :, :]  # (P, S, 2)
    along = np.clip(rel[:, :, 0] * d[:, 0] + rel[:, :, 1] * d[:, 1], 0.0, length)
    dx = rel[:, :, 0] - along * d[:, 0]
    dy = rel[:, :, 1] - along * d[:, 1]
    return np.sqrt((dx * dx + dy * dy).min(axis=1))


def render_camera(position, heading: float, track: TrackSpec, width: int = 64, height: int = 48) -> Frame:
    """Render the forward view from `position` looking along `heading`.

    Deterministic in (position, heading, track, resolution). Rows above the
    horizon are sky; each row below projects to a ground depth, each column
    to a lateral offset, and the hit point is classified road / lane edge /
    grass by its distance to the centerline.
    """
    if width < MIN_SIDE or height < MIN_SIDE:
        raise ConfigError(f"resolution {width}x{height} below minimum {MIN_SIDE}x{MIN_SIDE}")
    horizon = int(HORIZON_FRAC * height)
    focal = float(height)  # square pixels, vertical FOV fixed by height

    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:horizon] = SKY

    rows = np.arange(horizon, height, dtype=np.float64)
    depth = CAMERA_HEIGHT * focal / (rows - horizon + 0.5)  # (R,)
    lateral_unit = (np.arange(width, dtype=np.float64) + 0.5 - width / 2.0) / focal  # (W,)

    cos_h, sin_h = np.cos(heading), np.sin(heading)
    fwd = np.array([cos_h, sin_h])
    right = np.array([sin_h, -cos_h])

    dgrid = depth[:, None]
    ugrid = dgrid * lateral_unit[None, :]
    px = position[0] + dgrid * fwd[0] + ugrid * right[0]
    py = position[1] + dgrid * fwd[1] + ugrid * right[1]
    points = np.stack([px.ravel(), py.ravel()], axis=1)
    dist = _polyline_distance(points, track).reshape(dgrid.shape[0], width)

    ground = np.empty((dgrid.shape[0], width, 3), dtype=np.uint8)
    ground[:] = GRASS
    ground[dist < track.road_half_width] = ROAD
    ground[np.abs(dist - track.road_half_width) <= EDGE_BAND] = EDGE
    ground[np.broadcast_to(dgrid > MAX_DEPTH, dist.shape)] = HAZE
    img[horizon:] = ground
    return Frame(img)
