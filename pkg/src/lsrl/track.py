"""Closed-loop track geometry and cross-track error.

A track is a closed piecewise-linear centerline (the last waypoint
connects back to the first) with a road half-width and an off-track
threshold `max_cte`. Waypoints are ordered counterclockwise, so positive
cross-track error means left of the direction of travel (track interior).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError


@dataclass
class TrackSpec:
    name: str
    centerline: np.ndarray  # (N, 2) waypoints in meters, closed implicitly
    road_half_width: float = 2.0
    max_cte: float = 2.5

    # segment cache, derived in __post_init__
    _seg_start: np.ndarray = field(init=False, repr=False)
    _seg_dir: np.ndarray = field(init=False, repr=False)
    _seg_len: np.ndarray = field(init=False, repr=False)
    _seg_s0: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.centerline, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
            raise ConfigError(f"track '{self.name}': centerline must be (N>=3, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ConfigError(f"track '{self.name}': centerline has non-finite coordinates")
        if self.road_half_width <= 0:
            raise ConfigError(f"track '{self.name}': road_half_width must be > 0")
        if self.max_cte < self.road_half_width:
            raise ConfigError(f"track '{self.name}': max_cte {self.max_cte} < road_half_width {self.road_half_width}")
        delta = np.roll(pts, -1, axis=0) - pts  # includes the closing segment
        seg_len = np.hypot(delta[:, 0], delta[:, 1])
        if np.any(seg_len < 1e-9):
            raise ConfigError(f"track '{self.name}': coincident consecutive waypoints")
        self.centerline = pts
        self._seg_start = pts
        self._seg_dir = delta / seg_len[:, None]
        self._seg_len = seg_len
        self._seg_s0 = np.concatenate(([0.0], np.cumsum(seg_len)[:-1]))

    @property
    def length(self) -> float:
        return float(self._seg_len.sum())

    def project(self, position) -> tuple[int, float, float, float]:
        """Nearest centerline point to `position`.

        Returns (segment index, distance along segment, arc length from
        waypoint 0, signed perpendicular distance).
        """
        p = np.asarray(position, dtype=np.float64)
        rel = p[None, :] - self._seg_start
        along = rel[:, 0] * self._seg_dir[:, 0] + rel[:, 1] * self._seg_dir[:, 1]
        along = np.clip(along, 0.0, self._seg_len)
        diff = rel - along[:, None] * self._seg_dir
        dist2 = diff[:, 0] ** 2 + diff[:, 1] ** 2
        i = int(np.argmin(dist2))
        cross = self._seg_dir[i, 0] * diff[i, 1] - self._seg_dir[i, 1] * diff[i, 0]
        signed = float(np.sqrt(dist2[i])) * (1.0 if cross > 0 else (-1.0 if cross < 0 else 0.0))
        return i, float(along[i]), float(self._seg_s0[i] + along[i]), signed

    def point_at(self, s: float) -> np.ndarray:
        """Centerline point at arc length `s` (wrapped to track length)."""
        s = float(s) % self.length
        i = int(np.searchsorted(self._seg_s0, s, side="right") - 1)
        return self._seg_start[i] + (s - self._seg_s0[i]) * self._seg_dir[i]

    def heading_at(self, s: float) -> float:
        s = float(s) % self.length
        i = int(np.searchsorted(self._seg_s0, s, side="right") - 1)
        return float(np.arctan2(self._seg_dir[i, 1], self._seg_dir[i, 0]))

    def to_json(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "road_half_width": self.road_half_width,
                "max_cte": self.max_cte,
                "centerline": [[float(x), float(y)] for x, y in self.centerline],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "TrackSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"track JSON is not valid JSON: {e}") from e
        for key in ("name", "road_half_width", "max_cte", "centerline"):
            if key not in doc:
                raise ConfigError(f"track JSON missing field '{key}'")
        return cls(
            name=doc["name"],
            centerline=np.asarray(doc["centerline"], dtype=np.float64),
            road_half_width=float(doc["road_half_width"]),
            max_cte=float(doc["max_cte"]),
        )

    @classmethod
    def from_file(cls, path) -> "TrackSpec":
        return cls.from_json(Path(path).read_text())


def cross_track_error(position, track: TrackSpec) -> float:
    """Signed perpendicular distance from `position` to the centerline.

    Positive when left of the travel direction of the nearest segment.
    Total over the plane and continuous near the track (nearest-point map
    is single-valued within the driving band of the built-in tracks).
    """
    return track.project(position)[3]


def _arc(center, radius, a0, a1, n) -> np.ndarray:
    ang = np.linspace(a0, a1, n, endpoint=False)
    return np.stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)], axis=1)


def _oval_track() -> TrackSpec:
    """Two 60 m straights joined by 20 m-radius semicircles, CCW."""
    bottom = np.stack([np.linspace(-30, 30, 9, endpoint=False), np.full(9, -20.0)], axis=1)
    right = _arc((30.0, 0.0), 20.0, -np.pi / 2, np.pi / 2, 14)
    top = np.stack([np.linspace(30, -30, 9, endpoint=False), np.full(9, 20.0)], axis=1)
    left = _arc((-30.0, 0.0), 20.0, np.pi / 2, 3 * np.pi / 2, 14)
    return TrackSpec("oval", np.concatenate([bottom, right, top, left]))


def _curve_track() -> TrackSpec:
    """Winding loop: radial sinusoid, gentle enough to keep corners driveable."""
    theta = np.linspace(0.0, 2 * np.pi, 72, endpoint=False)
    r = 30.0 + 7.0 * np.sin(3.0 * theta)
    pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    return TrackSpec("curves", pts)


def _speedway_track() -> TrackSpec:
    """Straight-heavy rounded rectangle, 100 x 40 m with 12 m corners."""
    hw, hh, rc = 50.0, 20.0, 12.0
    bottom = np.stack([np.linspace(-hw + rc, hw - rc, 10, endpoint=False), np.full(10, -hh)], axis=1)
    c1 = _arc((hw - rc, -hh + rc), rc, -np.pi / 2, 0.0, 6)
    right = np.stack([np.full(4, hw), np.linspace(-hh + rc, hh - rc, 4, endpoint=False)], axis=1)
    c2 = _arc((hw - rc, hh - rc), rc, 0.0, np.pi / 2, 6)
    top = np.stack([np.linspace(hw - rc, -hw + rc, 10, endpoint=False), np.full(10, hh)], axis=1)
    c3 = _arc((-hw + rc, hh - rc), rc, np.pi / 2, np.pi, 6)
    left = np.stack([np.full(4, -hw), np.linspace(hh - rc, -hh + rc, 4, endpoint=False)], axis=1)
    c4 = _arc((-hw + rc, -hh + rc), rc, np.pi, 3 * np.pi / 2, 6)
    return TrackSpec("speedway", np.concatenate([bottom, c1, right, c2, top, c3, left, c4]))


_BUILDERS = {"oval": _oval_track, "curves": _curve_track, "speedway": _speedway_track}

BUILTIN_TRACKS = tuple(_BUILDERS)


def load_track(name_or_path: str) -> TrackSpec:
    """Resolve a built-in track name or a JSON file path."""
    if name_or_path in _BUILDERS:
        return _BUILDERS[name_or_path]()
    path = Path(name_or_path)
    if path.exists():
        return TrackSpec.from_file(path)
    raise ConfigError(f"unknown track '{name_or_path}' (built-ins: {', '.join(BUILTIN_TRACKS)})")
