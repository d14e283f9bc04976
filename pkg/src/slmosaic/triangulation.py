"""Laser-point reconstruction from fixed projector rays and camera rays."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, MatchingFailure, ParallelRays
from .geometry import CameraIntrinsics, project

DEFAULT_GAP_THRESHOLD_MM = 2.0


@dataclass(frozen=True)
class Ray3D:
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if not n > 0:
            raise InputError("ray direction must be non-zero")
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "direction", tuple(float(x) for x in d / n))

    def point_at(self, t):
        return np.asarray(self.origin) + np.multiply.outer(t, np.asarray(self.direction))


@dataclass(frozen=True)
class ProjectorModel:
    """Laser rays expressed in the camera frame; identical for every frame."""

    rays: tuple[Ray3D, ...]

    @property
    def M(self) -> int:
        return len(self.rays)

    @property
    def origins(self) -> np.ndarray:
        return np.array([r.origin for r in self.rays])

    @property
    def directions(self) -> np.ndarray:
        return np.array([r.direction for r in self.rays])

    @classmethod
    def cone(
        cls,
        n_rays: int = 8,
        baseline_mm: float = 3.0,
        baseline_angle: float = math.pi / 16,
        aim_depth_mm: float = 30.0,
        aim_radius_mm: float = 9.0,
    ) -> ProjectorModel:
        """Rays from a projector centre offset by ``baseline_mm`` in the image
        plane, passing through a circle of radius ``aim_radius_mm`` centred on
        the optical axis at depth ``aim_depth_mm``.

        The baseline angle is chosen off the pattern's symmetry axes so that
        every ray has its own epipolar line.
        """
        origin = baseline_mm * np.array([math.cos(baseline_angle), math.sin(baseline_angle), 0.0])
        rays = []
        for i in range(n_rays):
            phi = 2 * math.pi * i / n_rays
            target = np.array([aim_radius_mm * math.cos(phi), aim_radius_mm * math.sin(phi), aim_depth_mm])
            rays.append(Ray3D(tuple(origin), tuple(target - origin)))
        return cls(tuple(rays))

    def to_records(self) -> list[dict]:
        return [
            dict(zip(("ox", "oy", "oz"), r.origin)) | dict(zip(("dx", "dy", "dz"), r.direction)) for r in self.rays
        ]

    @classmethod
    def from_records(cls, records) -> ProjectorModel:
        return cls(
            tuple(Ray3D((r["ox"], r["oy"], r["oz"]), (r["dx"], r["dy"], r["dz"])) for r in records)
        )


@dataclass(frozen=True)
class LaserObservation:
    index: int
    dot: tuple[float, float]
    point: tuple[float, float, float]
    gap: float
    flagged: bool = False

    def to_record(self) -> dict:
        return {"i": self.index, "dot": list(self.dot), "point": list(self.point), "gap": self.gap, "flagged": self.flagged}

    @classmethod
    def from_record(cls, rec: dict) -> LaserObservation:
        return cls(
            int(rec["i"]),
            tuple(float(x) for x in rec["dot"]),
            tuple(float(x) for x in rec["point"]),
            float(rec.get("gap", 0.0)),
            bool(rec.get("flagged", False)),
        )


def camera_ray_directions(K: CameraIntrinsics, dots) -> np.ndarray:
    """Unit directions of the camera rays through pixel positions ``(..., 2)``."""
    d = np.asarray(dots, dtype=float)
    v = np.stack([(d[..., 0] - K.u) / K.fx, (d[..., 1] - K.v) / K.fy, np.ones(d.shape[:-1])], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def camera_ray(K: CameraIntrinsics, dot) -> Ray3D:
    return Ray3D((0.0, 0.0, 0.0), tuple(camera_ray_directions(K, np.asarray(dot, dtype=float))))


def closest_points(oa, da, ob, db):
    """Closest points of two families of lines (broadcast over leading axes).

    Returns ``(pa, pb)`` with ``pa`` on line a and ``pb`` on line b.
    """
    oa, da, ob, db = (np.asarray(x, dtype=float) for x in (oa, da, ob, db))
    cross = np.linalg.norm(np.cross(da, db), axis=-1)
    if np.any(cross <= 1e-9):
        raise ParallelRays("rays are (nearly) parallel")
    w0 = oa - ob
    b = np.sum(da * db, axis=-1)
    d = np.sum(da * w0, axis=-1)
    e = np.sum(db * w0, axis=-1)
    aa = np.sum(da * da, axis=-1)
    cc = np.sum(db * db, axis=-1)
    denom = aa * cc - b * b
    s = (b * e - cc * d) / denom
    t = (aa * e - b * d) / denom
    return oa + s[..., None] * da, ob + t[..., None] * db


def intersect_rays(a: Ray3D, b: Ray3D):
    """Midpoint of the common perpendicular of two rays and its length."""
    pa, pb = closest_points(a.origin, a.direction, b.origin, b.direction)
    return (pa + pb) / 2.0, float(np.linalg.norm(pa - pb))


def epipolar_lines(K: CameraIntrinsics, proj: ProjectorModel, depths=(10.0, 60.0)) -> np.ndarray:
    """Image line ``(a, b, c)`` with ``a^2 + b^2 = 1`` swept by each projector ray."""
    lines = []
    for ray in proj.rays:
        o, d = np.asarray(ray.origin), np.asarray(ray.direction)
        ts = [(z - o[2]) / d[2] for z in depths]
        p1, p2 = project(K, o + ts[0] * d), project(K, o + ts[1] * d)
        n = np.array([p2[1] - p1[1], p1[0] - p2[0]])
        n /= np.linalg.norm(n)
        lines.append([n[0], n[1], -n @ p1])
    return np.array(lines)


def match_dots_to_rays(K: CameraIntrinsics, proj: ProjectorModel, dots, max_distance_px: float = 6.0) -> dict:
    """Assign each segmented dot to the projector ray with the nearest epipolar line.

    Dots farther than ``max_distance_px`` from every line are dropped.
    Raises :class:`MatchingFailure` when two dots claim the same ray.
    """
    dots = np.asarray(dots, dtype=float).reshape(-1, 2)
    if len(dots) == 0:
        return {}
    lines = epipolar_lines(K, proj)
    dist = np.abs(dots @ lines[:, :2].T + lines[:, 2])
    assignment = {}
    for j, row in enumerate(dist):
        i = int(np.argmin(row))
        if row[i] > max_distance_px:
            continue
        if i in assignment:
            raise MatchingFailure(f"dots {assignment[i]} and {j} both match projector ray {i}")
        assignment[i] = j
    return {i: tuple(dots[j]) for i, j in sorted(assignment.items())}


def reconstruct_frame_points(
    K: CameraIntrinsics,
    proj: ProjectorModel,
    dots,
    gap_threshold_mm: float = DEFAULT_GAP_THRESHOLD_MM,
) -> list[LaserObservation]:
    """Triangulate dots already matched to projector rays.

    ``dots`` is either a mapping ``ray index -> (x, y)`` or a sequence whose
    position is the ray index (``None`` for missing dots).
    """
    items = dots.items() if isinstance(dots, dict) else enumerate(dots)
    items = [(int(i), d) for i, d in items if d is not None]
    if not items:
        return []
    idx = np.array([i for i, _ in items])
    if np.any(idx < 0) or np.any(idx >= proj.M):
        raise MatchingFailure("dot index outside projector ray range")
    pix = np.array([d for _, d in items], dtype=float)
    cam_dirs = camera_ray_directions(K, pix)
    pa, pb = closest_points(np.zeros_like(cam_dirs), cam_dirs, proj.origins[idx], proj.directions[idx])
    mid = (pa + pb) / 2.0
    gaps = np.linalg.norm(pa - pb, axis=1)
    return [
        LaserObservation(int(i), tuple(map(float, p2)), tuple(map(float, p3)), float(g), bool(g > gap_threshold_mm))
        for i, p2, p3, g in zip(idx, pix, mid, gaps)
    ]
