"""Scripted camera trajectories.

A trajectory is a list of camera poses ``world_from_camera``. The ground
truth motion between viewpoints k-1 and k is
``inverse(pose[k-1]) o pose[k]``, which maps camera-k coordinates into
camera-(k-1) coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParams
from ..geometry import RigidTransform3D, rot_x, rot_z

FRAME_RATE_HZ = 25.0


@dataclass(frozen=True)
class TrajectoryScript:
    poses: tuple[RigidTransform3D, ...]

    def __len__(self) -> int:
        return len(self.poses)

    def pair_transforms(self) -> list[RigidTransform3D]:
        return [a.inverse().compose(b) for a, b in zip(self.poses[:-1], self.poses[1:])]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.poses)) / FRAME_RATE_HZ


def from_increments(start: RigidTransform3D, increments) -> TrajectoryScript:
    poses = [start]
    for inc in increments:
        poses.append(poses[-1].compose(inc))
    return TrajectoryScript(tuple(poses))


def constant_motion(n_frames: int, increment: RigidTransform3D, start: RigidTransform3D | None = None) -> TrajectoryScript:
    """``n_frames`` poses related by the same camera-frame increment."""
    if n_frames < 1:
        raise InvalidParams("a trajectory needs at least one frame")
    return from_increments(start or RigidTransform3D.identity(), [increment] * (n_frames - 1))


def constant_translation(n_frames: int, step_mm, start: RigidTransform3D | None = None) -> TrajectoryScript:
    return constant_motion(n_frames, RigidTransform3D(0.0, 0.0, 0.0, tuple(step_mm)), start)


def orbit_increment(angle_deg: float, pivot_depth_mm: float, roll_deg: float = 0.0) -> RigidTransform3D:
    """Rotation by ``angle_deg`` about the camera x axis through the point
    ``(0, 0, pivot_depth_mm)`` of the camera frame, followed by a roll about
    the optical axis."""
    R = rot_x(math.radians(angle_deg)) @ rot_z(math.radians(roll_deg))
    a = np.array([0.0, 0.0, pivot_depth_mm])
    return RigidTransform3D.from_matrix(R, a - R @ a)


def arc(n_frames: int, angle_deg: float, pivot_depth_mm: float, start: RigidTransform3D | None = None) -> TrajectoryScript:
    return constant_motion(n_frames, orbit_increment(angle_deg, pivot_depth_mm), start)


def wall_scan(
    surface,
    n_frames: int,
    start: RigidTransform3D,
    angle_deg: float = 0.6,
    pivot_depth_mm: float = -25.0,
    standoff_mm: float = 30.0,
    max_depth_step_mm: float = 0.25,
    roll_amplitude_deg: float = 0.3,
) -> TrajectoryScript:
    """Sweep along a wall by orbiting about a pivot behind the camera, with
    a gentle oscillating roll and an optical-axis correction that keeps the
    distance to the wall near ``standoff_mm``."""
    poses = [start]
    for k in range(1, n_frames):
        pose = poses[-1]
        origin = np.asarray(pose.translation)
        axis = pose.rotation[:, 2]
        t = float(surface.intersect(origin[None], axis[None])[0])
        dz = 0.0 if not np.isfinite(t) else float(np.clip(t - standoff_mm, -max_depth_step_mm, max_depth_step_mm))
        roll = roll_amplitude_deg * math.sin(2 * math.pi * k / 40.0)
        inc = orbit_increment(angle_deg, pivot_depth_mm, roll)
        inc = RigidTransform3D(inc.theta1, inc.theta2, inc.theta3, tuple(inc.D + [0.0, 0.0, dz]))
        poses.append(pose.compose(inc))
    return TrajectoryScript(tuple(poses))


def look_from(position, x_axis, z_axis) -> RigidTransform3D:
    """Camera pose at ``position`` with the given world-frame x and optical axes."""
    z = np.asarray(z_axis, dtype=float)
    z /= np.linalg.norm(z)
    x = np.asarray(x_axis, dtype=float)
    x = x - (x @ z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return RigidTransform3D.from_matrix(np.column_stack([x, y, z]), position)
