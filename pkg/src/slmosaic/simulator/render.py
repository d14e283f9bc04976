"""Ray-cast rendering of textured phantoms with projected laser dots."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import OutOfView
from ..frames import Frame
from ..geometry import CameraIntrinsics, RigidTransform3D, project
from ..imaging import SegmentationConfig
from ..triangulation import ProjectorModel, camera_ray_directions, reconstruct_frame_points
from .surfaces import PhantomSurface
from .texture import Texture
from .trajectory import TrajectoryScript

DOT_COLOR = np.array([0.0, 255.0, 0.0])


@dataclass(frozen=True)
class NoiseConfig:
    dot_sigma_px: float = 1.2
    dot_noise_px: float = 0.0
    image_noise: float = 0.0
    vignetting: float = 0.0
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict | None) -> NoiseConfig:
        return cls(**dict(d or {}))


@dataclass
class GroundTruth:
    """Exact quantities behind a simulated sequence.

    ``poses[k]`` is camera-to-world; ``pairs[k-1]`` maps camera k+1 points to
    camera k; ``points[k]`` holds the exact laser points in camera frame k
    (``nan`` rows are never produced: an invisible laser raises).
    """

    poses: list[RigidTransform3D]
    points: list[np.ndarray] = field(repr=False)
    dots: list[np.ndarray] = field(repr=False)

    @property
    def pairs(self) -> list[RigidTransform3D]:
        return [a.inverse().compose(b) for a, b in zip(self.poses[:-1], self.poses[1:])]

    def to_dict(self) -> dict:
        return {
            "poses": [p.to_record() for p in self.poses],
            "pairs": [p.to_record() for p in self.pairs],
            "points": [np.asarray(p).tolist() for p in self.points],
            "dots": [np.asarray(d).tolist() for d in self.dots],
        }

    @classmethod
    def from_dict(cls, d: dict) -> GroundTruth:
        return cls(
            poses=[RigidTransform3D.from_record(r) for r in d["poses"]],
            points=[np.asarray(p, dtype=float).reshape(-1, 3) for p in d["points"]],
            dots=[np.asarray(p, dtype=float).reshape(-1, 2) for p in d["dots"]],
        )


def pixel_rays(K: CameraIntrinsics) -> np.ndarray:
    """Unit camera-frame directions through every pixel centre, ``(h, w, 3)``."""
    yy, xx = np.mgrid[0 : K.height, 0 : K.width].astype(float)
    return camera_ray_directions(K, np.stack([xx, yy], axis=-1))


def cast(surface: PhantomSurface, pose: RigidTransform3D, directions_cam) -> np.ndarray:
    """World points hit by camera rays (``nan`` where the ray misses)."""
    d = np.asarray(directions_cam, dtype=float)
    d_world = d.reshape(-1, 3) @ pose.rotation.T
    origin = np.asarray(pose.translation, dtype=float)
    t = surface.intersect(origin[None], d_world)
    return (origin + t[:, None] * d_world).reshape(d.shape)


def laser_points(surface: PhantomSurface, pose: RigidTransform3D, projector: ProjectorModel) -> np.ndarray:
    """Exact laser points in the camera frame; raises ``OutOfView`` on a miss."""
    o_world = pose.apply(projector.origins)
    d_world = projector.directions @ pose.rotation.T
    t = surface.intersect(o_world, d_world)
    if not np.all(np.isfinite(t)):
        missed = np.flatnonzero(~np.isfinite(t)).tolist()
        raise OutOfView(f"laser rays {missed} miss the surface")
    hits = o_world + t[:, None] * d_world
    return pose.inverse().apply(hits)


def splat_dots(image: np.ndarray, centers, sigma: float, cutoff: float = 0.02) -> np.ndarray:
    """Alpha-composite pure-green Gaussian spots onto a float RGB image."""
    out = image.copy()
    h, w = out.shape[:2]
    radius = sigma * np.sqrt(-2 * np.log(cutoff))
    for cx, cy in np.asarray(centers, dtype=float):
        x0, x1 = max(int(np.floor(cx - radius)), 0), min(int(np.ceil(cx + radius)), w - 1)
        y0, y1 = max(int(np.floor(cy - radius)), 0), min(int(np.ceil(cy + radius)), h - 1)
        if x0 > x1 or y0 > y1:
            continue
        yy, xx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        alpha = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2))
        alpha[alpha < cutoff] = 0.0
        patch = out[y0 : y1 + 1, x0 : x1 + 1]
        out[y0 : y1 + 1, x0 : x1 + 1] = (1 - alpha[..., None]) * patch + alpha[..., None] * DOT_COLOR
    return out


def render_frame(
    index: int,
    surface: PhantomSurface,
    texture: Texture,
    pose: RigidTransform3D,
    K: CameraIntrinsics,
    projector: ProjectorModel,
    noise: NoiseConfig = NoiseConfig(),
    rays: np.ndarray | None = None,
    segmentation: SegmentationConfig | None = None,
):
    """Render one viewpoint; returns ``(frame, exact_points, exact_dots)``."""
    rays = pixel_rays(K) if rays is None else rays
    rng = np.random.default_rng([noise.seed, index])
    hits = cast(surface, pose, rays)
    missed = ~np.isfinite(hits[..., 0])
    rgb = texture.sample(surface.uv(np.where(missed[..., None], 0.0, hits)))
    rgb[missed] = 0.0
    if noise.vignetting > 0:
        r2 = ((np.arange(K.width) - K.u) ** 2)[None, :] + ((np.arange(K.height) - K.v) ** 2)[:, None]
        rgb *= (1 - noise.vignetting * r2 / (K.u**2 + K.v**2))[..., None]

    points = laser_points(surface, pose, projector)
    dots = project(K, points)
    rgb = splat_dots(rgb, dots, noise.dot_sigma_px)
    if noise.image_noise > 0:
        rgb = rgb + rng.normal(0.0, noise.image_noise, rgb.shape)
    image = np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)

    measured = dots + (rng.normal(0.0, noise.dot_noise_px, dots.shape) if noise.dot_noise_px > 0 else 0.0)
    observations = reconstruct_frame_points(K, projector, list(measured))
    frame = Frame.from_image(index, image, observations, segmentation)
    return frame, points, dots


def simulate_sequence(
    surface: PhantomSurface,
    texture: Texture,
    trajectory: TrajectoryScript,
    K: CameraIntrinsics,
    projector: ProjectorModel,
    noise: NoiseConfig = NoiseConfig(),
    segmentation: SegmentationConfig | None = None,
) -> tuple[list[Frame], GroundTruth]:
    """Render every pose of ``trajectory``. Frames are numbered from 1."""
    rays = pixel_rays(K)
    frames, points, dots = [], [], []
    for k, pose in enumerate(trajectory.poses, start=1):
        frame, p, d = render_frame(k, surface, texture, pose, K, projector, noise, rays, segmentation)
        frames.append(frame)
        points.append(p)
        dots.append(d)
    return frames, GroundTruth(list(trajectory.poses), points, dots)


def texture_extent(surface: PhantomSurface, poses, K: CameraIntrinsics, margin_mm: float = 3.0, grid: int = 17):
    """Bounding box ``(s0, s1, t0, t1)`` of the texture coordinates seen along ``poses``."""
    xs = np.linspace(0, K.width - 1, grid)
    ys = np.linspace(0, K.height - 1, grid)
    px = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    rays = camera_ray_directions(K, px)
    uv = []
    for pose in poses:
        hits = cast(surface, pose, rays)
        hits = hits[np.isfinite(hits[:, 0])]
        if len(hits):
            uv.append(surface.uv(hits))
    if not uv:
        raise OutOfView("the trajectory never sees the surface")
    uv = np.concatenate(uv)
    lo, hi = uv.min(axis=0) - margin_mm, uv.max(axis=0) + margin_mm
    return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])
