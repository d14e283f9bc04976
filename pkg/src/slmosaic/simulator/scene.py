"""Scene descriptions: a JSON-able dict that fully determines a simulation.

Example::

    {
      "phantom": {"kind": "plane", "z0": 30},
      "texture": {"seed": 7, "mm_per_texel": 0.08},
      "camera": {"scale": 0.5},
      "projector": {"baseline_mm": 3.0},
      "trajectory": {"kind": "constant_translation", "n_frames": 100,
                     "step_mm": [0.255, 0.15, 0.045]},
      "noise": {"dot_noise_px": 0.0, "image_noise": 0.0, "seed": 0}
    }

``camera`` is either a full intrinsics record or ``{"scale": s}`` applied
to the default 768 x 576 camera. Trajectory kinds: ``constant_translation``,
``arc``, ``wall_scan`` and ``waypoints`` (a list of pose records).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParams
from ..geometry import CameraIntrinsics, RigidTransform3D
from ..triangulation import ProjectorModel
from .render import NoiseConfig, texture_extent
from .surfaces import PhantomSurface, make_phantom
from .texture import Texture, procedural_texture
from .trajectory import TrajectoryScript, arc, constant_translation, look_from, orbit_increment, wall_scan

DEFAULT_CAMERA = CameraIntrinsics(f=2.0, lx=0.0025, ly=0.0025, u=383.5, v=287.5, width=768, height=576)


@dataclass
class Scene:
    surface: PhantomSurface
    texture: Texture
    trajectory: TrajectoryScript
    camera: CameraIntrinsics
    projector: ProjectorModel
    noise: NoiseConfig


def camera_from_dict(d: dict | None) -> CameraIntrinsics:
    d = dict(d or {})
    if set(d) <= {"scale"}:
        scale = float(d.get("scale", 1.0))
        return DEFAULT_CAMERA if scale == 1.0 else DEFAULT_CAMERA.scaled(scale)
    return CameraIntrinsics.from_dict(d)


def _pose(d) -> RigidTransform3D:
    if d is None:
        return RigidTransform3D.identity()
    if "position" in d:
        return look_from(d["position"], d["x_axis"], d["z_axis"])
    return RigidTransform3D.from_record(d)


def build_trajectory(d: dict, surface: PhantomSurface) -> TrajectoryScript:
    d = dict(d)
    kind = d.pop("kind", None)
    start = _pose(d.pop("start", None))
    try:
        if kind == "constant_translation":
            return constant_translation(int(d["n_frames"]), d["step_mm"], start)
        if kind == "arc":
            return arc(int(d["n_frames"]), float(d["angle_deg"]), float(d["pivot_depth_mm"]), start)
        if kind == "wall_scan":
            return wall_scan(surface, int(d.pop("n_frames")), start, **d)
        if kind == "waypoints":
            return TrajectoryScript(tuple(RigidTransform3D.from_record(r) for r in d["poses"]))
    except (KeyError, TypeError) as exc:
        raise InvalidParams(f"bad {kind} trajectory: {exc}") from exc
    raise InvalidParams(f"unknown trajectory kind {kind!r}")


def build_scene(spec: dict) -> Scene:
    try:
        phantom = dict(spec["phantom"])
        traj_spec = spec["trajectory"]
    except KeyError as exc:
        raise InvalidParams(f"scene is missing {exc}") from None
    surface = make_phantom(phantom.pop("kind", None), phantom)
    trajectory = build_trajectory(traj_spec, surface)
    camera = camera_from_dict(spec.get("camera"))
    projector = ProjectorModel.cone(**spec.get("projector", {}))

    tex = dict(spec.get("texture", {}))
    mm_per_texel = float(tex.get("mm_per_texel", 0.08))
    if "file" in tex:
        texture = Texture.from_file(tex["file"], tex.get("origin", (0.0, 0.0)), mm_per_texel)
    else:
        extent = texture_extent(surface, trajectory.poses, camera)
        # snap to the texel grid so the texture does not depend on tiny pose changes
        extent = tuple(float(math.floor(e) if i % 2 == 0 else math.ceil(e)) for i, e in enumerate(extent))
        texture = procedural_texture(int(tex.get("seed", 0)), extent, mm_per_texel)
    try:
        noise = NoiseConfig.from_dict(spec.get("noise"))
    except TypeError as exc:
        raise InvalidParams(f"bad noise config: {exc}") from exc
    return Scene(surface, texture, trajectory, camera, projector, noise)


def _ovoid_start() -> dict:
    # inside the ovoid, 30 mm from the +x wall, optical axis along +x and
    # image x axis along world z, so orbiting about camera x sweeps azimuth
    return {"position": [25.0, 0.0, 0.0], "x_axis": [0.0, 0.0, 1.0], "z_axis": [1.0, 0.0, 0.0]}


def preset(name: str, scale: float = 1.0, seed: int = 0) -> dict:
    """Scenes mirroring the phantom experiments."""
    camera = {"scale": scale}
    texture = {"seed": seed}
    noise = {"seed": seed}
    if name == "plane":
        step = 0.3 * np.array([0.85, 0.5, 0.15]) / np.linalg.norm([0.85, 0.5, 0.15])
        traj = {"kind": "constant_translation", "n_frames": 100, "step_mm": step.tolist()}
        phantom = {"kind": "plane", "z0": 30.0}
    elif name == "wave":
        # 2.5 periods of 40 mm, starting over a trough
        traj = {"kind": "constant_translation", "n_frames": 126, "step_mm": [0.8, 0.0, 0.0]}
        phantom = {"kind": "wave", "z0": 30.0, "period": 40.0, "depth": 20.0}
    elif name in ("half_cylinder", "half_cylinder_190"):
        radius = 35.0 if name == "half_cylinder" else 190.0
        angle = 0.8 if radius < 100 else 0.25
        n_frames = 31
        # centre the sweep on the cylinder crest
        start = orbit_increment(-angle * (n_frames - 1) / 2, 30.0 + radius)
        traj = {
            "kind": "arc",
            "n_frames": n_frames,
            "angle_deg": angle,
            "pivot_depth_mm": 30.0 + radius,
            "start": start.to_record(),
        }
        phantom = {"kind": "half_cylinder", "radius": radius, "near": 30.0}
    elif name == "ovoid":
        traj = {"kind": "wall_scan", "n_frames": 120, "start": _ovoid_start(), "angle_deg": 0.6, "pivot_depth_mm": -25.0}
        phantom = {"kind": "ovoid_dented"}
    else:
        raise InvalidParams(f"unknown preset {name!r}")
    return {"phantom": phantom, "texture": texture, "camera": camera, "trajectory": traj, "noise": noise}
