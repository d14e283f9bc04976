"""Synthetic phantoms, textures, trajectories and rendering with ground truth."""

from .render import GroundTruth, NoiseConfig, render_frame, simulate_sequence
from .scene import DEFAULT_CAMERA, Scene, build_scene, preset
from .surfaces import DentedOvoid, HalfCylinder, PhantomSurface, Plane, Wave, make_phantom
from .texture import Texture, procedural_texture
from .trajectory import TrajectoryScript, arc, constant_translation, wall_scan

__all__ = [
    "DEFAULT_CAMERA",
    "DentedOvoid",
    "GroundTruth",
    "HalfCylinder",
    "NoiseConfig",
    "PhantomSurface",
    "Plane",
    "Scene",
    "Texture",
    "TrajectoryScript",
    "Wave",
    "arc",
    "build_scene",
    "constant_translation",
    "make_phantom",
    "preset",
    "procedural_texture",
    "render_frame",
    "simulate_sequence",
    "wall_scan",
]
