"""Per-viewpoint data and its on-disk layout.

A run directory holds ``frame_0001.png`` and ``frame_0001.laser.json`` for
every viewpoint. The laser file lists the matched laser observations::

    {"index": 1, "observations": [{"i": 0, "dot": [x, y], "point": [x, y, z],
                                    "gap": 0.0, "flagged": false}, ...]}
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InputError
from .imaging import SegmentationConfig, read_png, segment_laser_dots, to_gray, write_png
from .triangulation import LaserObservation

FRAME_RE = re.compile(r"frame_(\d{4,})\.png$")


@dataclass(frozen=True, eq=False)
class Frame:
    index: int
    image: np.ndarray
    observations: tuple[LaserObservation, ...]
    dot_mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        if self.dot_mask.shape != self.image.shape[:2]:
            raise InputError(f"frame {self.index}: mask and image sizes differ")

    @classmethod
    def from_image(cls, index: int, image: np.ndarray, observations, segmentation: SegmentationConfig | None = None):
        """Build a frame, deriving the dot mask by segmenting ``image``."""
        _, mask = segment_laser_dots(image, expected=None, config=segmentation)
        return cls(index, image, tuple(observations), mask)

    @cached_property
    def gray(self) -> np.ndarray:
        return to_gray(self.image)

    @property
    def points3d(self) -> np.ndarray:
        return np.array([o.point for o in self.observations], dtype=float).reshape(-1, 3)

    @property
    def dots2d(self) -> np.ndarray:
        return np.array([o.dot for o in self.observations], dtype=float).reshape(-1, 2)

    @property
    def size(self) -> tuple[int, int]:
        return self.image.shape[1], self.image.shape[0]


def frame_stem(index: int) -> str:
    return f"frame_{index:04d}"


def write_frame(directory, frame: Frame) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_png(directory / f"{frame_stem(frame.index)}.png", frame.image)
    laser = {"index": frame.index, "observations": [o.to_record() for o in frame.observations]}
    (directory / f"{frame_stem(frame.index)}.laser.json").write_text(json.dumps(laser, indent=1))


def read_laser_file(path) -> list[LaserObservation]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing laser file {path.name}")
    try:
        data = json.loads(path.read_text())
        return [LaserObservation.from_record(r) for r in data["observations"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed laser file {path.name}: {exc}") from exc


def list_frame_indices(directory) -> list[int]:
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"no such frames directory: {directory}")
    return sorted(int(m.group(1)) for p in directory.iterdir() if (m := FRAME_RE.match(p.name)))


def read_frames(directory, segmentation: SegmentationConfig | None = None) -> list[Frame]:
    directory = Path(directory)
    frames = []
    for k in list_frame_indices(directory):
        stem = frame_stem(k)
        image = read_png(directory / f"{stem}.png")
        observations = read_laser_file(directory / f"{stem}.laser.json")
        frames.append(Frame.from_image(k, image, observations, segmentation))
    if not frames:
        raise InputError(f"no frames found in {directory}")
    return frames
