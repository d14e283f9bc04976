"""Accuracy metrics against simulator ground truth.

Per-pair errors compare the estimated and true motion on the laser points
of the current viewpoint (``N`` is the number of those points). Spreads are
unbiased (n - 1) standard deviations.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import BehindCamera, EmptyPointSet, InputError
from .geometry import CameraIntrinsics, RigidTransform3D, project


def _points(points) -> np.ndarray:
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(p) == 0:
        raise EmptyPointSet("no points to evaluate on")
    return p


def epsilon_3d(T_gt: RigidTransform3D, T_est: RigidTransform3D, points) -> float:
    """Mean distance (mm) between points displaced by the two transforms."""
    p = _points(points)
    return float(np.mean(np.linalg.norm(T_gt.apply(p) - T_est.apply(p), axis=1)))


def epsilon_2d(T_gt: RigidTransform3D, T_est: RigidTransform3D, K: CameraIntrinsics, points) -> float:
    """Mean distance (px) between the projections of the displaced points."""
    p = _points(points)
    a, b = T_gt.apply(p), T_est.apply(p)
    if np.any(a[:, 2] <= 0) or np.any(b[:, 2] <= 0):
        raise BehindCamera("a displaced point is behind the camera")
    return float(np.mean(np.linalg.norm(project(K, a) - project(K, b), axis=1)))


def mean_std(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptyPointSet("no values")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def surface_error(cloud, surface) -> tuple[float, float]:
    """Mean and std of the distances from cloud points to ``surface``."""
    d = surface.distance(_points(cloud))
    return mean_std(d)


@dataclass
class TranslationStats:
    mean_norm: float
    std_norm: float
    mean_abs_angles_deg: tuple[float, float, float]


def translation_stats(transforms) -> TranslationStats:
    transforms = list(transforms)
    if not transforms:
        raise EmptyPointSet("no transforms")
    norms = [float(np.linalg.norm(t.D)) for t in transforms]
    angles = np.abs(np.degrees([[t.theta1, t.theta2, t.theta3] for t in transforms]))
    m, s = mean_std(norms)
    return TranslationStats(m, s, tuple(float(a) for a in angles.mean(axis=0)))


@dataclass
class PairError:
    k_prev: int
    k: int
    eps3d: float
    eps2d: float


@dataclass
class SequenceReport:
    name: str
    pairs: list[PairError]
    translation: TranslationStats
    surface: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict)

    @property
    def eps3d(self) -> tuple[float, float]:
        return mean_std([p.eps3d for p in self.pairs])

    @property
    def eps2d(self) -> tuple[float, float]:
        return mean_std([p.eps2d for p in self.pairs])

    def summary(self) -> dict:
        e3, e2 = self.eps3d, self.eps2d
        out = {
            "phantom": self.name,
            "n_pairs": len(self.pairs),
            "eps3d_mm": {"mean": e3[0], "std": e3[1]},
            "eps2d_px": {"mean": e2[0], "std": e2[1]},
            "translation_mm": {"mean": self.translation.mean_norm, "std": self.translation.std_norm},
            "mean_abs_angles_deg": list(self.translation.mean_abs_angles_deg),
        }
        if self.surface is not None:
            out["surface_error_mm"] = {"mean": self.surface[0], "std": self.surface[1]}
        out.update(self.extra)
        return out

    def write(self, directory) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = directory / "report.csv", directory / "report.json"
        with csv_path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["k_prev", "k", "eps3d", "eps2d"])
            writer.writeheader()
            for p in self.pairs:
                writer.writerow(asdict(p))
        json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def evaluate_sequence(name, estimated, ground_truth, frames, K, cloud=None, surface=None, cloud_to_world=None):
    """Compare ``estimated`` pair transforms with ``ground_truth`` ones.

    ``frames`` supply the laser points of each current viewpoint. When a
    cloud (in the frame of viewpoint 1) and a surface are given, the cloud
    is moved to the world by ``cloud_to_world`` (the true first pose) and
    its distance to the surface is reported.
    """
    estimated, ground_truth = list(estimated), list(ground_truth)
    if len(estimated) != len(ground_truth) or len(frames) != len(estimated) + 1:
        raise InputError(
            f"mismatched counts: {len(estimated)} estimated, {len(ground_truth)} true pairs, {len(frames)} frames"
        )
    pairs = []
    for j, (t_est, t_gt) in enumerate(zip(estimated, ground_truth)):
        cur = frames[j + 1]
        pts = cur.points3d
        pairs.append(PairError(frames[j].index, cur.index, epsilon_3d(t_gt, t_est, pts), epsilon_2d(t_gt, t_est, K, pts)))
    surf = None
    if cloud is not None and surface is not None:
        world = cloud_to_world.apply(cloud) if cloud_to_world is not None else np.asarray(cloud)
        surf = surface_error(world, surface)
    return SequenceReport(name, pairs, translation_stats(estimated), surf)
