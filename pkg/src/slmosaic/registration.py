"""Rigid registration of consecutive viewpoints by mutual-information search.

A candidate rigid motion ``T`` (mapping points of viewpoint k into the
camera frame of viewpoint k-1) is turned into the homography it induces on
the laser points of viewpoint k, image k is warped onto image k-1 with that
homography and the two are compared by mutual information. Nelder-Mead
maximises the score over ``[dx, dy, dz (mm), theta1, theta2, theta3 (deg)]``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .errors import BehindCamera, InputError, InsufficientOverlap, NumericalError, RankDeficient
from .frames import Frame
from .geometry import CameraIntrinsics, Homography2D, RigidTransform3D, image_corners
from .imaging import downsample2, downsample_mask2, mi_from_histogram
from .optimize import nelder_mead_maximize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegistrationConfig:
    max_iterations: int = 200
    corner_tolerance_px: float = 0.1
    translation_step_mm: float = 0.3
    rotation_step_deg: float = 0.4
    pyramid_levels: int = 2
    min_overlap: int = 1000
    restarts: int = 1
    # corner tolerance multiplier per pyramid level; coarse evaluations are
    # cheap, so the coarse search is pushed further along flat directions
    coarse_tolerance_factor: float = 0.5
    # the simplex must also agree on MI (nats); along flat directions the
    # corners barely move while MI still changes
    score_tolerance: float = 1e-3

    @classmethod
    def from_dict(cls, d: dict | None) -> RegistrationConfig:
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown registration config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RegistrationResult:
    t3d: RigidTransform3D
    t2d: Homography2D
    final_mi: float
    iterations: int
    converged: bool
    evaluations: int = 0
    best_history: list[float] = field(default_factory=list, repr=False)

    def to_record(self) -> dict:
        return {
            **self.t3d.to_record(),
            "homography": self.t2d.to_list(),
            "final_mi": self.final_mi,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "converged": self.converged,
        }

    @classmethod
    def from_record(cls, rec: dict) -> RegistrationResult:
        return cls(
            t3d=RigidTransform3D.from_record(rec),
            t2d=Homography2D(tuple(rec["homography"])),
            final_mi=float(rec.get("final_mi", float("nan"))),
            iterations=int(rec.get("iterations", 0)),
            converged=bool(rec.get("converged", True)),
            evaluations=int(rec.get("evaluations", 0)),
        )


def initial_simplex(translation_step_mm: float = 0.3, rotation_step_deg: float = 0.4, center=None) -> np.ndarray:
    """Seven vertices: the centre plus one step along each of the six axes."""
    steps = np.array([translation_step_mm] * 3 + [rotation_step_deg] * 3)
    center = np.zeros(6) if center is None else np.asarray(center, dtype=float)
    return np.vstack([center, center + np.diag(steps)])


def induced_homography_system(T: RigidTransform3D, K: CameraIntrinsics, points3d, dots2d):
    """Design matrix ``A`` (2M x 8) and right-hand side ``c`` (2M) linking the
    homography coefficients ``a11..a32`` to the displaced laser points."""
    P = np.asarray(points3d, dtype=float).reshape(-1, 3)
    p = np.asarray(dots2d, dtype=float).reshape(-1, 2)
    moved = T.apply(P)
    z = moved[:, 2]
    if np.any(z <= 0):
        raise BehindCamera("a displaced laser point has non-positive depth")
    c1 = (K.fx * moved[:, 0] + K.u * z) / z
    c2 = (K.fy * moved[:, 1] + K.v * z) / z
    x, y = p[:, 0], p[:, 1]
    m = len(P)
    one, zero = np.ones(m), np.zeros(m)
    A = np.empty((2 * m, 8))
    A[0::2] = np.stack([x, y, one, zero, zero, zero, -c1 * x, -c1 * y], axis=1)
    A[1::2] = np.stack([zero, zero, zero, x, y, one, -c2 * x, -c2 * y], axis=1)
    c = np.empty(2 * m)
    c[0::2] = c1
    c[1::2] = c2
    return A, c


def induced_homography(T: RigidTransform3D, K: CameraIntrinsics, points3d, dots2d) -> Homography2D:
    """Least-squares homography induced by ``T`` on ``M >= 4`` laser points."""
    A, c = induced_homography_system(T, K, points3d, dots2d)
    if A.shape[0] < 8:
        raise RankDeficient(f"need at least 4 laser points, got {A.shape[0] // 2}")
    sol, _, rank, _ = np.linalg.lstsq(A, c, rcond=None)
    if rank < 8:
        raise RankDeficient(f"induced homography system has rank {rank} < 8")
    return Homography2D(tuple(sol))


def corner_displacement(H1: Homography2D, H2: Homography2D, corners: np.ndarray) -> float:
    """Mean distance between the corners mapped by ``H1`` and by ``H2``."""
    return float(np.mean(np.linalg.norm(H1.apply(corners) - H2.apply(corners), axis=1)))


class PairObjective:
    """Scores a vertex by the mutual information of the superimposed images.

    Infeasible vertices (displaced depth <= 0, rank deficiency, too little
    overlap) score ``-inf``. Results are cached per vertex.
    """

    def __init__(self, prev: Frame, cur: Frame, K: CameraIntrinsics, level: int = 0, min_overlap: int = 1000):
        if len(cur.observations) < 4:
            raise InputError(f"frame {cur.index} has fewer than 4 laser points")
        self.K = K
        self.points3d = cur.points3d
        self.dots2d = cur.dots2d
        ref, ref_valid = prev.gray, prev.dot_mask
        src, src_valid = cur.gray, cur.dot_mask
        for _ in range(level):
            ref, ref_valid = downsample2(ref), downsample_mask2(ref_valid)
            src, src_valid = downsample2(src), downsample_mask2(src_valid)
        self.ref, self.ref_valid = np.ascontiguousarray(ref), np.ascontiguousarray(ref_valid)
        self.src, self.src_valid = np.ascontiguousarray(src), np.ascontiguousarray(src_valid)
        s = 0.5**level
        self.scale = np.array([[s, 0.0, 0.5 * s - 0.5], [0.0, s, 0.5 * s - 0.5], [0.0, 0.0, 1.0]])
        self.scale_inv = np.linalg.inv(self.scale)
        self.min_overlap = min_overlap
        self.cache: dict[tuple, tuple[float, Homography2D | None]] = {}

    def homography(self, vertex) -> Homography2D:
        return induced_homography(RigidTransform3D.from_vertex(vertex), self.K, self.points3d, self.dots2d)

    def evaluate(self, vertex) -> tuple[float, Homography2D | None]:
        key = tuple(np.asarray(vertex, dtype=float).tolist())
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        try:
            H = self.homography(vertex)
            H_level = self.scale @ H.matrix @ self.scale_inv
            H_inv = np.linalg.inv(H_level)
            hist, count = _kernels.warp_joint_histogram(self.ref, self.ref_valid, self.src, self.src_valid, H_inv)
            if count < self.min_overlap:
                raise InsufficientOverlap(f"{count} overlapping pixels")
            out = (mi_from_histogram(hist.reshape(256, 256)), H)
        except (NumericalError, np.linalg.LinAlgError):
            out = (float("-inf"), None)
        self.cache[key] = out
        return out

    def __call__(self, vertex) -> float:
        return self.evaluate(vertex)[0]


def _spread_test(objective: PairObjective, corners: np.ndarray, tolerance: float, score_tolerance: float = np.inf):
    def converged(simplex, scores) -> bool:
        if not np.all(np.isfinite(scores)) or np.max(scores) - np.min(scores) >= score_tolerance:
            return False
        _, H_best = objective.evaluate(simplex[0])
        if H_best is None:
            return False
        for v in simplex[1:]:
            _, H = objective.evaluate(v)
            if H is None or corner_displacement(H, H_best, corners) >= tolerance:
                return False
        return True

    return converged


def _fix_gauge(objective: PairObjective, vertex: np.ndarray, corners: np.ndarray, tolerance: float) -> np.ndarray:
    """Split ``theta1 + theta3`` evenly when the split is unobservable.

    With a tiny ``theta2`` the difference ``theta1 - theta3`` barely moves any
    point, so the simplex drifts along it. The symmetric split is kept when
    its homography stays within ``tolerance`` px of the original at the
    image corners.
    """
    _, H = objective.evaluate(vertex)
    candidate = vertex.copy()
    candidate[3] = candidate[5] = 0.5 * (vertex[3] + vertex[5])
    try:
        H_c = objective.homography(candidate)
    except NumericalError:
        return vertex
    if H is not None and corner_displacement(H, H_c, corners) < tolerance:
        return candidate
    return vertex


def register_pair(prev: Frame, cur: Frame, K: CameraIntrinsics, config: RegistrationConfig | None = None) -> RegistrationResult:
    """Estimate the rigid motion mapping viewpoint ``cur`` into ``prev``.

    Iterates until every simplex vertex moves the corners of ``cur`` by less
    than ``corner_tolerance_px`` (mean over the four corners) relative to the
    best vertex, or ``max_iterations`` is reached. The search is then
    restarted from the best vertex with a fresh initial simplex, at most
    ``restarts`` times, as long as it keeps improving.
    """
    cfg = config or RegistrationConfig()
    corners = image_corners(*cur.size)
    center = np.zeros(6)
    iterations = evaluations = 0
    history: list[float] = []
    converged = False
    objective = None
    for level in reversed(range(max(cfg.pyramid_levels, 1))):
        objective = PairObjective(prev, cur, K, level=level, min_overlap=cfg.min_overlap)
        stop = _spread_test(
            objective, corners, cfg.corner_tolerance_px * cfg.coarse_tolerance_factor**level, cfg.score_tolerance
        )
        history = []
        best = None
        for _ in range(cfg.restarts + 1):
            simplex = initial_simplex(cfg.translation_step_mm, cfg.rotation_step_deg, center)
            res = nelder_mead_maximize(objective, simplex, stop, max_iterations=cfg.max_iterations)
            iterations += res.iterations
            evaluations += res.evaluations
            history.extend(res.best_history)
            if best is not None and not res.score > best.score:
                break
            best = res
            center = res.x
        converged = best.converged

    center = _fix_gauge(objective, center, corners, 0.1 * cfg.corner_tolerance_px)
    score, H = objective.evaluate(center)
    if H is None:
        raise NumericalError("registration ended on an infeasible vertex")
    t3d = RigidTransform3D.from_vertex(center)
    result = RegistrationResult(
        t3d=t3d,
        t2d=H,
        final_mi=score,
        iterations=iterations,
        converged=converged,
        evaluations=evaluations,
        best_history=history,
    )
    log.debug("pair %d-%d: mi=%.5f iters=%d evals=%d", prev.index, cur.index, score, iterations, evaluations)
    return result
