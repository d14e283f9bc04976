"""Camera projection, rigid motions and planar homographies.

Conventions used throughout the package:

* 3D quantities are millimetres, expressed in a right-handed camera frame
  (x right, y down, z along the optical axis).
* 2D quantities are pixels; pixel ``(col, row)`` has its centre at integer
  coordinates ``(x, y) = (col, row)``.
* Points are plain numpy arrays of shape ``(..., 3)`` or ``(..., 2)``.
* Rotations are active and follow the z-x'-z'' Euler sequence:
  ``R = Rz(theta1) @ Rx(theta2) @ Rz(theta3)`` with counterclockwise-positive
  elementary rotations. Angles are radians internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateHomography, DegenerateProjection, InvalidParams, NonPositiveDepth

_EPS_HOMOGRAPHY = 1e-12


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: focal length ``f`` and pixel pitch ``lx``/``ly`` in mm,
    principal point ``(u, v)`` and image size in pixels."""

    f: float
    lx: float
    ly: float
    u: float
    v: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.f > 0 and self.lx > 0 and self.ly > 0):
            raise InvalidParams("f, lx and ly must be positive")
        if not (0 <= self.u < self.width and 0 <= self.v < self.height):
            raise InvalidParams("principal point must lie inside the image")

    @property
    def fx(self) -> float:
        return self.f / self.lx

    @property
    def fy(self) -> float:
        return self.f / self.ly

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.u], [0.0, self.fy, self.v], [0.0, 0.0, 1.0]])

    def scaled(self, factor: float) -> CameraIntrinsics:
        """Intrinsics of the same camera resampled by ``factor`` (0.5 = half size)."""
        return CameraIntrinsics(
            f=self.f,
            lx=self.lx / factor,
            ly=self.ly / factor,
            u=(self.u + 0.5) * factor - 0.5,
            v=(self.v + 0.5) * factor - 0.5,
            width=int(round(self.width * factor)),
            height=int(round(self.height * factor)),
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("f", "lx", "ly", "u", "v", "width", "height")}

    @classmethod
    def from_dict(cls, d: dict) -> CameraIntrinsics:
        return cls(
            f=float(d["f"]),
            lx=float(d["lx"]),
            ly=float(d["ly"]),
            u=float(d["u"]),
            v=float(d["v"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_from_euler(theta1: float, theta2: float, theta3: float) -> np.ndarray:
    """Rotation matrix for z-x'-z'' Euler angles (radians)."""
    c1, s1 = math.cos(theta1), math.sin(theta1)
    c2, s2 = math.cos(theta2), math.sin(theta2)
    c3, s3 = math.cos(theta3), math.sin(theta3)
    return np.array(
        [
            [c1 * c3 - s1 * c2 * s3, -c1 * s3 - s1 * c2 * c3, s1 * s2],
            [s1 * c3 + c1 * c2 * s3, -s1 * s3 + c1 * c2 * c3, -c1 * s2],
            [s2 * s3, s2 * c3, c2],
        ]
    )


def euler_from_rotation(R: np.ndarray) -> tuple[float, float, float]:
    """Inverse of :func:`rotation_from_euler` with theta2 in [0, pi].

    At gimbal lock (theta2 = 0 or pi) only theta1 +/- theta3 is defined;
    theta3 is then set to zero.
    """
    R = np.asarray(R, dtype=float)
    sin2 = math.hypot(R[0, 2], R[1, 2])
    theta2 = math.atan2(sin2, R[2, 2])
    # theta1 +/- theta3 is read from the upper 2x2 block, which stays well
    # conditioned near gimbal lock where theta1 and theta3 alone do not.
    if R[2, 2] >= 0:
        combined = math.atan2(R[1, 0] - R[0, 1], R[0, 0] + R[1, 1])  # theta1 + theta3
    else:
        combined = math.atan2(R[1, 0] + R[0, 1], R[0, 0] - R[1, 1])  # theta1 - theta3
    if sin2 == 0.0:
        return combined, theta2, 0.0
    theta1 = math.atan2(R[0, 2], -R[1, 2])
    theta3 = combined - theta1 if R[2, 2] >= 0 else theta1 - combined
    theta3 = math.remainder(theta3, 2 * math.pi)
    return theta1, theta2, theta3


@dataclass(frozen=True)
class RigidTransform3D:
    """``p -> R p + D`` with R from z-x'-z'' Euler angles in radians."""

    theta1: float = 0.0
    theta2: float = 0.0
    theta3: float = 0.0
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "translation", tuple(float(t) for t in self.translation))

    @classmethod
    def identity(cls) -> RigidTransform3D:
        return cls()

    @classmethod
    def from_matrix(cls, R: np.ndarray, t=(0.0, 0.0, 0.0)) -> RigidTransform3D:
        theta1, theta2, theta3 = euler_from_rotation(R)
        return cls(theta1, theta2, theta3, tuple(np.asarray(t, dtype=float)))

    @classmethod
    def from_vertex(cls, vertex) -> RigidTransform3D:
        """Build from a ``[dx, dy, dz (mm), theta1, theta2, theta3 (deg)]`` vector."""
        dx, dy, dz, a1, a2, a3 = (float(x) for x in vertex)
        return cls(math.radians(a1), math.radians(a2), math.radians(a3), (dx, dy, dz))

    @cached_property
    def rotation(self) -> np.ndarray:
        return rotation_from_euler(self.theta1, self.theta2, self.theta3)

    @property
    def D(self) -> np.ndarray:
        return np.array(self.translation)

    def matrix(self) -> np.ndarray:
        """The 3x4 matrix ``[R | D]``."""
        return np.hstack([self.rotation, self.D[:, None]])

    def matrix4(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :4] = self.matrix()
        return M

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.D

    def compose(self, other: RigidTransform3D) -> RigidTransform3D:
        """``self o other``: apply ``other`` first."""
        R = self.rotation @ other.rotation
        t = self.rotation @ other.D + self.D
        return RigidTransform3D.from_matrix(R, t)

    def inverse(self) -> RigidTransform3D:
        Rt = self.rotation.T
        return RigidTransform3D.from_matrix(Rt, -Rt @ self.D)

    def as_vertex(self) -> np.ndarray:
        return np.array(
            [*self.translation, math.degrees(self.theta1), math.degrees(self.theta2), math.degrees(self.theta3)]
        )

    def to_record(self) -> dict:
        return {
            "theta1_deg": math.degrees(self.theta1),
            "theta2_deg": math.degrees(self.theta2),
            "theta3_deg": math.degrees(self.theta3),
            "dx_mm": self.translation[0],
            "dy_mm": self.translation[1],
            "dz_mm": self.translation[2],
        }

    @classmethod
    def from_record(cls, rec: dict) -> RigidTransform3D:
        return cls(
            math.radians(rec["theta1_deg"]),
            math.radians(rec["theta2_deg"]),
            math.radians(rec["theta3_deg"]),
            (rec["dx_mm"], rec["dy_mm"], rec["dz_mm"]),
        )


def apply_rigid(T: RigidTransform3D, p) -> np.ndarray:
    return T.apply(p)


def compose_rigid(A: RigidTransform3D, B: RigidTransform3D) -> RigidTransform3D:
    return A.compose(B)


def project(K: CameraIntrinsics, p) -> np.ndarray:
    """Perspective projection of camera-frame points to pixels."""
    p = np.asarray(p, dtype=float)
    z = p[..., 2]
    if np.any(z <= 0):
        raise NonPositiveDepth("cannot project a point with z <= 0")
    x = K.fx * p[..., 0] / z + K.u
    y = K.fy * p[..., 1] / z + K.v
    return np.stack([x, y], axis=-1)


@dataclass(frozen=True)
class Homography2D:
    """Projective map with coefficients ``a11..a32`` and ``a33 = 1``."""

    coeffs: tuple[float, ...] = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if len(c) != 8:
            raise InvalidParams("a homography has exactly 8 free coefficients")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def identity(cls) -> Homography2D:
        return cls()

    @classmethod
    def translation(cls, tx: float, ty: float) -> Homography2D:
        return cls((1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0))

    @classmethod
    def from_matrix(cls, M) -> Homography2D:
        M = np.asarray(M, dtype=float)
        if abs(M[2, 2]) < _EPS_HOMOGRAPHY:
            raise DegenerateHomography("cannot normalise a homography with a33 ~ 0")
        M = M / M[2, 2]
        return cls((M[0, 0], M[0, 1], M[0, 2], M[1, 0], M[1, 1], M[1, 2], M[2, 0], M[2, 1]))

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.array([*self.coeffs, 1.0]).reshape(3, 3)

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        a11, a12, a13, a21, a22, a23, a31, a32 = self.coeffs
        x, y = p[..., 0], p[..., 1]
        beta = a31 * x + a32 * y + 1.0
        if np.any(np.abs(beta) < _EPS_HOMOGRAPHY):
            raise DegenerateProjection("point maps to the line at infinity")
        return np.stack([(a11 * x + a12 * y + a13) / beta, (a21 * x + a22 * y + a23) / beta], axis=-1)

    def compose(self, other: Homography2D) -> Homography2D:
        """``self o other``: apply ``other`` first."""
        return Homography2D.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> Homography2D:
        if abs(np.linalg.det(self.matrix)) < _EPS_HOMOGRAPHY:
            raise DegenerateHomography("homography is not invertible")
        return Homography2D.from_matrix(np.linalg.inv(self.matrix))

    def to_list(self) -> list[float]:
        return list(self.coeffs)


def apply_homography(H: Homography2D, p) -> np.ndarray:
    return H.apply(p)


def image_corners(width: int, height: int) -> np.ndarray:
    """The four outer pixel-centre corners of a ``width x height`` image."""
    return np.array([[0.0, 0.0], [width - 1.0, 0.0], [width - 1.0, height - 1.0], [0.0, height - 1.0]])
