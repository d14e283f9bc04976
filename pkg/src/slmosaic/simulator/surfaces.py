"""Parametric phantom surfaces with ray casting and nearest-point queries.

All surfaces live in a world frame in millimetres. ``intersect`` returns the
ray parameter of the first hit (``nan`` on a miss) for unit-direction rays;
``nearest`` returns closest surface points; ``uv`` gives the 2D texture
coordinates (mm) of surface points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from ..errors import InvalidParams

_BISECTION_STEPS = 60


def _first_root(g, t0, t1, n_samples: int):
    """First sign change of ``g`` from negative to non-negative on ``[t0, t1]``.

    ``g`` is vectorised over rays; ``t0`` / ``t1`` are per-ray bounds with
    ``g(t0) < 0``. Rays without a sign change get ``nan``.
    """
    t0 = np.asarray(t0, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    frac = np.linspace(0.0, 1.0, n_samples + 1)
    lo = np.full(t0.shape, np.nan)
    hi = np.full(t0.shape, np.nan)
    found = np.zeros(t0.shape, dtype=bool)
    prev_t = t0
    for s in frac[1:]:
        t = t0 + s * (t1 - t0)
        pos = (g(t) >= 0) & ~found
        lo[pos] = prev_t[pos]
        hi[pos] = t[pos]
        found |= pos
        prev_t = t
        if found.all():
            break
    lo_f, hi_f = lo[found], hi[found]
    sub = np.flatnonzero(found)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo_f + hi_f)
        pos = g(mid, sub) >= 0
        hi_f = np.where(pos, mid, hi_f)
        lo_f = np.where(pos, lo_f, mid)
    out = np.full(t0.shape, np.nan)
    out[found] = 0.5 * (lo_f + hi_f)
    return out


class PhantomSurface:
    kind: str = ""

    def intersect(self, origins, directions) -> np.ndarray:
        raise NotImplementedError

    def nearest(self, points) -> np.ndarray:
        raise NotImplementedError

    def uv(self, points) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def distance(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.linalg.norm(p - self.nearest(p), axis=1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params()}


def _rays(origins, directions):
    o = np.asarray(origins, dtype=float)
    d = np.asarray(directions, dtype=float)
    o, d = np.broadcast_arrays(o, d)
    return o.reshape(-1, 3), d.reshape(-1, 3), o.shape[:-1]


@dataclass(frozen=True)
class Plane(PhantomSurface):
    """The plane ``z = z0``."""

    z0: float = 30.0
    kind = "plane"

    def intersect(self, origins, directions):
        o, d, shape = _rays(origins, directions)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.z0 - o[:, 2]) / d[:, 2]
        t[~(t > 0)] = np.nan
        return t.reshape(shape)

    def nearest(self, points):
        p = np.array(points, dtype=float)
        p[..., 2] = self.z0
        return p

    def uv(self, points):
        return np.asarray(points, dtype=float)[..., :2].copy()

    def params(self):
        return {"z0": self.z0}


@dataclass(frozen=True)
class Wave(PhantomSurface):
    """``z = z0 + depth/2 * cos(2 pi x / period)``: crests nearest the camera
    at ``x = period/2 + n period``."""

    z0: float = 30.0
    period: float = 40.0
    depth: float = 20.0
    kind = "wave"

    def __post_init__(self):
        if self.period <= 0 or self.depth < 0:
            raise InvalidParams("wave period must be positive and depth non-negative")

    def height(self, x):
        return self.z0 + 0.5 * self.depth * np.cos(2 * np.pi * np.asarray(x) / self.period)

    def intersect(self, origins, directions):
        o, d, shape = _rays(origins, directions)
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = (self.z0 - 0.5 * self.depth - 1e-6 - o[:, 2]) / d[:, 2]
            t1 = (self.z0 + 0.5 * self.depth + 1e-6 - o[:, 2]) / d[:, 2]
        ok = (d[:, 2] > 0) & (o[:, 2] < self.z0 - 0.5 * self.depth)
        t0 = np.where(ok, t0, 0.0)
        t1 = np.where(ok, t1, 1.0)

        def g(t, sub=slice(None)):
            oo, dd = o[sub], d[sub]
            return oo[:, 2] + t * dd[:, 2] - self.height(oo[:, 0] + t * dd[:, 0])

        t = _first_root(g, t0, t1, 48)
        t[~ok] = np.nan
        return t.reshape(shape)

    def _nearest_x(self, x, z):
        f = lambda xs: (x - xs) ** 2 + (z - self.height(xs)) ** 2  # noqa: E731
        grid = np.linspace(x - self.period, x + self.period, 4001)
        x0 = grid[np.argmin(f(grid))]
        step = grid[1] - grid[0]
        res = minimize_scalar(f, bounds=(x0 - step, x0 + step), method="bounded", options={"xatol": 1e-12})
        return res.x

    def nearest(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        out = p.copy()
        for j, (x, _, z) in enumerate(p):
            xs = self._nearest_x(x, z)
            out[j, 0] = xs
            out[j, 2] = self.height(xs)
        return out.reshape(np.shape(points))

    def uv(self, points):
        return np.asarray(points, dtype=float)[..., :2].copy()

    def params(self):
        return {"z0": self.z0, "period": self.period, "depth": self.depth}


@dataclass(frozen=True)
class HalfCylinder(PhantomSurface):
    """Convex half cylinder with its axis parallel to x, seen from ``-z``.

    The axis passes through ``(., 0, near + radius)``; the surface point
    nearest the origin is ``(0, 0, near)``.
    """

    radius: float = 35.0
    near: float = 30.0
    kind = "half_cylinder"

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidParams("cylinder radius must be positive")

    @property
    def axis_z(self) -> float:
        return self.near + self.radius

    def intersect(self, origins, directions):
        o, d, shape = _rays(origins, directions)
        oy, oz = o[:, 1], o[:, 2] - self.axis_z
        dy, dz = d[:, 1], d[:, 2]
        a = dy * dy + dz * dz
        b = 2 * (oy * dy + oz * dz)
        c = oy * oy + oz * oz - self.radius**2
        disc = b * b - 4 * a * c
        with np.errstate(invalid="ignore", divide="ignore"):
            t = (-b - np.sqrt(disc)) / (2 * a)
        z_hit = o[:, 2] + t * d[:, 2]
        t[~((disc >= 0) & (t > 0) & (z_hit <= self.axis_z))] = np.nan
        return t.reshape(shape)

    def nearest(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        r = np.stack([p[:, 1], p[:, 2] - self.axis_z], axis=1)
        ang = np.arctan2(r[:, 0], -r[:, 1])
        ang = np.clip(ang, -np.pi / 2, np.pi / 2)
        out = p.copy()
        out[:, 1] = self.radius * np.sin(ang)
        out[:, 2] = self.axis_z - self.radius * np.cos(ang)
        return out.reshape(np.shape(points))

    def uv(self, points):
        p = np.asarray(points, dtype=float)
        ang = np.arctan2(p[..., 1], self.axis_z - p[..., 2])
        return np.stack([p[..., 0], self.radius * ang], axis=-1)

    def params(self):
        return {"radius": self.radius, "near": self.near}


@dataclass(frozen=True)
class DentedOvoid(PhantomSurface):
    """Ellipsoid (full axis lengths ``size``) centred at the origin, viewed
    from inside, with a smooth inward dent.

    The surface is star-shaped about the centre: along direction ``w`` its
    radius is the ellipsoid radius minus
    ``dent_depth * (1 - |q(w) - q_dent|^2 / dent_radius^2)^3`` inside the
    dent (zero outside), where ``q(w)`` is the ellipsoid point along ``w``.
    The bump is twice continuously differentiable and leaves the ellipsoid
    untouched farther than ``dent_radius`` from its centre.
    """

    size: tuple[float, float, float] = (110.0, 100.0, 70.0)
    dent_direction: tuple[float, float, float] = (math.cos(math.radians(35)), math.sin(math.radians(35)), 0.0)
    dent_radius: float = 12.0
    dent_depth: float = 6.0
    kind = "ovoid_dented"

    def __post_init__(self):
        if min(self.size) <= 0 or self.dent_radius <= 0 or self.dent_depth < 0:
            raise InvalidParams("ovoid dimensions must be positive")
        d = np.asarray(self.dent_direction, dtype=float)
        object.__setattr__(self, "dent_direction", tuple(d / np.linalg.norm(d)))
        object.__setattr__(self, "size", tuple(float(s) for s in self.size))

    @property
    def semi_axes(self) -> np.ndarray:
        return 0.5 * np.asarray(self.size)

    def _ellipsoid_radius(self, w):
        return 1.0 / np.sqrt(np.sum((w / self.semi_axes) ** 2, axis=-1))

    @property
    def _dent_center(self) -> np.ndarray:
        w = np.asarray(self.dent_direction)
        return self._ellipsoid_radius(w) * w

    def radius(self, w):
        """Surface radius along unit directions ``w`` (..., 3)."""
        re = self._ellipsoid_radius(w)
        q = re[..., None] * w
        rho2 = np.sum((q - self._dent_center) ** 2, axis=-1) / self.dent_radius**2
        bump = np.clip(1.0 - rho2, 0.0, None) ** 3
        return re - self.dent_depth * bump

    def signed(self, p):
        """Negative inside, positive outside (radial distance to the surface)."""
        n = np.linalg.norm(p, axis=-1)
        return n - self.radius(p / n[..., None])

    def intersect(self, origins, directions):
        o, d, shape = _rays(origins, directions)
        # hit with the undented ellipsoid: the surface is crossed before it
        a = np.asarray(self.semi_axes)
        oa, da = o / a, d / a
        qa = np.sum(da * da, axis=1)
        qb = 2 * np.sum(oa * da, axis=1)
        qc = np.sum(oa * oa, axis=1) - 1.0
        disc = qb * qb - 4 * qa * qc
        inside = (qc < 0) & (self.signed(o) < 0)
        with np.errstate(invalid="ignore"):
            t_far = (-qb + np.sqrt(disc)) / (2 * qa)
        # small margin so the far root is not lost to rounding
        t1 = np.where(inside, t_far * (1 + 1e-9) + 1e-9, 1.0)

        def g(t, sub=slice(None)):
            return self.signed(o[sub] + t[:, None] * d[sub])

        t = _first_root(g, np.zeros(len(o)), t1, 24)
        t[~inside] = np.nan
        return t.reshape(shape)

    def _surface_point(self, w):
        w = w / np.linalg.norm(w)
        return self.radius(w) * w

    def nearest(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        out = np.empty_like(p)
        for j, x in enumerate(p):
            w0 = x / np.linalg.norm(x)
            e1 = np.cross(w0, [0.0, 0.0, 1.0] if abs(w0[2]) < 0.9 else [1.0, 0.0, 0.0])
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(w0, e1)

            def f(ab):
                q = self._surface_point(w0 + ab[0] * e1 + ab[1] * e2)
                return float(np.sum((q - x) ** 2))

            res = minimize(f, np.zeros(2), method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-18, "maxiter": 4000})
            out[j] = self._surface_point(w0 + res.x[0] * e1 + res.x[1] * e2)
        return out.reshape(np.shape(points))

    def uv(self, points):
        p = np.asarray(points, dtype=float)
        r0 = float(np.mean(self.semi_axes))
        az = np.arctan2(p[..., 1], p[..., 0])
        el = np.arcsin(np.clip(p[..., 2] / np.linalg.norm(p, axis=-1), -1, 1))
        return np.stack([r0 * az, r0 * el], axis=-1)

    def params(self):
        return {
            "size": list(self.size),
            "dent_direction": list(self.dent_direction),
            "dent_radius": self.dent_radius,
            "dent_depth": self.dent_depth,
        }


_KINDS = {"plane": Plane, "wave": Wave, "half_cylinder": HalfCylinder, "ovoid_dented": DentedOvoid}


def make_phantom(kind: str, params: dict | None = None) -> PhantomSurface:
    params = dict(params or {})
    params.pop("kind", None)
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise InvalidParams(f"unknown phantom kind {kind!r}") from None
    for key in ("size", "dent_direction"):
        if key in params:
            params[key] = tuple(params[key])
    try:
        surface = cls(**params)
    except TypeError as exc:
        raise InvalidParams(str(exc)) from exc
    if isinstance(surface, Plane) and surface.z0 <= 0:
        raise InvalidParams("plane must lie in front of the origin")
    return surface
