"""Surface textures: an RGB image laid over the surface (s, t) coordinates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..imaging import read_png


@dataclass(frozen=True, eq=False)
class Texture:
    """``image`` covers ``[s0, s0 + w * mm_per_texel] x [t0, ...]``; texel
    ``(row, col)`` sits at ``(s0 + col * mm_per_texel, t0 + row * mm_per_texel)``.
    Lookups outside the image clamp to the border."""

    image: np.ndarray = field(repr=False)
    origin: tuple[float, float] = (0.0, 0.0)
    mm_per_texel: float = 0.08

    def sample(self, st) -> np.ndarray:
        """Bilinear RGB lookup (float, 0-255) at texture coordinates ``(..., 2)``."""
        st = np.asarray(st, dtype=float)
        h, w = self.image.shape[:2]
        cx = np.clip((st[..., 0] - self.origin[0]) / self.mm_per_texel, 0, w - 1)
        cy = np.clip((st[..., 1] - self.origin[1]) / self.mm_per_texel, 0, h - 1)
        x0 = np.minimum(np.floor(cx).astype(np.int64), w - 2)
        y0 = np.minimum(np.floor(cy).astype(np.int64), h - 2)
        fx = (cx - x0)[..., None]
        fy = (cy - y0)[..., None]
        img = self.image
        top = (1 - fx) * img[y0, x0] + fx * img[y0, x0 + 1]
        bottom = (1 - fx) * img[y0 + 1, x0] + fx * img[y0 + 1, x0 + 1]
        return (1 - fy) * top + fy * bottom

    @classmethod
    def from_file(cls, path, origin=(0.0, 0.0), mm_per_texel: float = 0.08) -> Texture:
        return cls(read_png(path).astype(np.float32), tuple(origin), mm_per_texel)


def _value_noise(rng: np.random.Generator, shape, cell_texels: float) -> np.ndarray:
    """Smooth noise with features of about ``cell_texels``, zero mean, unit std."""
    gh = int(np.ceil(shape[0] / cell_texels)) + 4
    gw = int(np.ceil(shape[1] / cell_texels)) + 4
    grid = rng.standard_normal((gh, gw))
    rows = np.arange(shape[0]) / cell_texels + 1.5
    cols = np.arange(shape[1]) / cell_texels + 1.5
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    out = ndimage.map_coordinates(grid, [rr, cc], order=3, mode="nearest")
    return (out - out.mean()) / (out.std() + 1e-12)


def procedural_texture(
    seed: int,
    extent,
    mm_per_texel: float = 0.08,
    feature_sizes_mm=(6.0, 3.0, 1.5, 0.8, 0.4),
    vessel_scale_mm: float = 4.0,
) -> Texture:
    """Reddish-orange mucosa-like texture with dark vessel ridges.

    ``extent`` is ``(s_min, s_max, t_min, t_max)`` in mm. Deterministic for a
    given seed and extent.
    """
    s_min, s_max, t_min, t_max = extent
    w = int(np.ceil((s_max - s_min) / mm_per_texel)) + 2
    h = int(np.ceil((t_max - t_min) / mm_per_texel)) + 2
    rng = np.random.default_rng(seed)
    base = np.zeros((h, w))
    total = 0.0
    for size in feature_sizes_mm:
        amp = size**0.35
        base += amp * _value_noise(rng, (h, w), size / mm_per_texel)
        total += amp
    base /= total
    base = np.tanh(1.2 * base / (base.std() + 1e-12))

    vessel_field = _value_noise(rng, (h, w), vessel_scale_mm / mm_per_texel)
    vessel_width = _value_noise(rng, (h, w), 2 * vessel_scale_mm / mm_per_texel)
    vessels = np.exp(-((vessel_field / (0.08 + 0.04 * np.tanh(vessel_width))) ** 2))

    r = 165 + 60 * base - 70 * vessels
    g = 78 + 42 * base - 45 * vessels
    b = 55 + 25 * base - 25 * vessels
    img = np.clip(np.stack([r, g, b], axis=-1), 0, 255).astype(np.float32)
    return Texture(img, (float(s_min), float(t_min)), mm_per_texel)
