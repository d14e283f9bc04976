"""Images, laser-dot segmentation, homography warping and mutual information.

Images are numpy arrays: colour images are ``uint8`` of shape ``(h, w, 3)``
(RGB), gray images ``uint8`` of shape ``(h, w)`` and pixel masks ``bool`` of
shape ``(h, w)`` with ``True`` marking usable texture.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage
from skimage.color import rgb2hsv

from .errors import DotCountMismatch, InputError, InsufficientOverlap
from .geometry import Homography2D

N_BINS = 256


@dataclass(frozen=True)
class SegmentationConfig:
    hue_min_deg: float = 70.0
    hue_max_deg: float = 170.0
    min_saturation: float = 0.25
    min_value: float = 0.25
    min_area: int = 3
    dilation_px: int = 2


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_png(path, img: np.ndarray) -> None:
    """Write an 8-bit PNG with pinned encoder settings (byte-identical reruns)."""
    arr = np.asarray(img)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    if arr.dtype != np.uint8:
        raise InputError("PNG output expects uint8 or bool data")
    Image.fromarray(arr).save(Path(path), format="PNG", compress_level=6, optimize=False)


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma ``round(0.299 R + 0.587 G + 0.114 B)`` as ``uint8``."""
    rgb = np.asarray(img, dtype=np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def _disk(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius * radius


def segment_laser_dots(img: np.ndarray, expected: int | None = 8, config: SegmentationConfig | None = None):
    """Find green laser dots by hue thresholding.

    Returns ``(centroids, mask)``: an ``(n, 2)`` array of greenness-weighted
    blob centroids in pixels (raster order of the blobs) and a pixel mask
    that is ``False`` on every dot pixel dilated by ``config.dilation_px``.
    """
    cfg = config or SegmentationConfig()
    img = np.asarray(img)
    hsv = rgb2hsv(img)
    hue = hsv[..., 0] * 360.0
    green = (
        (hue >= cfg.hue_min_deg)
        & (hue <= cfg.hue_max_deg)
        & (hsv[..., 1] > cfg.min_saturation)
        & (hsv[..., 2] > cfg.min_value)
    )
    labels, n = ndimage.label(green, structure=np.ones((3, 3), dtype=bool))
    rgb = img.astype(np.float64)
    weight = np.clip(rgb[..., 1] - np.maximum(rgb[..., 0], rgb[..., 2]), 0.0, None) + 1e-9

    centroids = []
    dots = np.zeros(green.shape, dtype=bool)
    if n:
        idx = np.arange(1, n + 1)
        areas = ndimage.sum_labels(np.ones_like(weight), labels, idx)
        keep = idx[areas >= cfg.min_area]
        if keep.size:
            yy, xx = np.indices(green.shape, dtype=np.float64)
            wsum = ndimage.sum_labels(weight, labels, keep)
            cx = ndimage.sum_labels(weight * xx, labels, keep) / wsum
            cy = ndimage.sum_labels(weight * yy, labels, keep) / wsum
            centroids = np.stack([cx, cy], axis=1)
            dots = np.isin(labels, keep)
    centroids = np.asarray(centroids, dtype=float).reshape(-1, 2)

    if cfg.dilation_px > 0 and dots.any():
        dots = ndimage.binary_dilation(dots, structure=_disk(cfg.dilation_px))
    if expected is not None and len(centroids) != expected:
        warnings.warn(f"found {len(centroids)} laser dots, expected {expected}", DotCountMismatch, stacklevel=2)
    return centroids, ~dots


def _bilinear(src: np.ndarray, sx: np.ndarray, sy: np.ndarray, src_mask: np.ndarray | None):
    h, w = src.shape
    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    s = src.astype(np.float64)
    p00, p01, p10, p11 = s[y0, x0], s[y0, x1], s[y1, x0], s[y1, x1]
    val = (1.0 - fy) * ((1.0 - fx) * p00 + fx * p01) + fy * ((1.0 - fx) * p10 + fx * p11)
    if src_mask is not None:
        # neighbours with zero weight do not need to be valid
        inside &= (
            (src_mask[y0, x0] | (fx == 1.0) | (fy == 1.0))
            & (src_mask[y0, x1] | (fx == 0.0) | (fy == 1.0))
            & (src_mask[y1, x0] | (fx == 1.0) | (fy == 0.0))
            & (src_mask[y1, x1] | (fx == 0.0) | (fy == 0.0))
        )
    return val, inside


def map_grid(H_inv: np.ndarray, height: int, width: int):
    """Source coordinates of every target pixel under the 3x3 map ``H_inv``."""
    yy, xx = np.indices((height, width), dtype=np.float64)
    den = H_inv[2, 0] * xx + H_inv[2, 1] * yy + H_inv[2, 2]
    sx = (H_inv[0, 0] * xx + H_inv[0, 1] * yy + H_inv[0, 2]) / den
    sy = (H_inv[1, 0] * xx + H_inv[1, 1] * yy + H_inv[1, 2]) / den
    bad = np.abs(den) < 1e-12
    sx[bad] = -1.0
    sy[bad] = -1.0
    return sx, sy


def warp_image(src: np.ndarray, H: Homography2D, target_size, src_mask: np.ndarray | None = None):
    """Inverse-warp ``src`` by ``H`` onto a ``(width, height)`` target grid.

    Target pixel ``x`` receives ``src(H^-1 x)`` sampled bilinearly. Works on
    gray ``(h, w)`` or colour ``(h, w, c)`` images. The returned mask is
    ``True`` where the sample location lies in the source domain and, when
    ``src_mask`` is given, every interpolation neighbour with non-zero
    weight is valid.
    """
    width, height = target_size
    H_inv = H.inverse().matrix
    sx, sy = map_grid(H_inv, height, width)
    src = np.asarray(src)
    if src.ndim == 2:
        val, valid = _bilinear(src, sx, sy, src_mask)
        out = np.clip(np.floor(val + 0.5), 0, 255)
    else:
        chans = []
        valid = None
        for c in range(src.shape[2]):
            val, valid = _bilinear(src[..., c], sx, sy, src_mask)
            chans.append(np.clip(np.floor(val + 0.5), 0, 255))
        out = np.stack(chans, axis=-1)
    out = np.where(valid[..., None] if out.ndim == 3 else valid, out, 0)
    return out.astype(np.uint8), valid


def joint_histogram(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """256x256 counts of gray-level pairs ``(a, b)`` over the masked pixels."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if mask is not None:
        a = a[mask]
        b = b[mask]
    return np.bincount((a * N_BINS + b).ravel(), minlength=N_BINS * N_BINS).reshape(N_BINS, N_BINS)


def _plogp_sum(counts: np.ndarray, total: float) -> float:
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log(p)))


def mi_from_histogram(hist: np.ndarray) -> float:
    """H(a) + H(b) - H_J(a, b) in nats, with 0 log 0 = 0."""
    total = float(hist.sum())
    h_a = _plogp_sum(hist.sum(axis=1), total)
    h_b = _plogp_sum(hist.sum(axis=0), total)
    h_j = _plogp_sum(hist.ravel(), total)
    return h_a + h_b - h_j


def entropy(img: np.ndarray, mask: np.ndarray | None = None) -> float:
    vals = np.asarray(img, dtype=np.int64)
    if mask is not None:
        vals = vals[mask]
    counts = np.bincount(vals.ravel(), minlength=N_BINS)
    return _plogp_sum(counts, float(counts.sum()))


def mutual_information(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None, min_overlap: int = 1000) -> float:
    """Mutual information (nats) of two gray images over the masked overlap."""
    if mask is None:
        mask = np.ones(np.shape(a), dtype=bool)
    n = int(np.count_nonzero(mask))
    if n < min_overlap:
        raise InsufficientOverlap(f"{n} overlapping pixels < {min_overlap}")
    return mi_from_histogram(joint_histogram(a, b, mask))


def downsample2(img: np.ndarray) -> np.ndarray:
    """2x2 block mean of a gray image, rounded to uint8."""
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    a = img[:h, :w].astype(np.float64)
    m = 0.25 * (a[0::2, 0::2] + a[0::2, 1::2] + a[1::2, 0::2] + a[1::2, 1::2])
    return np.floor(m + 0.5).astype(np.uint8)


def downsample_mask2(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape[0] // 2 * 2, mask.shape[1] // 2 * 2
    m = mask[:h, :w]
    return m[0::2, 0::2] & m[0::2, 1::2] & m[1::2, 0::2] & m[1::2, 1::2]
