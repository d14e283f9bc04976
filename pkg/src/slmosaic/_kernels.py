"""Compiled inner loop for registration: warp + joint histogram in one pass.

Produces exactly the histogram that ``imaging.warp_image`` followed by
``imaging.joint_histogram`` would, without materialising the warped image.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def warp_joint_histogram(ref, ref_valid, src, src_valid, h_inv):
    height, width = ref.shape
    sh, sw = src.shape
    hist = np.zeros(256 * 256, dtype=np.int32)
    count = 0
    for y in range(height):
        # numerators and denominator advance linearly along a row
        nx = h_inv[0, 1] * y + h_inv[0, 2]
        ny = h_inv[1, 1] * y + h_inv[1, 2]
        nd = h_inv[2, 1] * y + h_inv[2, 2]
        for x in range(width):
            if not ref_valid[y, x]:
                continue
            den = h_inv[2, 0] * x + nd
            if abs(den) < 1e-12:
                continue
            sx = (h_inv[0, 0] * x + nx) / den
            sy = (h_inv[1, 0] * x + ny) / den
            if not (0.0 <= sx <= sw - 1 and 0.0 <= sy <= sh - 1):
                continue
            # truncation is floor here since the coordinates are non-negative
            x0 = min(int(sx), sw - 2)
            y0 = min(int(sy), sh - 2)
            x1 = x0 + 1
            y1 = y0 + 1
            fx = sx - x0
            fy = sy - y0
            # neighbours with zero weight do not need to be valid
            if not (
                (src_valid[y0, x0] or (fx == 1.0 or fy == 1.0))
                and (src_valid[y0, x1] or (fx == 0.0 or fy == 1.0))
                and (src_valid[y1, x0] or (fx == 1.0 or fy == 0.0))
                and (src_valid[y1, x1] or (fx == 0.0 or fy == 0.0))
            ):
                continue
            p00 = float(src[y0, x0])
            p01 = float(src[y0, x1])
            p10 = float(src[y1, x0])
            p11 = float(src[y1, x1])
            val = (1.0 - fy) * ((1.0 - fx) * p00 + fx * p01) + fy * ((1.0 - fx) * p10 + fx * p11)
            b = int(val + 0.5)
            if b > 255:
                b = 255
            hist[ref[y, x] * 256 + b] += 1
            count += 1
    return hist, count
