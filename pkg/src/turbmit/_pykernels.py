"""Pure numpy/scipy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same
signature and the same numerical contract; ``turbmit.kernels`` picks one
at import time.
"""

import numpy as np
from scipy import ndimage

BACKEND = "python"


def warp_bilinear(img, dx, dy):
    """Sample ``img`` at ``(x + dx, y + dy)`` with bilinear weights.

    Coordinates outside the image are clamped to the border (edge
    replicate). The result is not clamped in value.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = np.clip(xx + dx, 0.0, w - 1.0)
    sy = np.clip(yy + dy, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(sx).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(sy).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def box_mean(img, radius):
    """Mean over a ``(2r+1)^2`` window with edge-replicate boundaries."""
    img = np.asarray(img, dtype=np.float64)
    return ndimage.uniform_filter(img, size=2 * int(radius) + 1, mode="nearest")


def min_filter(img, radius):
    img = np.asarray(img, dtype=np.float64)
    return ndimage.minimum_filter(img, size=2 * int(radius) + 1, mode="nearest")


def max_filter(img, radius):
    img = np.asarray(img, dtype=np.float64)
    return ndimage.maximum_filter(img, size=2 * int(radius) + 1, mode="nearest")


def lk_solve(ix, iy, it, radius, eps):
    """Per-pixel damped Lucas-Kanade increment.

    Solves ``(G + eps I) u = -b`` where ``G`` holds the window means of
    ``[ix*ix, ix*iy; ix*iy, iy*iy]`` and ``b`` the window means of
    ``[ix*it, iy*it]``.
    """
    sxx = box_mean(ix * ix, radius) + eps
    sxy = box_mean(ix * iy, radius)
    syy = box_mean(iy * iy, radius) + eps
    sxt = box_mean(ix * it, radius)
    syt = box_mean(iy * it, radius)
    det = sxx * syy - sxy * sxy
    du = (-syy * sxt + sxy * syt) / det
    dv = (sxy * sxt - sxx * syt) / det
    return du, dv


def _gradients(img):
    gy, gx = np.gradient(img)
    return gx, gy


def lk_level(mov, ref, dx, dy, iterations, radius, eps, limit, smooth_radius):
    """Run ``iterations`` Lucas-Kanade updates at one pyramid level.

    ``dx`` and ``dy`` (C-contiguous float64) are refined in place. Spatial
    derivatives average the warped moving image and the reference. After
    every update the flow is box-filtered with ``smooth_radius`` (0 disables)
    and its magnitude clamped to ``limit``.
    """
    mov = np.ascontiguousarray(mov, dtype=np.float64)
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    rgx, rgy = _gradients(ref)
    for _ in range(iterations):
        warped = warp_bilinear(mov, dx, dy)
        wgx, wgy = _gradients(warped)
        du, dv = lk_solve(0.5 * (wgx + rgx), 0.5 * (wgy + rgy), warped - ref, radius, eps)
        dx += du
        dy += dv
        if smooth_radius > 0:
            dx[...] = box_mean(dx, smooth_radius)
            dy[...] = box_mean(dy, smooth_radius)
        mag = np.hypot(dx, dy)
        over = mag > limit
        if np.any(over):
            scale = limit / mag[over]
            dx[over] *= scale
            dy[over] *= scale
