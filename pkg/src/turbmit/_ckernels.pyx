# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "cython"


cdef inline Py_ssize_t _clampi(Py_ssize_t i, Py_ssize_t n) nogil:
    if i < 0:
        return 0
    if i >= n:
        return n - 1
    return i


def warp_bilinear(img, dx, dy):
    cdef double[:, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef double[:, ::1] fdx = np.ascontiguousarray(dx, dtype=np.float64)
    cdef double[:, ::1] fdy = np.ascontiguousarray(dy, dtype=np.float64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    if fdx.shape[0] != h or fdx.shape[1] != w or fdy.shape[0] != h or fdy.shape[1] != w:
        raise ValueError("flow shape does not match image shape")
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t y, x, x0, y0, x1, y1
    cdef Py_ssize_t xmax = w - 2 if w >= 2 else 0
    cdef Py_ssize_t ymax = h - 2 if h >= 2 else 0
    cdef double sx, sy, fx, fy, top, bot
    with nogil:
        for y in range(h):
            for x in range(w):
                sx = x + fdx[y, x]
                sy = y + fdy[y, x]
                if sx < 0.0:
                    sx = 0.0
                elif sx > w - 1.0:
                    sx = w - 1.0
                if sy < 0.0:
                    sy = 0.0
                elif sy > h - 1.0:
                    sy = h - 1.0
                x0 = <Py_ssize_t>sx  # sx >= 0 after the clamp
                y0 = <Py_ssize_t>sy
                if x0 > xmax:
                    x0 = xmax
                if y0 > ymax:
                    y0 = ymax
                x1 = x0 + 1 if x0 + 1 < w else w - 1
                y1 = y0 + 1 if y0 + 1 < h else h - 1
                fx = sx - x0
                fy = sy - y0
                top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
                bot = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
                out[y, x] = top * (1.0 - fy) + bot * fy
    return out_arr


cdef void _box_rows(double[:, ::1] src, double[:, ::1] dst, Py_ssize_t r) noexcept nogil:
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t y, x, k
    cdef double acc, norm = 1.0 / (2 * r + 1)
    cdef double* row
    cdef double* out
    for y in range(h):
        row = &src[y, 0]
        out = &dst[y, 0]
        acc = 0.0
        for k in range(-r, r + 1):
            acc += row[_clampi(k, w)]
        out[0] = acc * norm
        if w > 2 * r + 2:
            for x in range(1, r + 1):
                acc += row[x + r] - row[0]
                out[x] = acc * norm
            for x in range(r + 1, w - r):
                acc += row[x + r] - row[x - r - 1]
                out[x] = acc * norm
            for x in range(w - r, w):
                acc += row[w - 1] - row[x - r - 1]
                out[x] = acc * norm
        else:
            for x in range(1, w):
                acc += row[_clampi(x + r, w)] - row[_clampi(x - r - 1, w)]
                out[x] = acc * norm


cdef void _box_cols(double[:, ::1] src, double[:, ::1] dst, Py_ssize_t r) noexcept nogil:
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t y, x, k, ya, yb
    cdef double norm = 1.0 / (2 * r + 1)
    for x in range(w):
        dst[0, x] = 0.0
    for k in range(-r, r + 1):
        ya = _clampi(k, h)
        for x in range(w):
            dst[0, x] += src[ya, x]
    for y in range(1, h):
        ya = _clampi(y + r, h)
        yb = _clampi(y - r - 1, h)
        for x in range(w):
            dst[y, x] = dst[y - 1, x] + src[ya, x] - src[yb, x]
    for y in range(h):
        for x in range(w):
            dst[y, x] *= norm


def box_mean(img, radius):
    cdef double[:, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t r = radius
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    tmp_arr = np.empty((h, w), dtype=np.float64)
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr
    with nogil:
        _box_rows(src, tmp, r)
        _box_cols(tmp, out, r)
    return out_arr


cdef void _herk_line(double* line, Py_ssize_t n, Py_ssize_t r, double* ext,
                     double* g, double* hbuf, double* out, bint take_max) noexcept nogil:
    # van Herk / Gil-Werman running extremum over a 2r+1 window, edge replicate
    cdef Py_ssize_t k = 2 * r + 1
    cdef Py_ssize_t m = n + 2 * r
    cdef Py_ssize_t blocks = (m + k - 1) // k
    cdef Py_ssize_t total = blocks * k
    cdef Py_ssize_t i, j, start
    cdef double v
    for i in range(total):
        j = i - r
        if j < 0:
            j = 0
        elif j >= n:
            j = n - 1
        ext[i] = line[j]
    start = 0
    while start < total:
        g[start] = ext[start]
        for i in range(start + 1, start + k):
            v = ext[i]
            if take_max:
                g[i] = v if v > g[i - 1] else g[i - 1]
            else:
                g[i] = v if v < g[i - 1] else g[i - 1]
        hbuf[start + k - 1] = ext[start + k - 1]
        for i in range(start + k - 2, start - 1, -1):
            v = ext[i]
            if take_max:
                hbuf[i] = v if v > hbuf[i + 1] else hbuf[i + 1]
            else:
                hbuf[i] = v if v < hbuf[i + 1] else hbuf[i + 1]
        start += k
    for i in range(n):
        # window in ext coordinates is [i, i + k - 1]
        if take_max:
            out[i] = hbuf[i] if hbuf[i] > g[i + k - 1] else g[i + k - 1]
        else:
            out[i] = hbuf[i] if hbuf[i] < g[i + k - 1] else g[i + k - 1]


def _extremum_filter(img, radius, bint take_max):
    src_arr = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t r = radius
    cdef Py_ssize_t h = src_arr.shape[0], w = src_arr.shape[1]
    cdef Py_ssize_t k = 2 * r + 1
    cdef Py_ssize_t nmax = h if h > w else w
    cdef Py_ssize_t buflen = ((nmax + 2 * r + k - 1) // k) * k
    ext_arr = np.empty(buflen, dtype=np.float64)
    g_arr = np.empty(buflen, dtype=np.float64)
    h_arr = np.empty(buflen, dtype=np.float64)
    line_arr = np.empty(nmax, dtype=np.float64)
    res_arr = np.empty(nmax, dtype=np.float64)
    tmp_arr = np.empty((h, w), dtype=np.float64)
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] src = src_arr
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr
    cdef double[::1] ext = ext_arr
    cdef double[::1] g = g_arr
    cdef double[::1] hb = h_arr
    cdef double[::1] line = line_arr
    cdef double[::1] res = res_arr
    cdef Py_ssize_t y, x
    with nogil:
        for y in range(h):
            _herk_line(&src[y, 0], w, r, &ext[0], &g[0], &hb[0], &tmp[y, 0], take_max)
        for x in range(w):
            for y in range(h):
                line[y] = tmp[y, x]
            _herk_line(&line[0], h, r, &ext[0], &g[0], &hb[0], &res[0], take_max)
            for y in range(h):
                out[y, x] = res[y]
    return out_arr


def min_filter(img, radius):
    return _extremum_filter(img, radius, False)


def max_filter(img, radius):
    return _extremum_filter(img, radius, True)


def lk_solve(ix, iy, it, radius, double eps):
    cdef double[:, ::1] gx = np.ascontiguousarray(ix, dtype=np.float64)
    cdef double[:, ::1] gy = np.ascontiguousarray(iy, dtype=np.float64)
    cdef double[:, ::1] gt = np.ascontiguousarray(it, dtype=np.float64)
    cdef Py_ssize_t h = gx.shape[0], w = gx.shape[1]
    cdef Py_ssize_t r = radius
    cdef Py_ssize_t y, x, c
    prod_arr = np.empty((5, h, w), dtype=np.float64)
    tmp_arr = np.empty((h, w), dtype=np.float64)
    sums_arr = np.empty((5, h, w), dtype=np.float64)
    cdef double[:, :, ::1] prod = prod_arr
    cdef double[:, :, ::1] sums = sums_arr
    cdef double[:, ::1] tmp = tmp_arr
    du_arr = np.empty((h, w), dtype=np.float64)
    dv_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] du = du_arr
    cdef double[:, ::1] dv = dv_arr
    cdef double a, b, c2, d, e, det
    with nogil:
        for y in range(h):
            for x in range(w):
                a = gx[y, x]
                b = gy[y, x]
                prod[0, y, x] = a * a
                prod[1, y, x] = a * b
                prod[2, y, x] = b * b
                prod[3, y, x] = a * gt[y, x]
                prod[4, y, x] = b * gt[y, x]
        for c in range(5):
            _box_rows(prod[c], tmp, r)
            _box_cols(tmp, sums[c], r)
        for y in range(h):
            for x in range(w):
                a = sums[0, y, x] + eps
                b = sums[1, y, x]
                c2 = sums[2, y, x] + eps
                d = sums[3, y, x]
                e = sums[4, y, x]
                det = a * c2 - b * b
                du[y, x] = (-c2 * d + b * e) / det
                dv[y, x] = (b * d - a * e) / det
    return du_arr, dv_arr


cdef void _grad(double[:, ::1] f, double[:, ::1] gx, double[:, ::1] gy) noexcept nogil:
    # numpy.gradient semantics: central differences, one-sided at the borders
    cdef Py_ssize_t h = f.shape[0], w = f.shape[1]
    cdef Py_ssize_t y, x
    for y in range(h):
        if w == 1:
            gx[y, 0] = 0.0
        else:
            gx[y, 0] = f[y, 1] - f[y, 0]
            gx[y, w - 1] = f[y, w - 1] - f[y, w - 2]
            for x in range(1, w - 1):
                gx[y, x] = 0.5 * (f[y, x + 1] - f[y, x - 1])
    for x in range(w):
        if h == 1:
            gy[0, x] = 0.0
        else:
            gy[0, x] = f[1, x] - f[0, x]
            gy[h - 1, x] = f[h - 1, x] - f[h - 2, x]
    for y in range(1, h - 1):
        for x in range(w):
            gy[y, x] = 0.5 * (f[y + 1, x] - f[y - 1, x])


cdef void _warp_into(double[:, ::1] src, double[:, ::1] fdx, double[:, ::1] fdy,
                     double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t y, x, x0, y0, x1, y1
    cdef Py_ssize_t xmax = w - 2 if w >= 2 else 0
    cdef Py_ssize_t ymax = h - 2 if h >= 2 else 0
    cdef double sx, sy, fx, fy
    for y in range(h):
        for x in range(w):
            sx = x + fdx[y, x]
            sy = y + fdy[y, x]
            if sx < 0.0:
                sx = 0.0
            elif sx > w - 1.0:
                sx = w - 1.0
            if sy < 0.0:
                sy = 0.0
            elif sy > h - 1.0:
                sy = h - 1.0
            x0 = <Py_ssize_t>sx  # sx >= 0 after the clamp
            y0 = <Py_ssize_t>sy
            if x0 > xmax:
                x0 = xmax
            if y0 > ymax:
                y0 = ymax
            x1 = x0 + 1 if x0 + 1 < w else w - 1
            y1 = y0 + 1 if y0 + 1 < h else h - 1
            fx = sx - x0
            fy = sy - y0
            out[y, x] = ((src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx) * (1.0 - fy)
                         + (src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx) * fy)


def lk_level(mov, ref, dx, dy, int iterations, radius, double eps, double limit, smooth_radius):
    cdef double[:, ::1] m = np.ascontiguousarray(mov, dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(ref, dtype=np.float64)
    cdef double[:, ::1] fdx = dx
    cdef double[:, ::1] fdy = dy
    cdef Py_ssize_t h = r.shape[0], w = r.shape[1]
    cdef Py_ssize_t rad = radius
    cdef Py_ssize_t srad = smooth_radius
    cdef Py_ssize_t y, x, c
    cdef int it
    rgx_arr = np.empty((h, w))
    rgy_arr = np.empty((h, w))
    wgx_arr = np.empty((h, w))
    wgy_arr = np.empty((h, w))
    warped_arr = np.empty((h, w))
    tmp_arr = np.empty((h, w))
    prod_arr = np.empty((5, h, w))
    sums_arr = np.empty((5, h, w))
    cdef double[:, ::1] rgx = rgx_arr
    cdef double[:, ::1] rgy = rgy_arr
    cdef double[:, ::1] wgx = wgx_arr
    cdef double[:, ::1] wgy = wgy_arr
    cdef double[:, ::1] warped = warped_arr
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, :, ::1] prod = prod_arr
    cdef double[:, :, ::1] sums = sums_arr
    cdef double a, b, c2, d, e, det, gt, mag, scale
    with nogil:
        _grad(r, rgx, rgy)
        for it in range(iterations):
            _warp_into(m, fdx, fdy, warped)
            _grad(warped, wgx, wgy)
            for y in range(h):
                for x in range(w):
                    a = 0.5 * (wgx[y, x] + rgx[y, x])
                    b = 0.5 * (wgy[y, x] + rgy[y, x])
                    gt = warped[y, x] - r[y, x]
                    prod[0, y, x] = a * a
                    prod[1, y, x] = a * b
                    prod[2, y, x] = b * b
                    prod[3, y, x] = a * gt
                    prod[4, y, x] = b * gt
            for c in range(5):
                _box_rows(prod[c], tmp, rad)
                _box_cols(tmp, sums[c], rad)
            for y in range(h):
                for x in range(w):
                    a = sums[0, y, x] + eps
                    b = sums[1, y, x]
                    c2 = sums[2, y, x] + eps
                    d = sums[3, y, x]
                    e = sums[4, y, x]
                    det = a * c2 - b * b
                    fdx[y, x] += (-c2 * d + b * e) / det
                    fdy[y, x] += (b * d - a * e) / det
            if srad > 0:
                _box_rows(fdx, tmp, srad)
                _box_cols(tmp, fdx, srad)
                _box_rows(fdy, tmp, srad)
                _box_cols(tmp, fdy, srad)
            for y in range(h):
                for x in range(w):
                    mag = sqrt(fdx[y, x] * fdx[y, x] + fdy[y, x] * fdy[y, x])
                    if mag > limit:
                        scale = limit / mag
                        fdx[y, x] *= scale
                        fdy[y, x] *= scale
