# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Mirrors textcomp._kernels_py function for function.  Floating-point
evaluation order is kept identical to the numpy fallback so the two
backends are bitwise interchangeable.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

ctypedef fused real:
    float
    double

NAME = "cython"


def im2col(real[:, :, :, ::1] x, int kh, int kw, int sh, int sw, int pad,
           int ho, int wo, out_arr=None):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1]
    cdef long h = x.shape[2], w = x.shape[3]
    if out_arr is None:
        out_arr = np.empty(
            (b, c * kh * kw, ho * wo), dtype=np.float32 if real is float else np.float64
        )
    cdef real[:, :, ::1] out = out_arr
    cdef Py_ssize_t bb, cc, i, j, oy, ox, row
    cdef long sy, sx
    with nogil:
        for bb in range(b):
            for cc in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (cc * kh + i) * kw + j
                        for oy in range(ho):
                            sy = oy * sh + i - pad
                            if sy < 0 or sy >= h:
                                for ox in range(wo):
                                    out[bb, row, oy * wo + ox] = <real>0
                                continue
                            for ox in range(wo):
                                sx = ox * sw + j - pad
                                if sx < 0 or sx >= w:
                                    out[bb, row, oy * wo + ox] = <real>0
                                else:
                                    out[bb, row, oy * wo + ox] = x[bb, cc, sy, sx]
    return out_arr


def col2im(real[:, :, ::1] cols, int c, int h, int w,
           int kh, int kw, int sh, int sw, int pad, int ho, int wo):
    cdef Py_ssize_t b = cols.shape[0]
    cdef cnp.ndarray out_arr = np.zeros(
        (b, c, h, w), dtype=np.float32 if real is float else np.float64
    )
    cdef real[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, bb, cc, oy, ox, row
    cdef long sy, sx
    # Kernel position (i,j) outermost: same accumulation order as the fallback.
    with nogil:
        for i in range(kh):
            for j in range(kw):
                for bb in range(b):
                    for cc in range(c):
                        row = (cc * kh + i) * kw + j
                        for oy in range(ho):
                            sy = oy * sh + i - pad
                            if sy < 0 or sy >= h:
                                continue
                            for ox in range(wo):
                                sx = ox * sw + j - pad
                                if sx < 0 or sx >= w:
                                    continue
                                out[bb, cc, sy, sx] += cols[bb, row, oy * wo + ox]
    return out_arr


cdef inline real _pix(real[:, :, :, ::1] img, Py_ssize_t bb, Py_ssize_t cc,
                      long yy, long xx, long h, long w) noexcept nogil:
    if yy < 0 or yy >= h or xx < 0 or xx >= w:
        return <real>0
    return img[bb, cc, yy, xx]


def bilinear_forward(real[:, :, :, ::1] img, double[:, :, :, ::1] grid):
    cdef Py_ssize_t b = img.shape[0], c = img.shape[1]
    cdef long h = img.shape[2], w = img.shape[3]
    cdef Py_ssize_t hg = grid.shape[1], wg = grid.shape[2]
    cdef cnp.ndarray out_arr = np.empty(
        (b, c, hg, wg), dtype=np.float32 if real is float else np.float64
    )
    cdef real[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t bb, cc, gy, gx
    cdef double x, y
    cdef long x0, y0
    cdef real wx, wy, one, v00, v01, v10, v11, top, bot
    one = <real>1
    with nogil:
        for bb in range(b):
            for gy in range(hg):
                for gx in range(wg):
                    x = grid[bb, gy, gx, 0]
                    y = grid[bb, gy, gx, 1]
                    x0 = <long>floor(x)
                    y0 = <long>floor(y)
                    wx = <real>(x - <double>x0)
                    wy = <real>(y - <double>y0)
                    for cc in range(c):
                        v00 = _pix(img, bb, cc, y0, x0, h, w)
                        v01 = _pix(img, bb, cc, y0, x0 + 1, h, w)
                        v10 = _pix(img, bb, cc, y0 + 1, x0, h, w)
                        v11 = _pix(img, bb, cc, y0 + 1, x0 + 1, h, w)
                        top = (one - wx) * v00 + wx * v01
                        bot = (one - wx) * v10 + wx * v11
                        out[bb, cc, gy, gx] = (one - wy) * top + wy * bot
    return out_arr


def bilinear_backward(real[:, :, :, ::1] img, double[:, :, :, ::1] grid,
                      real[:, :, :, ::1] gout):
    cdef Py_ssize_t b = img.shape[0], c = img.shape[1]
    cdef long h = img.shape[2], w = img.shape[3]
    cdef Py_ssize_t hg = grid.shape[1], wg = grid.shape[2]
    cdef object dt = np.float32 if real is float else np.float64
    cdef cnp.ndarray dimg_arr = np.zeros((b, c, h, w), dtype=dt)
    cdef cnp.ndarray dgrid_arr = np.zeros((b, hg, wg, 2), dtype=dt)
    cdef real[:, :, :, ::1] dimg = dimg_arr
    cdef real[:, :, :, ::1] dgrid = dgrid_arr
    cdef Py_ssize_t bb, cc, gy, gx, corner
    cdef double x, y
    cdef long x0, y0, yy, xx
    cdef real wx, wy, one, v00, v01, v10, v11, g, ax, ay, cw
    one = <real>1
    with nogil:
        # dgrid: per point, channels accumulated sequentially.
        for bb in range(b):
            for gy in range(hg):
                for gx in range(wg):
                    x = grid[bb, gy, gx, 0]
                    y = grid[bb, gy, gx, 1]
                    x0 = <long>floor(x)
                    y0 = <long>floor(y)
                    wx = <real>(x - <double>x0)
                    wy = <real>(y - <double>y0)
                    ax = <real>0
                    ay = <real>0
                    for cc in range(c):
                        v00 = _pix(img, bb, cc, y0, x0, h, w)
                        v01 = _pix(img, bb, cc, y0, x0 + 1, h, w)
                        v10 = _pix(img, bb, cc, y0 + 1, x0, h, w)
                        v11 = _pix(img, bb, cc, y0 + 1, x0 + 1, h, w)
                        g = gout[bb, cc, gy, gx]
                        ax = ax + g * ((one - wy) * (v01 - v00) + wy * (v11 - v10))
                        ay = ay + g * ((one - wx) * (v10 - v00) + wx * (v11 - v01))
                    dgrid[bb, gy, gx, 0] = ax
                    dgrid[bb, gy, gx, 1] = ay
        # dimg: four corner-major passes, same order as the fallback.
        for corner in range(4):
            for bb in range(b):
                for gy in range(hg):
                    for gx in range(wg):
                        x = grid[bb, gy, gx, 0]
                        y = grid[bb, gy, gx, 1]
                        x0 = <long>floor(x)
                        y0 = <long>floor(y)
                        wx = <real>(x - <double>x0)
                        wy = <real>(y - <double>y0)
                        if corner == 0:
                            yy = y0; xx = x0; cw = (one - wx) * (one - wy)
                        elif corner == 1:
                            yy = y0; xx = x0 + 1; cw = wx * (one - wy)
                        elif corner == 2:
                            yy = y0 + 1; xx = x0; cw = (one - wx) * wy
                        else:
                            yy = y0 + 1; xx = x0 + 1; cw = wx * wy
                        if yy < 0 or yy >= h or xx < 0 or xx >= w:
                            continue
                        for cc in range(c):
                            dimg[bb, cc, yy, xx] += gout[bb, cc, gy, gx] * cw
    return dimg_arr, dgrid_arr


def edt_sq_rows(double[:, ::1] g):
    """Felzenszwalb lower-envelope pass over rows; exact integer outputs."""
    cdef Py_ssize_t h = g.shape[0], w = g.shape[1]
    cdef cnp.ndarray out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef cnp.ndarray v_arr = np.zeros(w, dtype=np.int64)
    cdef cnp.ndarray z_arr = np.zeros(w + 1, dtype=np.float64)
    cdef long[::1] v = v_arr
    cdef double[::1] z = z_arr
    cdef Py_ssize_t r, q
    cdef long k
    cdef double s
    with nogil:
        for r in range(h):
            k = 0
            v[0] = 0
            z[0] = -1e300
            z[1] = 1e300
            for q in range(1, w):
                s = ((g[r, q] + q * q) - (g[r, v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
                while s <= z[k]:
                    k -= 1
                    s = ((g[r, q] + q * q) - (g[r, v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
                k += 1
                v[k] = q
                z[k] = s
                z[k + 1] = 1e300
            k = 0
            for q in range(w):
                while z[k + 1] < <double>q:
                    k += 1
                out[r, q] = (q - v[k]) * (q - v[k]) + g[r, v[k]]
    return out_arr
