"""Pure-numpy implementations of the hot kernels.

`textcomp._core` (Cython) implements the same functions with the same
floating-point evaluation order, so switching backends never changes
results bitwise.  Keep the two files in sync: every expression that sums
floats must use the same association order in both.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(x, kh, kw, sh, sw, pad, ho, wo, out=None):
    """Gather conv patches from (B,C,H,W), zero-padding by `pad` on the fly.

    Returns (B, C*kh*kw, ho*wo) with column index oy*wo+ox and row index
    (c*kh+i)*kw+j.  `out`, when given, is the destination buffer.
    """
    b, c = x.shape[:2]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    # (B,C,ho,wo,kh,kw) -> (B,C,kh,kw,ho,wo)
    src = win.transpose(0, 1, 4, 5, 2, 3)
    if out is None:
        cols = np.ascontiguousarray(src)
    else:
        cols = out.reshape(src.shape)
        np.copyto(cols, src)
    return cols.reshape(b, c * kh * kw, ho * wo)


def col2im(cols, c, h, w, kh, kw, sh, sw, pad, ho, wo):
    """Scatter-add conv patches back onto a zeroed (B,C,H,W) array,
    discarding contributions that fall in the padding ring.

    Accumulation order is kernel position (i,j) outermost; _core mirrors it.
    """
    b = cols.shape[0]
    out = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols6 = cols.reshape(b, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + sh * ho : sh, j : j + sw * wo : sw] += cols6[:, :, i, j]
    if pad:
        out = np.ascontiguousarray(out[:, :, pad : pad + h, pad : pad + w])
    return out


def bilinear_forward(img, grid):
    """Sample (B,C,H,W) at continuous grid (B,Hg,Wg,2) [(x,y) order].

    Out-of-range neighbors contribute 0 (border fill).
    """
    b, c, h, w = img.shape
    x = grid[..., 0]
    y = grid[..., 1]
    x0 = np.floor(x)
    y0 = np.floor(y)
    wx = (x - x0).astype(img.dtype)
    wy = (y - y0).astype(img.dtype)
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    def gather(yy, xx):
        valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        yc = np.clip(yy, 0, h - 1)
        xc = np.clip(xx, 0, w - 1)
        # (B,C,Hg,Wg); batch index broadcast over channel axis
        bi = np.arange(b)[:, None, None]
        v = img[bi, :, yc, xc]          # (B,Hg,Wg,C)
        v = np.moveaxis(v, -1, 1)
        return np.where(valid[:, None], v, img.dtype.type(0))

    v00 = gather(y0, x0)
    v01 = gather(y0, x0 + 1)
    v10 = gather(y0 + 1, x0)
    v11 = gather(y0 + 1, x0 + 1)
    wx = wx[:, None]
    wy = wy[:, None]
    one = img.dtype.type(1)
    top = (one - wx) * v00 + wx * v01
    bot = (one - wx) * v10 + wx * v11
    return (one - wy) * top + wy * bot


def bilinear_backward(img, grid, gout):
    """Gradients of bilinear_forward w.r.t. image and grid.

    Returns (dimg (B,C,H,W), dgrid (B,Hg,Wg,2)); dgrid in the image dtype.
    """
    b, c, h, w = img.shape
    x = grid[..., 0]
    y = grid[..., 1]
    x0f = np.floor(x)
    y0f = np.floor(y)
    wx = (x - x0f).astype(img.dtype)
    wy = (y - y0f).astype(img.dtype)
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    one = img.dtype.type(1)

    bi = np.arange(b)[:, None, None]

    def gather(yy, xx):
        valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        yc = np.clip(yy, 0, h - 1)
        xc = np.clip(xx, 0, w - 1)
        v = img[bi, :, yc, xc]
        v = np.moveaxis(v, -1, 1)
        return np.where(valid[:, None], v, img.dtype.type(0)), valid

    v00, m00 = gather(y0, x0)
    v01, m01 = gather(y0, x0 + 1)
    v10, m10 = gather(y0 + 1, x0)
    v11, m11 = gather(y0 + 1, x0 + 1)

    wxb = wx[:, None]
    wyb = wy[:, None]

    # d/dgrid: piecewise-linear slopes; channel accumulation is sequential
    # so that _core (a plain loop) matches bitwise.
    du_dx = gout * ((one - wyb) * (v01 - v00) + wyb * (v11 - v10))
    du_dy = gout * ((one - wxb) * (v10 - v00) + wxb * (v11 - v01))
    dgx = du_dx[:, 0].copy()
    dgy = du_dy[:, 0].copy()
    for cc in range(1, c):
        dgx += du_dx[:, cc]
        dgy += du_dy[:, cc]
    dgrid = np.stack([dgx, dgy], axis=-1)

    # d/dimg: four corner-major scatter passes (same order as _core).
    dimg = np.zeros_like(img)
    flat = dimg.reshape(b, c, h * w)
    go = gout

    def scatter(mask, yy, xx, wgt):
        yc = np.clip(yy, 0, h - 1)
        xc = np.clip(xx, 0, w - 1)
        idx = yc * w + xc                      # (B,Hg,Wg)
        contrib = go * wgt[:, None]
        contrib = np.where(mask[:, None], contrib, img.dtype.type(0))
        bflat = contrib.reshape(b, c, -1)
        iflat = idx.reshape(b, -1)
        for bb in range(b):
            np.add.at(flat[bb], (slice(None), iflat[bb]), bflat[bb])

    scatter(m00, y0, x0, (one - wxb[:, 0]) * (one - wyb[:, 0]))
    scatter(m01, y0, x0 + 1, wxb[:, 0] * (one - wyb[:, 0]))
    scatter(m10, y0 + 1, x0, (one - wxb[:, 0]) * wyb[:, 0])
    scatter(m11, y0 + 1, x0 + 1, wxb[:, 0] * wyb[:, 0])
    return dimg, dgrid.astype(img.dtype)


def edt_sq_rows(g):
    """Second pass of the exact squared EDT.

    Given g[r,c] = squared vertical distance to the nearest set pixel in
    column c (large sentinel when the column is empty), returns
    D[r,c] = min_c' (c-c')^2 + g[r,c'].  All quantities are exact integers
    in float64, so any exact algorithm produces identical bits.
    """
    h, w = g.shape
    out = np.empty_like(g)
    cc = np.arange(w, dtype=np.float64)
    sq = (cc[:, None] - cc[None, :]) ** 2      # (c, c')
    chunk = max(1, int(4e6 // (w * w)) or 1)
    for r0 in range(0, h, chunk):
        block = g[r0 : r0 + chunk]             # (rb, c')
        # (rb, c, c') -> min over c'
        out[r0 : r0 + chunk] = np.min(block[:, None, :] + sq[None], axis=2)
    return out


NAME = "python"
