"""Tensor operations with recorded local derivatives.

Binary elementwise ops require exactly equal shapes (no broadcasting; the
only scalar form is `scale`).  conv2d follows the cross-correlation
convention.  bilinear_sample fills out-of-range samples with 0.
"""

from __future__ import annotations

import numpy as np

from .. import backend
from .tensor import ShapeError, Tensor, record


def _data(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _require_same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")
    if a.dtype != b.dtype:
        raise ShapeError(f"{op}: dtype mismatch {a.dtype} vs {b.dtype}")


# ---------------------------------------------------------------- elementwise

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _require_same_shape(a.data, b.data, "add")
    return record("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _require_same_shape(a.data, b.data, "sub")
    return record("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _require_same_shape(a.data, b.data, "mul")
    ad, bd = a.data, b.data
    return record("mul", (a, b), ad * bd, lambda g: (g * bd, g * ad))


def relu(a):
    a = _as_tensor(a)
    ad = a.data
    return record("relu", (a,), np.maximum(ad, 0), lambda g: (g * (ad > 0),))


def _sigmoid_stable(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = _as_tensor(a)
    s = _sigmoid_stable(a.data)
    return record("sigmoid", (a,), s, lambda g: (g * (s * (1 - s)),))


def tanh(a):
    a = _as_tensor(a)
    t = np.tanh(a.data)
    return record("tanh", (a,), t, lambda g: (g * (1 - t * t),))


def exp(a):
    a = _as_tensor(a)
    e = np.exp(a.data)
    return record("exp", (a,), e, lambda g: (g * e,))


def scale(a, s: float):
    a = _as_tensor(a)
    s = a.dtype.type(s)
    return record("scale", (a,), a.data * s, lambda g: (g * s,))


_ELEMENTWISE = {
    "add": add, "sub": sub, "mul": mul, "relu": relu,
    "sigmoid": sigmoid, "tanh": tanh, "exp": exp, "scale": scale,
}


def elementwise(kind: str, a, b=None):
    """Dispatch by kind; binary kinds take b, `scale` takes a python float."""
    fn = _ELEMENTWISE.get(kind)
    if fn is None:
        raise ValueError(f"unknown elementwise kind {kind!r}")
    if kind in ("add", "sub", "mul", "scale"):
        return fn(a, b)
    if b is not None:
        raise ShapeError(f"{kind} is unary")
    return fn(a)


# ------------------------------------------------------------------- matmul

def matmul(a, b):
    """2-D matrix product, or stacked (…,m,k)@(…,k,n) with equal batch dims."""
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ShapeError("matmul requires >=2-D operands")
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul: inner dims {ad.shape} vs {bd.shape}")
    if ad.ndim != bd.ndim or ad.shape[:-2] != bd.shape[:-2]:
        raise ShapeError("matmul: batch dims must match exactly")
    out = np.matmul(ad, bd)

    def vjp(g):
        return (np.matmul(g, bd.swapaxes(-1, -2)),
                np.matmul(ad.swapaxes(-1, -2), g))

    return record("matmul", (a, b), out, vjp)


# -------------------------------------------------------------------- conv2d

_WORKSPACES: dict = {}


def _workspace(tag: str, shape, dtype):
    """Reused scratch buffer for strictly call-transient arrays.

    Large fresh allocations page-fault on every touch; conv's im2col and
    dcols matrices are the dominant ones and never outlive the op call,
    so they share per-(tag, shape) buffers.  Single-threaded use only.
    """
    key = (tag, shape, np.dtype(dtype).str)
    buf = _WORKSPACES.get(key)
    if buf is None:
        buf = np.empty(shape, dtype)
        _WORKSPACES[key] = buf
    return buf


def conv2d(x, k, stride: int = 1, pad: int = 0):
    """Cross-correlation of (C,H,W) or (B,C,H,W) with kernels (F,C,kh,kw).

    Output extent (H+2*pad-kh)/stride+1 must be integral; kh, kw odd.
    """
    x, k = _as_tensor(x), _as_tensor(k)
    xd, kd = x.data, k.data
    squeeze = xd.ndim == 3
    if squeeze:
        xd = xd[None]
    if xd.ndim != 4 or kd.ndim != 4:
        raise ShapeError("conv2d: expected (B,C,H,W) input and (F,C,kh,kw) kernels")
    b, c, h, w = xd.shape
    f, ck, kh, kw = kd.shape
    if ck != c:
        raise ShapeError(f"conv2d: channel mismatch {c} vs {ck}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError("conv2d: kernel extents must be odd")
    if (h + 2 * pad - kh) % stride or (w + 2 * pad - kw) % stride:
        raise ShapeError("conv2d: non-integral output extent")
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    xc = np.ascontiguousarray(xd)
    cshape = (b, c * kh * kw, ho * wo)
    cols = backend.im2col(xc, kh, kw, stride, stride, pad, ho, wo,
                          _workspace("cols", cshape, xd.dtype))
    w2 = kd.reshape(f, c * kh * kw)
    out = np.matmul(w2[None], cols).reshape(b, f, ho, wo)

    def vjp(g):
        g2 = np.ascontiguousarray(g.reshape(b, f, ho * wo))
        cols2 = backend.im2col(xc, kh, kw, stride, stride, pad, ho, wo,
                               _workspace("cols", cshape, xd.dtype))
        dw = np.matmul(g2, cols2.transpose(0, 2, 1)).sum(axis=0).reshape(kd.shape)
        dcols = _workspace("dcols", cshape, xd.dtype)
        np.matmul(w2.T[None], g2, out=dcols)
        dx = backend.col2im(dcols, c, h, w, kh, kw, stride, stride, pad, ho, wo)
        if squeeze:
            dx = dx[0]
        return (dx, dw)

    out_t = record("conv2d", (x, k), out[0] if squeeze else out, vjp)
    return out_t


# --------------------------------------------------------------- log_softmax

def log_softmax(x):
    """Row-stabilized log-softmax over the last axis."""
    x = _as_tensor(x)
    xd = x.data
    m = xd.max(axis=-1, keepdims=True)
    z = xd - m
    lse = np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
    out = z - lse

    def vjp(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return record("log_softmax", (x,), out, vjp)


# ----------------------------------------------------------- bilinear_sample

def bilinear_sample(img, grid):
    """Sample (C,H,W) or (B,C,H,W) at continuous (…,H',W',2) (x,y) coords.

    Differentiable in both the image and the grid; out-of-range samples are
    0 (border fill).
    """
    img, grid = _as_tensor(img), _as_tensor(grid)
    imd = img.data
    gd = grid.data
    squeeze = imd.ndim == 3
    if squeeze:
        imd = imd[None]
        if gd.ndim == 3:
            gd = gd[None]
    if imd.ndim != 4 or gd.ndim != 4 or gd.shape[-1] != 2:
        raise ShapeError("bilinear_sample: expected (B,C,H,W) and (B,H',W',2)")
    if gd.shape[0] != imd.shape[0]:
        raise ShapeError("bilinear_sample: batch mismatch")
    imc = np.ascontiguousarray(imd)
    g64 = np.ascontiguousarray(gd, dtype=np.float64)
    out = backend.bilinear_forward(imc, g64)

    def vjp(g):
        go = np.ascontiguousarray(g.reshape(out.shape), dtype=imc.dtype)
        dimg, dgrid = backend.bilinear_backward(imc, g64, go)
        if squeeze:
            dimg = dimg[0]
            if grid.data.ndim == 3:
                dgrid = dgrid[0]
        return (dimg, dgrid.astype(grid.dtype, copy=False))

    return record("bilinear_sample", (img, grid), out[0] if squeeze else out, vjp)


# ------------------------------------------------------- shape manipulation

def slice_axis(x, axis: int, start: int, stop: int):
    x = _as_tensor(x)
    xd = x.data
    idx = [slice(None)] * xd.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = xd[idx].copy()

    def vjp(g):
        dz = np.zeros_like(xd)
        dz[idx] = g
        return (dz,)

    return record("slice", (x,), out, vjp)


def concat(xs, axis: int):
    xs = [_as_tensor(x) for x in xs]
    sizes = [x.data.shape[axis] for x in xs]
    out = np.concatenate([x.data for x in xs], axis=axis)
    offs = np.cumsum([0] + sizes)

    def vjp(g):
        outs = []
        for i in range(len(xs)):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offs[i], offs[i + 1])
            outs.append(g[tuple(idx)])
        return tuple(outs)

    return record("concat", tuple(xs), out, vjp)


def reshape(x, shape):
    x = _as_tensor(x)
    old = x.data.shape
    out = x.data.reshape(shape)
    return record("reshape", (x,), out, lambda g: (g.reshape(old),))


def permute(x, axes):
    x = _as_tensor(x)
    inv = np.argsort(axes)
    out = np.ascontiguousarray(x.data.transpose(axes))
    return record("permute", (x,), out, lambda g: (g.transpose(inv),))


def reverse_axis(x, axis: int):
    x = _as_tensor(x)
    out = np.flip(x.data, axis=axis).copy()
    return record("reverse", (x,), out, lambda g: (np.flip(g, axis=axis),))


# ------------------------------------------------------------ up/down sample

def upsample2(x):
    """Nearest-neighbor x2 on the trailing two axes of (B,C,H,W)."""
    x = _as_tensor(x)
    xd = x.data
    if xd.ndim != 4:
        raise ShapeError("upsample2: expected (B,C,H,W)")
    out = xd.repeat(2, axis=2).repeat(2, axis=3)
    b, c, h, w = xd.shape

    def vjp(g):
        return (g.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5)),)

    return record("upsample2", (x,), out, vjp)


def avgpool2(x):
    """2x2 mean pooling with stride 2 on (B,C,H,W); extents must be even."""
    x = _as_tensor(x)
    xd = x.data
    if xd.ndim != 4:
        raise ShapeError("avgpool2: expected (B,C,H,W)")
    b, c, h, w = xd.shape
    if h % 2 or w % 2:
        raise ShapeError("avgpool2: odd extent")
    out = xd.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    quarter = xd.dtype.type(0.25)

    def vjp(g):
        return ((g * quarter).repeat(2, axis=2).repeat(2, axis=3),)

    return record("avgpool2", (x,), out, vjp)


# ------------------------------------------------------------------ reductions

def sum_all(x):
    x = _as_tensor(x)
    xd = x.data
    out = xd.sum()
    return record("sum", (x,), np.asarray(out, dtype=xd.dtype),
                  lambda g: (np.full_like(xd, g),))


def mean_all(x):
    x = _as_tensor(x)
    xd = x.data
    n = xd.dtype.type(xd.size)
    out = np.asarray(xd.mean(), dtype=xd.dtype)
    return record("mean", (x,), out, lambda g: (np.full_like(xd, g / n),))


def sumsq(x):
    """Sum of squared entries (scalar)."""
    x = _as_tensor(x)
    xd = x.data
    out = np.asarray((xd * xd).sum(), dtype=xd.dtype)
    return record("sumsq", (x,), out, lambda g: (g * 2 * xd,))


def add_bias(x, b):
    """Add a vector bias: (N,F)+(F,) along the last axis, or (B,C,H,W)+(C,)
    per channel.  This is the one sanctioned non-scalar shape mix."""
    x, b = _as_tensor(x), _as_tensor(b)
    xd, bd = x.data, b.data
    if bd.ndim != 1:
        raise ShapeError("add_bias: bias must be 1-D")
    if xd.ndim == 4:
        if bd.shape[0] != xd.shape[1]:
            raise ShapeError("add_bias: channel mismatch")
        out = xd + bd[None, :, None, None]
        vjp = lambda g: (g, g.sum(axis=(0, 2, 3)))
    elif xd.ndim >= 2:
        if bd.shape[0] != xd.shape[-1]:
            raise ShapeError("add_bias: width mismatch")
        out = xd + bd
        vjp = lambda g: (g, g.reshape(-1, bd.shape[0]).sum(axis=0))
    else:
        raise ShapeError("add_bias: expected >=2-D input")
    return record("add_bias", (x, b), out, vjp)
