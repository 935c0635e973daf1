"""Network building blocks on top of diffcore.

Every block registers named parameter tensors in a ParamStore at
construction and is a plain callable over Tensors afterwards.  Residual
pairs use parameter-free zero-padded channel skips, so each pair costs
exactly two convolutions.
"""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc


class ParamStore:
    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.params: dict[str, dc.Tensor] = {}

    def add(self, name: str, array: np.ndarray) -> dc.Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = dc.parameter(np.ascontiguousarray(array, dtype=self.dtype), name=name)
        self.params[name] = t
        return t


def _he_conv(rng, cout, cin, kh, kw):
    std = np.sqrt(2.0 / (cin * kh * kw))
    return rng.normal(0.0, std, size=(cout, cin, kh, kw))


def _glorot(rng, nin, nout):
    lim = np.sqrt(6.0 / (nin + nout))
    return rng.uniform(-lim, lim, size=(nin, nout))


class Conv:
    """3x3 (or 1x1) same-padding convolution with per-channel bias."""

    def __init__(self, store: ParamStore, name: str, cin: int, cout: int,
                 rng, k: int = 3):
        self.k = k
        self.pad = k // 2
        self.w = store.add(f"{name}.w", _he_conv(rng, cout, cin, k, k))
        self.b = store.add(f"{name}.b", np.zeros(cout))

    def __call__(self, x):
        return dc.add_bias(dc.conv2d(x, self.w, stride=1, pad=self.pad), self.b)


class Linear:
    def __init__(self, store: ParamStore, name: str, nin: int, nout: int,
                 rng, zero_init: bool = False):
        w = np.zeros((nin, nout)) if zero_init else _glorot(rng, nin, nout)
        self.w = store.add(f"{name}.w", w)
        self.b = store.add(f"{name}.b", np.zeros(nout))

    def __call__(self, x):
        return dc.add_bias(dc.matmul(x, self.w), self.b)


def _match_channels(x, cout: int):
    """Parameter-free skip: zero-pad when channels grow, slice when they
    shrink."""
    b, c, h, w = x.shape
    if c == cout:
        return x
    if c > cout:
        return dc.slice_axis(x, 1, 0, cout)
    zeros = dc.constant(np.zeros((b, cout - c, h, w), dtype=x.dtype))
    return dc.concat([x, zeros], 1)


class ResidualPair:
    """conv-relu-conv plus a zero-padded identity skip, then relu."""

    def __init__(self, store: ParamStore, name: str, cin: int, cout: int, rng):
        self.conv1 = Conv(store, f"{name}.conv1", cin, cout, rng)
        self.conv2 = Conv(store, f"{name}.conv2", cout, cout, rng)
        self.cout = cout

    def __call__(self, x):
        y = dc.relu(self.conv1(x))
        y = self.conv2(y)
        return dc.relu(dc.add(y, _match_channels(x, self.cout)))


class LSTM:
    """Single-direction LSTM, gates i,f,g,o, forget bias 1, no peepholes,
    no clipping, no projection."""

    def __init__(self, store: ParamStore, name: str, nin: int, hidden: int, rng):
        self.h = hidden
        self.wx = store.add(f"{name}.wx", _glorot(rng, nin, 4 * hidden))
        self.wh = store.add(f"{name}.wh", _glorot(rng, hidden, 4 * hidden))
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0
        self.b = store.add(f"{name}.b", b)

    def __call__(self, xs):
        b, t_len, nin = xs.shape
        hsz = self.h
        # input projection for all steps in one GEMM; the loop only carries
        # the recurrent part
        zx = dc.add_bias(dc.matmul(dc.reshape(xs, (b * t_len, nin)), self.wx), self.b)
        zx = dc.reshape(zx, (b, t_len, 4 * hsz))
        h = dc.constant(np.zeros((b, hsz), dtype=xs.dtype))
        c = dc.constant(np.zeros((b, hsz), dtype=xs.dtype))
        outs = []
        for t in range(t_len):
            zt = dc.reshape(dc.slice_axis(zx, 1, t, t + 1), (b, 4 * hsz))
            z = dc.add(zt, dc.matmul(h, self.wh))
            i = dc.sigmoid(dc.slice_axis(z, 1, 0, hsz))
            f = dc.sigmoid(dc.slice_axis(z, 1, hsz, 2 * hsz))
            g = dc.tanh(dc.slice_axis(z, 1, 2 * hsz, 3 * hsz))
            o = dc.sigmoid(dc.slice_axis(z, 1, 3 * hsz, 4 * hsz))
            c = dc.add(dc.mul(f, c), dc.mul(i, g))
            h = dc.mul(o, dc.tanh(c))
            outs.append(dc.reshape(h, (b, 1, hsz)))
        return dc.concat(outs, 1)


class BiLSTM:
    """Both directions over the same input sequence, features concatenated."""

    def __init__(self, store: ParamStore, name: str, nin: int, hidden: int, rng):
        self.fwd = LSTM(store, f"{name}.fwd", nin, hidden, rng)
        self.bwd = LSTM(store, f"{name}.bwd", nin, hidden, rng)

    def __call__(self, xs):
        a = self.fwd(xs)
        b = dc.reverse_axis(self.bwd(dc.reverse_axis(xs, 1)), 1)
        return dc.concat([a, b], 2)


def features_to_columns(x):
    """(B,C,R,W) -> (B,W,C*R) column sequence, x increasing."""
    b, c, r, w = x.shape
    return dc.reshape(dc.permute(x, (0, 3, 1, 2)), (b, w, c * r))


def columns_to_features(x, rows: int):
    """(B,W,F) -> (B,F/rows,rows,W); exact inverse of features_to_columns."""
    b, w, f = x.shape
    if f % rows:
        raise ValueError("feature width not divisible by row count")
    return dc.permute(dc.reshape(x, (b, w, f // rows, rows)), (0, 2, 3, 1))
