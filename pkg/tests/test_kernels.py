"""Backend parity: the compiled core and the numpy fallback must agree
bitwise, so datasets and metrics never depend on which one is loaded."""

import numpy as np
import pytest

from textcomp import _kernels_py as kp
from textcomp import backend

kc = pytest.importorskip("textcomp._core")


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("pad,stride", [(0, 1), (1, 1), (1, 2), (2, 2)])
def test_im2col_col2im_parity(rng, dtype, pad, stride):
    x = np.ascontiguousarray(rng.normal(size=(2, 3, 10, 12)).astype(dtype))
    kh = kw = 3
    ho = (10 + 2 * pad - kh) // stride + 1
    wo = (12 + 2 * pad - kw) // stride + 1
    a = kc.im2col(x, kh, kw, stride, stride, pad, ho, wo)
    b = kp.im2col(x, kh, kw, stride, stride, pad, ho, wo)
    assert a.dtype == dtype and np.array_equal(a, b)
    ca = kc.col2im(np.ascontiguousarray(a), 3, 10, 12, kh, kw, stride, stride, pad, ho, wo)
    cb = kp.col2im(a, 3, 10, 12, kh, kw, stride, stride, pad, ho, wo)
    assert np.array_equal(ca, cb)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_bilinear_parity_including_borders(rng, dtype):
    img = np.ascontiguousarray(rng.normal(size=(2, 3, 8, 9)).astype(dtype))
    grid = np.ascontiguousarray(rng.uniform(-2, 10, size=(2, 5, 6, 2)))
    grid[0, 2, 3] = grid[0, 1, 1]     # force scatter collisions
    f_c = kc.bilinear_forward(img, grid)
    f_p = kp.bilinear_forward(img, grid)
    assert np.array_equal(f_c, f_p)
    g = np.ascontiguousarray(rng.normal(size=f_c.shape).astype(dtype))
    di_c, dg_c = kc.bilinear_backward(img, grid, g)
    di_p, dg_p = kp.bilinear_backward(img, grid, g)
    assert np.array_equal(di_c, di_p)
    assert np.array_equal(dg_c, dg_p)


def test_edt_rows_parity_and_exactness(rng):
    for _ in range(10):
        mask = rng.random((16, 16)) < 0.2
        mask[tuple(rng.integers(0, 16, 2))] = True
        cap = float((16 + 16) ** 2)
        g = np.full((16, 16), cap)
        for c in range(16):
            rows = np.where(mask[:, c])[0]
            if len(rows):
                d = np.abs(np.arange(16)[:, None] - rows[None, :]).min(1)
                g[:, c] = d.astype(np.float64) ** 2
        a = kc.edt_sq_rows(np.ascontiguousarray(g))
        b = kp.edt_sq_rows(g)
        assert np.array_equal(a, b)
        pts = np.argwhere(mask)
        rr, cc = np.mgrid[0:16, 0:16]
        brute = ((rr[..., None] - pts[:, 0]) ** 2 + (cc[..., None] - pts[:, 1]) ** 2).min(-1)
        assert np.array_equal(a, brute.astype(np.float64))


def test_backend_selection_reports_a_name():
    assert backend.backend_name() in ("cython", "python")
