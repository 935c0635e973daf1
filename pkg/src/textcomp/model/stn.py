"""Iterative rectification: crop, regress corner offsets, compose, recrop.

The update is parameterized as 4 corner offsets (8 values) in rendering-
domain coordinates, turned into a homography by an exact 4-point solve.
Both the solve and the grid projection are custom tape nodes with
analytic VJPs, so gradients flow through all iterations and through the
final warp into the regressor weights.
"""

from __future__ import annotations

import logging

import numpy as np

from .. import diffcore as dc
from ..geometry import domain_corners, quad_to_domain
from .layers import Conv, Linear, ParamStore

log = logging.getLogger(__name__)


def _dlt_system(src: np.ndarray, dst: np.ndarray):
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        sx, sy = src[i]
        dx, dy = dst[i]
        a[2 * i] = [sx, sy, 1, 0, 0, 0, -dx * sx, -dx * sy]
        a[2 * i + 1] = [0, 0, 0, sx, sy, 1, -dy * sx, -dy * sy]
        b[2 * i] = dx
        b[2 * i + 1] = dy
    return a, b


def corners_to_h_node(delta: dc.Tensor, base: np.ndarray, gain: np.ndarray) -> dc.Tensor:
    """(B,8) corner offsets -> (B,3,3) homographies H(base) = base + gain*delta.

    Degenerate solves substitute the identity (logged); their gradient
    contribution is zero.  VJP via implicit differentiation of the 8x8
    linear system: d h / d c_j = w(corner_j) * A^{-1} e_j with w the
    projective denominator at the source corner.
    """
    dd = delta.data
    bsz = dd.shape[0]
    hs = np.empty((bsz, 3, 3), dtype=np.float64)
    lus = [None] * bsz
    denoms = np.zeros((bsz, 8))
    for n in range(bsz):
        target = base.reshape(-1) + dd[n].astype(np.float64) * gain
        a, b = _dlt_system(base, target.reshape(4, 2))
        try:
            hv = np.linalg.solve(a, b)
            m = np.append(hv, 1.0).reshape(3, 3)
            if not np.all(np.isfinite(m)) or abs(np.linalg.det(m)) < 1e-12:
                raise np.linalg.LinAlgError("singular update")
        except np.linalg.LinAlgError:
            log.warning("degenerate STN update at batch index %d; using identity", n)
            hs[n] = np.eye(3)
            continue
        hs[n] = m
        lus[n] = a
        w = 1.0 + base[:, 0] * hv[6] + base[:, 1] * hv[7]
        denoms[n] = np.repeat(w, 2)

    def vjp(g):
        g3 = g.reshape(bsz, 3, 3).astype(np.float64)
        dd_out = np.zeros_like(dd, dtype=np.float64)
        for n in range(bsz):
            if lus[n] is None:
                continue
            gbar = g3[n].reshape(-1)[:8]
            wvec = np.linalg.solve(lus[n].T, gbar)
            dd_out[n] = denoms[n] * wvec * gain
        return (dd_out.astype(dd.dtype),)

    return dc.record("corners_to_h", (delta,), hs.astype(dd.dtype), vjp)


def homography_grid_node(h: dc.Tensor, extents: tuple[int, int]) -> dc.Tensor:
    """(B,3,3) -> (B,h,w,2) sampling grids, grid[y,x] = H(x, y)."""
    hh, ww = extents
    hd = h.data.astype(np.float64)
    bsz = hd.shape[0]
    ys, xs = np.mgrid[0:hh, 0:ww]
    pts = np.stack([xs, ys, np.ones_like(xs)], axis=-1).astype(np.float64)  # (h,w,3)
    proj = np.einsum("bij,hwj->bhwi", hd, pts)
    den = proj[..., 2]
    if np.any(np.abs(den) < 1e-12):
        raise dc.DiffcoreError("homography grid hits the line at infinity")
    uv = proj[..., :2] / den[..., None]

    def vjp(g):
        g = g.reshape(bsz, hh, ww, 2).astype(np.float64)
        gu = g[..., 0] / den
        gv = g[..., 1] / den
        dh = np.empty_like(hd)
        dh[:, 0] = np.einsum("bhw,hwj->bj", gu, pts)
        dh[:, 1] = np.einsum("bhw,hwj->bj", gv, pts)
        mix = -(gu * uv[..., 0] + gv * uv[..., 1])
        dh[:, 2] = np.einsum("bhw,hwj->bj", mix, pts)
        return (dh.astype(h.dtype),)

    return dc.record("homography_grid", (h,), uv.astype(h.dtype), vjp)


class Regressor:
    """Small convnet over the current 32x256 crop -> 8 corner offsets.

    The final layer is zero-initialized so training starts at the plain
    quad crop (identity updates).
    """

    def __init__(self, store: ParamStore, name: str, rng,
                 channels=(8, 16, 16), fc: int = 64, domain=(32, 256)):
        c1, c2, c3 = channels
        self.conv1 = Conv(store, f"{name}.conv1", 1, c1, rng)
        self.conv2 = Conv(store, f"{name}.conv2", c1, c2, rng)
        self.conv3 = Conv(store, f"{name}.conv3", c2, c3, rng)
        h, w = domain
        self.flat = c3 * (h // 8) * (w // 8)
        self.fc1 = Linear(store, f"{name}.fc1", self.flat, fc, rng)
        self.fc2 = Linear(store, f"{name}.fc2", fc, 8, rng, zero_init=True)

    def __call__(self, crop):
        x = dc.relu(self.conv1(dc.avgpool2(crop)))
        x = dc.relu(self.conv2(dc.avgpool2(x)))
        x = dc.relu(self.conv3(dc.avgpool2(x)))
        x = dc.reshape(x, (x.shape[0], self.flat))
        return self.fc2(dc.relu(self.fc1(x)))


def initial_maps(quads: np.ndarray, domain=(32, 256)) -> np.ndarray:
    """Stack of quad -> domain source-lookup homographies (B,3,3)."""
    from ..geometry import Quad

    out = np.empty((quads.shape[0], 3, 3))
    for n in range(quads.shape[0]):
        out[n] = quad_to_domain(Quad.from_corners(quads[n], validate=False), domain).m
    return out


def icstn_rectify(scene: dc.Tensor, quads: np.ndarray, iters: int,
                  regressor: Regressor | None, domain=(32, 256),
                  gain_scale: float = 0.1):
    """Rectify scenes to the rendering domain through `iters` composed
    updates (0 = plain quad crop).  Returns (crop, H_total)."""
    base = domain_corners(domain)
    gain = np.empty(8)
    gain[0::2] = gain_scale * domain[1]
    gain[1::2] = gain_scale * domain[0]
    h_cur = dc.constant(initial_maps(quads, domain).astype(scene.dtype))
    for _ in range(iters):
        grid = homography_grid_node(h_cur, domain)
        crop = dc.bilinear_sample(scene, grid)
        delta = regressor(crop)
        dh = corners_to_h_node(delta, base, gain)
        h_cur = dc.matmul(h_cur, dh)
    grid = homography_grid_node(h_cur, domain)
    crop = dc.bilinear_sample(scene, grid)
    return crop, h_cur
