"""Homography algebra and sampling-grid construction.

Coordinate convention, fixed once for the whole artifact: x = column,
y = row, origin at the top-left pixel center.  A homography used for
warping is a *source-lookup* map: to fill a target raster from a source
image, each target coordinate p is sent to H(p) in source coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS_SINGULAR = 1e-12


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, normalized so the bottom-right entry is 1."""

    m: np.ndarray

    @staticmethod
    def from_matrix(m) -> "Homography":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise GeometryError(f"expected 3x3 matrix, got {m.shape}")
        if abs(m[2, 2]) < EPS_SINGULAR:
            raise GeometryError("degenerate homography: bottom-right entry ~ 0")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) < EPS_SINGULAR:
            raise GeometryError("singular homography")
        m.flags.writeable = False
        return Homography(m)

    @staticmethod
    def identity() -> "Homography":
        return Homography.from_matrix(np.eye(3))

    @staticmethod
    def translation(dx: float, dy: float) -> "Homography":
        m = np.eye(3)
        m[0, 2] = dx
        m[1, 2] = dy
        return Homography.from_matrix(m)


def compose(h1: Homography, h2: Homography) -> Homography:
    """apply(compose(h1,h2), p) == apply(h1, apply(h2, p))."""
    return Homography.from_matrix(h1.m @ h2.m)


def invert(h: Homography) -> Homography:
    return Homography.from_matrix(np.linalg.inv(h.m))


def apply_h(h: Homography, point) -> np.ndarray:
    """Apply to one (x,y) point or an (...,2) array of points."""
    p = np.asarray(point, dtype=np.float64)
    single = p.ndim == 1
    pts = np.atleast_2d(p)
    ones = np.ones(pts.shape[:-1] + (1,))
    hom = np.concatenate([pts, ones], axis=-1) @ h.m.T
    wcoord = hom[..., 2]
    if np.any(np.abs(wcoord) < EPS_SINGULAR):
        raise GeometryError("point maps to infinity")
    out = hom[..., :2] / wcoord[..., None]
    return out[0] if single else out.reshape(p.shape)


@dataclass(frozen=True)
class Quad:
    """4 corners (x,y), order TL, TR, BR, BL; simple polygon, positive area."""

    corners: np.ndarray

    @staticmethod
    def from_corners(corners, validate: bool = True) -> "Quad":
        c = np.asarray(corners, dtype=np.float64).reshape(4, 2)
        if validate and not quad_is_valid(c):
            raise GeometryError(f"invalid quad: {c.tolist()}")
        c = c.copy()
        c.flags.writeable = False
        return Quad(c)

    @staticmethod
    def from_rect(x0: float, y0: float, x1: float, y1: float) -> "Quad":
        return Quad.from_corners([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    def flat(self) -> list[float]:
        """8 floats TL,TR,BR,BL for the dataset manifest."""
        return [float(v) for v in self.corners.reshape(-1)]

    def bbox_extents(self) -> tuple[float, float]:
        c = self.corners
        return (float(c[:, 0].max() - c[:, 0].min()),
                float(c[:, 1].max() - c[:, 1].min()))


def _signed_area(c: np.ndarray) -> float:
    x, y = c[:, 0], c[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segs_cross(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def quad_is_valid(corners) -> bool:
    """Simple (opposite edges disjoint) and positive area in y-down coords."""
    c = np.asarray(corners, dtype=np.float64).reshape(4, 2)
    if not np.all(np.isfinite(c)):
        return False
    if _signed_area(c) <= 0:
        return False
    if _segs_cross(c[0], c[1], c[2], c[3]):
        return False
    if _segs_cross(c[1], c[2], c[3], c[0]):
        return False
    return True


def domain_corners(extents: tuple[int, int]) -> np.ndarray:
    """Pixel-center corners TL,TR,BR,BL of an (h, w) raster."""
    h, w = extents
    return np.array(
        [(0.0, 0.0), (w - 1.0, 0.0), (w - 1.0, h - 1.0), (0.0, h - 1.0)]
    )


def solve_4point(src: np.ndarray, dst: np.ndarray) -> Homography:
    """Direct linear solve for the homography with H(src_i) = dst_i."""
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        sx, sy = src[i]
        dx, dy = dst[i]
        a[2 * i] = [sx, sy, 1, 0, 0, 0, -dx * sx, -dx * sy]
        a[2 * i + 1] = [0, 0, 0, sx, sy, 1, -dy * sx, -dy * sy]
        b[2 * i] = dx
        b[2 * i + 1] = dy
    try:
        hv = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as e:
        raise GeometryError(f"degenerate correspondences: {e}") from None
    m = np.append(hv, 1.0).reshape(3, 3)
    return Homography.from_matrix(m)


def quad_to_domain(quad: Quad, extents: tuple[int, int] = (32, 256)) -> Homography:
    """Source-lookup map sending the (h,w) rendering domain onto the quad.

    Rectification of a scene is then bilinear_sample(scene,
    sampling_grid(quad_to_domain(q), extents)).
    """
    return solve_4point(domain_corners(extents), quad.corners)


def sampling_grid(h: Homography, extents: tuple[int, int]) -> np.ndarray:
    """grid[y, x] = H applied to (x, y), shape (h, w, 2) float64."""
    hh, ww = extents
    ys, xs = np.mgrid[0:hh, 0:ww]
    pts = np.stack([xs, ys], axis=-1).astype(np.float64)
    flat = pts.reshape(-1, 2)
    ones = np.ones((flat.shape[0], 1))
    hom = np.concatenate([flat, ones], axis=1) @ h.m.T
    out = hom[:, :2] / hom[:, 2:3]
    return out.reshape(hh, ww, 2)
