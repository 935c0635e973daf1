"""Non-differentiable raster utilities.

Grayscale images are float arrays in [0,1] (y down); binary masks are bool
arrays.  Everything here is a pure function of its inputs plus, where
noted, an explicit numpy Generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from . import backend


class ImagingError(ValueError):
    pass


# ------------------------------------------------------------------- PGM I/O

def write_pgm(path, img) -> None:
    """Binary 8-bit PGM (P5); stored byte = round(255 * value)."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ImagingError("write_pgm: expected 2-D image")
    q = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        f.write(q.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if not raw.startswith(b"P5"):
        raise ImagingError(f"{path}: not a binary PGM")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while raw[pos : pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    w, h, maxval = (int(x) for x in fields)
    if maxval != 255:
        raise ImagingError(f"{path}: unsupported maxval {maxval}")
    pos += 1
    data = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos)
    return data.reshape(h, w).astype(np.float64) / 255.0


# -------------------------------------------------------------- rasterization

def rasterize_strokes(polylines, extents, thickness: float) -> np.ndarray:
    """Set every pixel whose center lies within thickness/2 of a segment."""
    h, w = extents
    if not polylines or all(len(p) == 0 for p in polylines):
        raise ImagingError("rasterize_strokes: empty polyline set")
    mask = np.zeros((h, w), dtype=bool)
    r = thickness / 2.0
    for line in polylines:
        pts = np.asarray(line, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ImagingError("polyline must be a sequence of (x, y) points")
        if np.any(pts[:, 0] < -r) or np.any(pts[:, 0] > w - 1 + r) or \
           np.any(pts[:, 1] < -r) or np.any(pts[:, 1] > h - 1 + r):
            raise ImagingError("polyline coordinates outside extents")
        if len(pts) == 1:
            segs = [(pts[0], pts[0])]
        else:
            segs = list(zip(pts[:-1], pts[1:]))
        for p0, p1 in segs:
            x0 = max(0, int(np.floor(min(p0[0], p1[0]) - r)))
            x1 = min(w - 1, int(np.ceil(max(p0[0], p1[0]) + r)))
            y0 = max(0, int(np.floor(min(p0[1], p1[1]) - r)))
            y1 = min(h - 1, int(np.ceil(max(p0[1], p1[1]) + r)))
            if x1 < x0 or y1 < y0:
                continue
            ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
            d = p1 - p0
            len2 = float(d @ d)
            px = xs - p0[0]
            py = ys - p0[1]
            if len2 == 0.0:
                d2 = px * px + py * py
            else:
                t = np.clip((px * d[0] + py * d[1]) / len2, 0.0, 1.0)
                dx = px - t * d[0]
                dy = py - t * d[1]
                d2 = dx * dx + dy * dy
            mask[y0 : y1 + 1, x0 : x1 + 1] |= d2 <= r * r
    return mask


# ------------------------------------------------------------------- thinning

def _zs_pass(m: np.ndarray, second: bool) -> np.ndarray:
    """One Zhang-Suen subiteration; returns the deletion mask."""
    p = np.pad(m, 1).astype(np.uint8)
    p2 = p[:-2, 1:-1]
    p3 = p[:-2, 2:]
    p4 = p[1:-1, 2:]
    p5 = p[2:, 2:]
    p6 = p[2:, 1:-1]
    p7 = p[2:, :-2]
    p8 = p[1:-1, :-2]
    p9 = p[:-2, :-2]
    ring = [p2, p3, p4, p5, p6, p7, p8, p9, p2]
    b = sum(ring[:-1])
    a = sum(((ring[i] == 0) & (ring[i + 1] == 1)) for i in range(8))
    if not second:
        c1 = p2 * p4 * p6 == 0
        c2 = p4 * p6 * p8 == 0
    else:
        c1 = p2 * p4 * p8 == 0
        c2 = p2 * p6 * p8 == 0
    return m & (b >= 2) & (b <= 6) & (a == 1) & c1 & c2


def skeletonize(mask) -> np.ndarray:
    """Two-subiteration morphological thinning to a 1-px 8-connected skeleton.

    Idempotent on its own output; preserves the component structure of each
    input blob.  Empty masks pass through.
    """
    m = np.asarray(mask, dtype=bool).copy()
    while True:
        d1 = _zs_pass(m, second=False)
        m[d1] = False
        d2 = _zs_pass(m, second=True)
        m[d2] = False
        if not (d1.any() or d2.any()):
            return m


def connected_components(mask) -> int:
    """Count of 8-connected components (oracle-grade flood fill)."""
    m = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(m)
    count = 0
    hh, ww = m.shape
    for sy, sx in zip(*np.nonzero(m)):
        if seen[sy, sx]:
            continue
        count += 1
        stack = [(sy, sx)]
        seen[sy, sx] = True
        while stack:
            y, x = stack.pop()
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < hh and 0 <= nx < ww and m[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
    return count


# ------------------------------------------------------------------ distance

def distance_transform(mask) -> np.ndarray:
    """Exact Euclidean distance (pixels) to the nearest set pixel.

    Separable two-pass scheme: per-column squared distances, then a
    lower-envelope pass over rows.  All intermediates are exact integers
    in float64, so the result is exact.
    """
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ImagingError("distance_transform: expected 2-D mask")
    if not m.any():
        raise ImagingError("distance_transform: empty mask")
    h, w = m.shape
    cap = float(h + w)
    run = np.full(w, cap)
    down = np.empty((h, w))
    for r in range(h):
        run = np.where(m[r], 0.0, np.minimum(run + 1.0, cap))
        down[r] = run
    run = np.full(w, cap)
    dist = down
    for r in range(h - 1, -1, -1):
        run = np.where(m[r], 0.0, np.minimum(run + 1.0, cap))
        dist[r] = np.minimum(dist[r], run)
    g = np.ascontiguousarray(dist * dist)
    return np.sqrt(backend.edt_sq_rows(g))


def brute_force_distance(mask) -> np.ndarray:
    """O(n^2) nearest-foreground scan; the oracle distance_transform is
    checked against."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise ImagingError("brute_force_distance: empty mask")
    pts = np.argwhere(m).astype(np.float64)
    h, w = m.shape
    ys, xs = np.mgrid[0:h, 0:w]
    d2 = (ys[..., None] - pts[:, 0]) ** 2 + (xs[..., None] - pts[:, 1]) ** 2
    return np.sqrt(d2.min(axis=-1))


# ---------------------------------------------------------------- corruption

@dataclass(frozen=True)
class CorruptionParams:
    """Appearance corruption; the all-default instance is the identity."""

    brightness: float = 0.0       # added
    contrast: float = 1.0         # multiplied about mid-gray
    noise_sigma: float = 0.0      # additive Gaussian, pre-clamp
    blur_sigma: float = 0.0       # separable Gaussian, reflect padding
    shade_x: float = 0.0          # linear shading slope, full-width swing
    shade_y: float = 0.0


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = max(1, int(3.0 * sigma + 0.5))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def corrupt(image, params: CorruptionParams, rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply contrast/brightness, shading, blur, then noise; clamp to [0,1].

    Deterministic given the generator state; neutral params return the
    input bit-exactly.
    """
    img = np.asarray(image, dtype=np.float64)
    out = img
    if params.contrast != 1.0 or params.brightness != 0.0:
        out = (out - 0.5) * params.contrast + 0.5 + params.brightness
    if params.shade_x != 0.0 or params.shade_y != 0.0:
        h, w = out.shape
        gx = (np.arange(w) / max(w - 1, 1)) - 0.5
        gy = (np.arange(h) / max(h - 1, 1)) - 0.5
        out = out + params.shade_x * gx[None, :] + params.shade_y * gy[:, None]
    if params.blur_sigma > 0.0:
        k = gaussian_kernel1d(params.blur_sigma)
        out = convolve1d(out, k, axis=0, mode="reflect")
        out = convolve1d(out, k, axis=1, mode="reflect")
    if params.noise_sigma > 0.0:
        if rng is None:
            raise ImagingError("corrupt: noise requested without a generator")
        out = out + rng.normal(0.0, params.noise_sigma, size=out.shape)
    if out is img:
        return img.copy()
    return np.clip(out, 0.0, 1.0)


# ------------------------------------------------------------- gap stretching

def _validate_gaps(width: int, gaps) -> list[tuple[int, int]]:
    norm = [(int(a), int(b)) for a, b in gaps]
    prev_stop = -1
    for a, b in norm:
        if a < 0 or b > width or a >= b:
            raise ImagingError(f"gap range ({a},{b}) out of bounds")
        if a <= prev_stop:
            raise ImagingError("gap ranges must be sorted and disjoint")
        prev_stop = b - 1
    return norm


def gap_column_map(width: int, gaps, factor) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Source-column indices after resizing each half-open gap [a,b).

    `factor` is a scalar or one value per gap; character columns map to
    themselves in order, gap runs are nearest-column resampled to
    round(run * factor).  Returns (index array, new gap ranges).
    """
    norm = _validate_gaps(width, gaps)
    factors = np.broadcast_to(np.asarray(factor, dtype=np.float64), (len(norm),))
    cols: list[int] = []
    new_gaps: list[tuple[int, int]] = []
    pos = 0
    for (a, b), f in zip(norm, factors):
        if f < 0:
            raise ImagingError("negative stretch factor")
        cols.extend(range(pos, a))
        gw = b - a
        nw = int(np.floor(gw * f + 0.5))
        start = len(cols)
        for j in range(nw):
            cols.append(a + min(gw - 1, (j * gw) // nw))
        new_gaps.append((start, len(cols)))
        pos = b
    cols.extend(range(pos, width))
    return np.asarray(cols, dtype=np.int64), new_gaps


def stretch_gaps(image, gaps, factor, keep_width: bool = True) -> np.ndarray:
    """Duplicate/drop non-character columns so each gap scales by `factor`.

    Character columns are copied verbatim.  With keep_width the output is
    re-cropped (or right-padded by edge replication) to the input width,
    content anchored at the left edge; otherwise the resized image is
    returned whole.
    """
    img = np.asarray(image)
    if img.ndim != 2:
        raise ImagingError("stretch_gaps: expected 2-D image")
    w = img.shape[1]
    cols, _ = gap_column_map(w, gaps, factor)
    out = img[:, cols]
    if not keep_width:
        return out
    if out.shape[1] >= w:
        return out[:, :w]
    pad = np.repeat(out[:, -1:], w - out.shape[1], axis=1)
    return np.concatenate([out, pad], axis=1)
