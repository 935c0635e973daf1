"""Canonical skeleton templates.

A transcript is laid out in equal-width slots across a 32x256 rendering
domain; each glyph is rasterized into its slot (2 px margins), thinned to
a 1-px skeleton, and the word template is exp(-d(x, S)^2 / 2) where d is
the exact Euclidean distance to the union skeleton S and sigma = 1 px.
(Per-character fields composed by max equal the union-distance form, since
max_k exp(-d_k^2/2) = exp(-min_k d_k^2/2).)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import imaging
from .glyphs import GlyphSet, default_glyphs

DOMAIN = (32, 256)
MARGIN = 2
MAX_LEN = 16          # keeps the minimum slot at 256/16 = 16 px
SIGMA = 1.0           # pixels
STROKE_THICKNESS = 3.0

_glyph_cache: dict = {}


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class SkeletonTemplate:
    image: np.ndarray     # (32, 256) float64, 1 exactly on skeleton pixels
    transcript: str


@dataclass(frozen=True)
class WordLayout:
    """Skeleton raster plus the column bookkeeping the kerning stage needs."""

    skeleton: np.ndarray                 # bool (32, 256)
    char_columns: list                   # per char: half-open ink column range
    gaps: list                           # half-open runs between adjacent chars
    slot_width: float


def transcribe(word: str, glyphs: GlyphSet | None = None) -> list[str]:
    """Dictionary entry -> character sequence (identity, case preserved)."""
    if not word:
        raise TemplateError("empty word")
    glyphs = glyphs or default_glyphs()
    for ch in word:
        if ch not in glyphs:
            raise TemplateError(f"unsupported character {ch!r}")
    return list(word)


def _glyph_skeleton(ch: str, glyphs: GlyphSet, bw: int, bh: int) -> np.ndarray:
    key = (id(glyphs.strokes), ch, bw, bh)
    got = _glyph_cache.get(key)
    if got is not None:
        return got
    lines = [
        [(x * (bw - 1), y * (bh - 1)) for x, y in line]
        for line in glyphs[ch]
    ]
    mask = imaging.rasterize_strokes(lines, (bh, bw), STROKE_THICKNESS)
    skel = imaging.skeletonize(mask)
    skel.flags.writeable = False
    _glyph_cache[key] = skel
    return skel


def render_layout(transcript, glyphs: GlyphSet | None = None) -> WordLayout:
    """Rasterize the equal-slot skeleton and record ink/gap column runs."""
    glyphs = glyphs or default_glyphs()
    chars = transcript if isinstance(transcript, list) else transcribe(transcript, glyphs)
    n = len(chars)
    if not 1 <= n <= MAX_LEN:
        raise TemplateError(f"transcript length {n} outside 1..{MAX_LEN}")
    h, w = DOMAIN
    slot = w / n
    word = np.zeros(DOMAIN, dtype=bool)
    char_cols = []
    for i, ch in enumerate(chars):
        if ch not in glyphs:
            raise TemplateError(f"unsupported character {ch!r}")
        left = int(round(i * slot)) + MARGIN
        right = int(round((i + 1) * slot)) - MARGIN   # exclusive
        bw = right - left
        bh = h - 2 * MARGIN
        skel = _glyph_skeleton(ch, glyphs, bw, bh)
        word[MARGIN : MARGIN + bh, left:right] |= skel
        ink = np.nonzero(skel.any(axis=0))[0]
        if len(ink) == 0:
            raise TemplateError(f"glyph {ch!r} rasterized to nothing")
        char_cols.append((left + int(ink[0]), left + int(ink[-1]) + 1))
    gaps = []
    for (a0, a1), (b0, b1) in zip(char_cols[:-1], char_cols[1:]):
        if a1 > b0:
            raise TemplateError("character ink overlaps across slots")
        gaps.append((a1, b0))
    return WordLayout(word, char_cols, gaps, slot)


def template_from_skeleton(skeleton: np.ndarray) -> np.ndarray:
    """exp(-d^2 / (2 sigma^2)) with the exact EDT of the skeleton."""
    d = imaging.distance_transform(skeleton)
    return np.exp(-(d * d) / (2.0 * SIGMA * SIGMA))


def render_template(transcript, glyphs: GlyphSet | None = None) -> SkeletonTemplate:
    chars = transcript if isinstance(transcript, list) else transcribe(transcript, glyphs or default_glyphs())
    layout = render_layout(chars, glyphs)
    img = template_from_skeleton(layout.skeleton)
    return SkeletonTemplate(img, "".join(chars))
