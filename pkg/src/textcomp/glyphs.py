"""Embedded stroke glyphs for A-Z, a-z, 0-9.

Each glyph is a list of polylines with (x, y) coordinates in the unit box,
x right, y down.  Shapes are deliberately simple (straight segments,
octagonal bowls); the recognizer and the template law only need distinct,
connected, box-filling geometry, not typographic fidelity.
"""

from __future__ import annotations

from dataclasses import dataclass

_O_LOOP = [(0.3, 0.0), (0.7, 0.0), (1.0, 0.22), (1.0, 0.78), (0.7, 1.0),
           (0.3, 1.0), (0.0, 0.78), (0.0, 0.22), (0.3, 0.0)]

STROKES: dict[str, list[list[tuple[float, float]]]] = {
    "0": [_O_LOOP, [(0.72, 0.2), (0.28, 0.8)]],
    "1": [[(0.2, 0.18), (0.5, 0.0), (0.5, 1.0)], [(0.15, 1.0), (0.85, 1.0)]],
    "2": [[(0.0, 0.18), (0.25, 0.0), (0.75, 0.0), (1.0, 0.18), (1.0, 0.42),
           (0.0, 0.85), (0.0, 1.0), (1.0, 1.0)]],
    "3": [[(0.0, 0.12), (0.25, 0.0), (0.78, 0.0), (1.0, 0.15), (1.0, 0.35),
           (0.78, 0.48), (0.4, 0.48)],
          [(0.78, 0.48), (1.0, 0.62), (1.0, 0.85), (0.78, 1.0), (0.22, 1.0),
           (0.0, 0.88)]],
    "4": [[(0.7, 1.0), (0.7, 0.0), (0.0, 0.68), (1.0, 0.68)]],
    "5": [[(0.95, 0.0), (0.05, 0.0), (0.05, 0.45), (0.68, 0.42), (1.0, 0.6),
           (1.0, 0.85), (0.75, 1.0), (0.2, 1.0), (0.0, 0.88)]],
    "6": [[(0.85, 0.0), (0.3, 0.0), (0.0, 0.3), (0.0, 0.8), (0.22, 1.0),
           (0.78, 1.0), (1.0, 0.82), (1.0, 0.6), (0.78, 0.44), (0.0, 0.5)]],
    "7": [[(0.0, 0.12), (0.0, 0.0), (1.0, 0.0), (0.4, 1.0)]],
    "8": [[(0.5, 0.0), (0.12, 0.1), (0.12, 0.38), (0.5, 0.5), (0.88, 0.38),
           (0.88, 0.1), (0.5, 0.0)],
          [(0.5, 0.5), (0.05, 0.62), (0.05, 0.9), (0.5, 1.0), (0.95, 0.9),
           (0.95, 0.62), (0.5, 0.5)]],
    "9": [[(0.15, 1.0), (0.7, 1.0), (1.0, 0.7), (1.0, 0.2), (0.78, 0.0),
           (0.22, 0.0), (0.0, 0.18), (0.0, 0.4), (0.22, 0.56), (1.0, 0.5)]],
    "A": [[(0.0, 1.0), (0.5, 0.0), (1.0, 1.0)], [(0.22, 0.62), (0.78, 0.62)]],
    "B": [[(0.0, 0.0), (0.0, 1.0)],
          [(0.0, 0.0), (0.72, 0.0), (0.95, 0.14), (0.95, 0.36), (0.72, 0.5),
           (0.0, 0.5)],
          [(0.72, 0.5), (1.0, 0.64), (1.0, 0.86), (0.72, 1.0), (0.0, 1.0)]],
    "C": [[(1.0, 0.16), (0.72, 0.0), (0.28, 0.0), (0.0, 0.25), (0.0, 0.75),
           (0.28, 1.0), (0.72, 1.0), (1.0, 0.84)]],
    "D": [[(0.0, 0.0), (0.0, 1.0)],
          [(0.0, 0.0), (0.6, 0.0), (1.0, 0.3), (1.0, 0.7), (0.6, 1.0), (0.0, 1.0)]],
    "E": [[(1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 1.0)], [(0.0, 0.5), (0.7, 0.5)]],
    "F": [[(1.0, 0.0), (0.0, 0.0), (0.0, 1.0)], [(0.0, 0.5), (0.7, 0.5)]],
    "G": [[(1.0, 0.16), (0.72, 0.0), (0.28, 0.0), (0.0, 0.25), (0.0, 0.75),
           (0.28, 1.0), (0.72, 1.0), (1.0, 0.8), (1.0, 0.55), (0.55, 0.55)]],
    "H": [[(0.0, 0.0), (0.0, 1.0)], [(1.0, 0.0), (1.0, 1.0)], [(0.0, 0.5), (1.0, 0.5)]],
    "I": [[(0.2, 0.0), (0.8, 0.0)], [(0.5, 0.0), (0.5, 1.0)], [(0.2, 1.0), (0.8, 1.0)]],
    "J": [[(0.25, 0.0), (1.0, 0.0)],
          [(0.72, 0.0), (0.72, 0.8), (0.5, 1.0), (0.18, 1.0), (0.0, 0.84)]],
    "K": [[(0.0, 0.0), (0.0, 1.0)], [(1.0, 0.0), (0.0, 0.55)], [(0.34, 0.4), (1.0, 1.0)]],
    "L": [[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]],
    "M": [[(0.0, 1.0), (0.0, 0.0), (0.5, 0.6), (1.0, 0.0), (1.0, 1.0)]],
    "N": [[(0.0, 1.0), (0.0, 0.0), (1.0, 1.0), (1.0, 0.0)]],
    "O": [_O_LOOP],
    "P": [[(0.0, 1.0), (0.0, 0.0), (0.75, 0.0), (1.0, 0.16), (1.0, 0.4),
           (0.75, 0.55), (0.0, 0.55)]],
    "Q": [_O_LOOP, [(0.6, 0.68), (1.0, 1.0)]],
    "R": [[(0.0, 1.0), (0.0, 0.0), (0.75, 0.0), (1.0, 0.16), (1.0, 0.4),
           (0.75, 0.55), (0.0, 0.55)], [(0.55, 0.55), (1.0, 1.0)]],
    "S": [[(1.0, 0.12), (0.75, 0.0), (0.25, 0.0), (0.0, 0.15), (0.0, 0.36),
           (0.25, 0.5), (0.75, 0.5), (1.0, 0.64), (1.0, 0.86), (0.75, 1.0),
           (0.25, 1.0), (0.0, 0.88)]],
    "T": [[(0.0, 0.0), (1.0, 0.0)], [(0.5, 0.0), (0.5, 1.0)]],
    "U": [[(0.0, 0.0), (0.0, 0.8), (0.25, 1.0), (0.75, 1.0), (1.0, 0.8), (1.0, 0.0)]],
    "V": [[(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)]],
    "W": [[(0.0, 0.0), (0.25, 1.0), (0.5, 0.42), (0.75, 1.0), (1.0, 0.0)]],
    "X": [[(0.0, 0.0), (1.0, 1.0)], [(1.0, 0.0), (0.0, 1.0)]],
    "Y": [[(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)], [(0.5, 0.5), (0.5, 1.0)]],
    "Z": [[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]],
    "a": [[(0.9, 0.45), (0.62, 0.3), (0.22, 0.3), (0.0, 0.5), (0.0, 0.85),
           (0.25, 1.0), (0.7, 1.0), (0.9, 0.85)],
          [(0.9, 0.3), (0.9, 1.0)]],
    "b": [[(0.0, 0.0), (0.0, 1.0)],
          [(0.0, 0.45), (0.3, 0.3), (0.75, 0.3), (1.0, 0.5), (1.0, 0.8),
           (0.75, 1.0), (0.3, 1.0), (0.0, 0.85)]],
    "c": [[(1.0, 0.42), (0.7, 0.3), (0.3, 0.3), (0.0, 0.5), (0.0, 0.8),
           (0.3, 1.0), (0.7, 1.0), (1.0, 0.88)]],
    "d": [[(1.0, 0.0), (1.0, 1.0)],
          [(1.0, 0.45), (0.7, 0.3), (0.25, 0.3), (0.0, 0.5), (0.0, 0.8),
           (0.25, 1.0), (0.7, 1.0), (1.0, 0.85)]],
    "e": [[(0.0, 0.62), (1.0, 0.62), (1.0, 0.45), (0.72, 0.3), (0.28, 0.3),
           (0.0, 0.5), (0.0, 0.8), (0.28, 1.0), (0.8, 1.0)]],
    "f": [[(0.9, 0.1), (0.72, 0.0), (0.45, 0.0), (0.3, 0.14), (0.3, 1.0)],
          [(0.05, 0.35), (0.7, 0.35)]],
    "g": [[(1.0, 0.42), (0.7, 0.3), (0.25, 0.3), (0.0, 0.44), (0.0, 0.6),
           (0.25, 0.74), (0.7, 0.74), (1.0, 0.6)],
          [(1.0, 0.3), (1.0, 0.85), (0.75, 1.0), (0.25, 1.0), (0.0, 0.88)]],
    "h": [[(0.0, 0.0), (0.0, 1.0)],
          [(0.0, 0.45), (0.3, 0.3), (0.75, 0.3), (1.0, 0.5), (1.0, 1.0)]],
    "i": [[(0.5, 0.05), (0.5, 0.14)], [(0.5, 0.34), (0.5, 1.0)]],
    "j": [[(0.62, 0.05), (0.62, 0.14)],
          [(0.62, 0.34), (0.62, 0.85), (0.42, 1.0), (0.12, 1.0), (0.0, 0.86)]],
    "k": [[(0.0, 0.0), (0.0, 1.0)], [(0.9, 0.3), (0.0, 0.68)], [(0.34, 0.54), (0.9, 1.0)]],
    "l": [[(0.42, 0.0), (0.42, 0.88), (0.58, 1.0)]],
    "m": [[(0.0, 0.3), (0.0, 1.0)],
          [(0.0, 0.44), (0.16, 0.3), (0.36, 0.3), (0.5, 0.44), (0.5, 1.0)],
          [(0.5, 0.44), (0.66, 0.3), (0.86, 0.3), (1.0, 0.44), (1.0, 1.0)]],
    "n": [[(0.0, 0.3), (0.0, 1.0)],
          [(0.0, 0.5), (0.25, 0.3), (0.75, 0.3), (1.0, 0.5), (1.0, 1.0)]],
    "o": [[(0.3, 0.3), (0.7, 0.3), (1.0, 0.52), (1.0, 0.78), (0.7, 1.0),
           (0.3, 1.0), (0.0, 0.78), (0.0, 0.52), (0.3, 0.3)]],
    "p": [[(0.0, 0.3), (0.0, 1.0)],
          [(0.0, 0.42), (0.3, 0.3), (0.75, 0.3), (1.0, 0.44), (1.0, 0.6),
           (0.75, 0.74), (0.0, 0.62)]],
    "q": [[(1.0, 0.3), (1.0, 1.0)],
          [(1.0, 0.42), (0.7, 0.3), (0.25, 0.3), (0.0, 0.44), (0.0, 0.6),
           (0.25, 0.74), (1.0, 0.62)]],
    "r": [[(0.0, 0.3), (0.0, 1.0)], [(0.0, 0.52), (0.3, 0.3), (0.8, 0.3), (1.0, 0.44)]],
    "s": [[(1.0, 0.4), (0.75, 0.3), (0.25, 0.3), (0.0, 0.42), (0.25, 0.58),
           (0.75, 0.66), (1.0, 0.8), (0.75, 1.0), (0.25, 1.0), (0.0, 0.9)]],
    "t": [[(0.4, 0.0), (0.4, 0.86), (0.58, 1.0), (0.9, 1.0)], [(0.08, 0.3), (0.82, 0.3)]],
    "u": [[(0.0, 0.3), (0.0, 0.85), (0.25, 1.0), (0.72, 1.0), (1.0, 0.82)],
          [(1.0, 0.3), (1.0, 1.0)]],
    "v": [[(0.0, 0.3), (0.5, 1.0), (1.0, 0.3)]],
    "w": [[(0.0, 0.3), (0.2, 1.0), (0.5, 0.55), (0.8, 1.0), (1.0, 0.3)]],
    "x": [[(0.0, 0.3), (1.0, 1.0)], [(1.0, 0.3), (0.0, 1.0)]],
    "y": [[(0.0, 0.3), (0.5, 0.68)], [(1.0, 0.3), (0.24, 1.0), (0.0, 1.0)]],
    "z": [[(0.0, 0.3), (1.0, 0.3), (0.0, 1.0), (1.0, 1.0)]],
}


@dataclass(frozen=True)
class GlyphSet:
    """Character -> stroke polylines, all inside the unit box."""

    strokes: dict

    def __post_init__(self):
        for ch, lines in self.strokes.items():
            for line in lines:
                for x, y in line:
                    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                        raise ValueError(f"glyph {ch!r} leaves the unit box")

    @property
    def alphabet(self) -> str:
        return "".join(sorted(self.strokes))

    def __contains__(self, ch: str) -> bool:
        return ch in self.strokes

    def __getitem__(self, ch: str):
        return self.strokes[ch]


def default_glyphs() -> GlyphSet:
    return GlyphSet(STROKES)
