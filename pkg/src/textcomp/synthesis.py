"""The forward compositional model.

A sample is built in five stages, in this exact order: canonical skeleton
(equal-slot layout), kerning (gap resizing), font (dilation of the
skeleton's distance field), appearance (polarity + photometric
corruption), and geometric distortion (homography pullback onto a scene
canvas).  Kerning may grow or shrink the flat image's width; the scene
quad always covers the whole flat extent, so rectifying quad -> 32x256
renormalizes global scale exactly as it would for a detector crop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import imaging
from .geometry import GeometryError, Homography, Quad, apply_h, domain_corners, invert, quad_is_valid, solve_4point
from .glyphs import GlyphSet, default_glyphs
from .imaging import CorruptionParams
from .templates import DOMAIN, SkeletonTemplate, WordLayout, render_layout, render_template

CANVAS = (64, 512)
MAX_KERNED_WIDTH_FACTOR = 1.5


class SynthesisError(ValueError):
    pass


class KerningOverflowError(SynthesisError):
    pass


@dataclass(frozen=True)
class ParamRanges:
    """Sampling ranges for the hidden variables; all values overridable.

    The paper-side constants are only the perturbation law and sigma_p
    values; everything here is an artifact choice kept inside the
    human-legible regime.
    """

    kern_lo: float = -2.0
    kern_hi: float = 6.0
    radius_lo: float = 0.5
    radius_hi: float = 2.5
    invert_prob: float = 0.25
    bg_lo: float = 0.65
    bg_hi: float = 0.95
    fg_lo: float = 0.05
    fg_hi: float = 0.35
    contrast_lo: float = 0.9
    contrast_hi: float = 1.1
    brightness_max: float = 0.05
    noise_lo: float = 0.0
    noise_hi: float = 0.08
    blur_lo: float = 0.0
    blur_hi: float = 1.5
    shade_max: float = 0.15
    corner_jitter: float = 0.15

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @staticmethod
    def from_json(d: dict) -> "ParamRanges":
        return ParamRanges(**d)


NEUTRAL_RANGES = ParamRanges(
    kern_lo=0.0, kern_hi=0.0, radius_lo=1.0, radius_hi=1.0, invert_prob=0.0,
    bg_lo=1.0, bg_hi=1.0, fg_lo=0.0, fg_hi=0.0, contrast_lo=1.0, contrast_hi=1.0,
    brightness_max=0.0, noise_lo=0.0, noise_hi=0.0, blur_lo=0.0, blur_hi=0.0,
    shade_max=0.0, corner_jitter=0.0,
)


@dataclass(frozen=True)
class SynthesisParams:
    theta_k: np.ndarray            # per-gap kerning offsets, px
    radius: float                  # stroke radius, px
    invert: bool                   # False = dark text on light ground
    bg_level: float
    fg_level: float
    corruption: CorruptionParams
    corner_jitter: np.ndarray      # (4,2) offsets applied to the base rect


@dataclass(frozen=True)
class PerturbationParams:
    """Corner noise N(0, (sigma_p w)^2 / (sigma_p h)^2) plus a shared
    per-box translation with sigma_t; w,h from the quad's bounding box."""

    sigma_p: float
    sigma_t: float

    def __post_init__(self):
        if self.sigma_p < 0 or self.sigma_t < 0:
            raise SynthesisError("perturbation constants must be >= 0")


@dataclass(frozen=True)
class WordSample:
    scene: np.ndarray              # (64, 512) float64 in [0,1]
    quad: Quad                     # true text region (covers the flat extents)
    transcript: str
    template: SkeletonTemplate     # canonical 32x256 ground truth
    params: SynthesisParams
    seed: int
    gaps: list                     # half-open inter-character gaps, flat coords
    flat_extents: tuple            # (h, w) of the kerned flat image


def draw_params(rng: np.random.Generator, n_gaps: int, ranges: ParamRanges) -> SynthesisParams:
    """Fixed draw order; part of the reproducibility contract."""
    theta = rng.uniform(ranges.kern_lo, ranges.kern_hi, size=n_gaps)
    radius = float(rng.uniform(ranges.radius_lo, ranges.radius_hi))
    inv = bool(rng.random() < ranges.invert_prob)
    bg = float(rng.uniform(ranges.bg_lo, ranges.bg_hi))
    fg = float(rng.uniform(ranges.fg_lo, ranges.fg_hi))
    contrast = float(rng.uniform(ranges.contrast_lo, ranges.contrast_hi))
    brightness = float(rng.uniform(-ranges.brightness_max, ranges.brightness_max))
    noise = float(rng.uniform(ranges.noise_lo, ranges.noise_hi))
    blur = float(rng.uniform(ranges.blur_lo, ranges.blur_hi))
    shade_x = float(rng.uniform(-ranges.shade_max, ranges.shade_max))
    shade_y = float(rng.uniform(-ranges.shade_max, ranges.shade_max))
    jitter = rng.uniform(-1.0, 1.0, size=(4, 2)) * ranges.corner_jitter
    corr = CorruptionParams(
        brightness=brightness, contrast=contrast, noise_sigma=noise,
        blur_sigma=blur, shade_x=shade_x, shade_y=shade_y,
    )
    return SynthesisParams(theta, radius, inv, bg, fg, corr, jitter)


# ------------------------------------------------------------------- stages

def apply_kerning(skeleton: np.ndarray, gaps, theta_k) -> tuple[np.ndarray, list]:
    """Resize each inter-character gap by its offset (px), keeping character
    columns verbatim.  The output width changes with sum(theta); widths
    beyond MAX_KERNED_WIDTH_FACTOR x input raise KerningOverflowError so the
    caller can redraw."""
    theta = np.atleast_1d(np.asarray(theta_k, dtype=np.float64))
    if len(theta) != len(gaps):
        raise SynthesisError(f"{len(gaps)} gaps but {len(theta)} offsets")
    w = skeleton.shape[1]
    if len(gaps) == 0:
        return np.asarray(skeleton).copy(), []
    factors = []
    for (a, b), th in zip(gaps, theta):
        gw = b - a
        factors.append(max(0.0, (gw + th) / gw))
    cols, new_gaps = imaging.gap_column_map(w, gaps, factors)
    if len(cols) > MAX_KERNED_WIDTH_FACTOR * w:
        raise KerningOverflowError(f"kerned width {len(cols)} exceeds {MAX_KERNED_WIDTH_FACTOR}x{w}")
    out = np.asarray(skeleton)[:, cols]
    return out, new_gaps


def apply_font(skeleton: np.ndarray, radius: float) -> np.ndarray:
    """Dilate the skeleton to a stroke of the given radius.

    A pixel is inked when its center lies within radius of the skeleton
    under the half-pixel pen model: EDT <= radius - 0.5.  radius 0.5 is
    the skeleton itself.
    """
    if radius < 0.5:
        raise SynthesisError("stroke radius below 0.5 px")
    d = imaging.distance_transform(skeleton)
    return d <= radius - 0.5


def apply_appearance(stroke_mask: np.ndarray, params: SynthesisParams,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Compose polarity over the background level, then corrupt."""
    bg, fg = (params.fg_level, params.bg_level) if params.invert else (params.bg_level, params.fg_level)
    base = bg + (fg - bg) * stroke_mask.astype(np.float64)
    return imaging.corrupt(base, params.corruption, rng)


def flat_rect_to_quad(flat_extents, quad: Quad) -> Homography:
    """Map sending the flat raster's corner pixels onto the quad."""
    return solve_4point(domain_corners(flat_extents), quad.corners)


def apply_geometry(flat: np.ndarray, h_pull: Homography, canvas=CANVAS,
                   bg_level: float = 0.0) -> tuple[np.ndarray, Quad]:
    """Pull the flat image back onto the canvas: scene(x) = flat(H(x)).

    Returns the scene and the quad = invert(H) applied to the flat
    corners; raises if that quad leaves the canvas.  Off-quad canvas is
    filled with bg_level via the warp's coverage mask.
    """
    ch, cw = canvas
    fh, fw = flat.shape
    corners = apply_h(invert(h_pull), domain_corners((fh, fw)))
    if (corners[:, 0].min() < 0 or corners[:, 0].max() > cw - 1
            or corners[:, 1].min() < 0 or corners[:, 1].max() > ch - 1):
        raise SynthesisError(f"quad clipped by canvas: {corners.tolist()}")
    quad = Quad.from_corners(corners)
    from .geometry import sampling_grid
    from . import backend
    grid = np.ascontiguousarray(sampling_grid(h_pull, canvas)[None])
    stack = np.ascontiguousarray(
        np.stack([flat, np.ones_like(flat)])[None].astype(np.float64)
    )
    warped = backend.bilinear_forward(stack, grid)[0]
    scene = bg_level * (1.0 - warped[1]) + warped[0]
    return scene, quad


def base_quad_for(flat_extents, params: SynthesisParams, canvas=CANVAS) -> Quad:
    """Centered rectangle of the flat extents, corners jittered by up to
    corner_jitter x extent per axis."""
    ch, cw = canvas
    fh, fw = flat_extents
    x0 = (cw - fw) / 2.0
    y0 = (ch - fh) / 2.0
    rect = np.array([(x0, y0), (x0 + fw - 1, y0), (x0 + fw - 1, y0 + fh - 1), (x0, y0 + fh - 1)])
    jit = params.corner_jitter * np.array([fw, fh], dtype=np.float64)
    corners = rect + jit
    if not quad_is_valid(corners):
        raise SynthesisError("jittered quad degenerate")
    return Quad.from_corners(corners)


@dataclass
class SynthStages:
    """Intermediate stage outputs, for stage-order verification."""

    layout: WordLayout
    kerned: np.ndarray
    gaps: list
    fonted: np.ndarray
    flat: np.ndarray
    scene: np.ndarray
    quad: Quad


def scene_background(params: SynthesisParams) -> float:
    """Fill level for off-quad canvas: the corrupted background tone."""
    level = params.fg_level if params.invert else params.bg_level
    return float(np.clip((level - 0.5) * params.corruption.contrast + 0.5
                         + params.corruption.brightness, 0.0, 1.0))


def synthesize_stages(word: str, params: SynthesisParams, seed: int,
                      glyphs: GlyphSet | None = None, canvas=CANVAS) -> SynthStages:
    """Run the five stages with explicit params (no redraws)."""
    layout = render_layout(word, glyphs)
    kerned, gaps = apply_kerning(layout.skeleton, layout.gaps, params.theta_k)
    fonted = apply_font(kerned, params.radius)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    flat = apply_appearance(fonted, params, rng)
    quad = base_quad_for(flat.shape, params, canvas)
    h_pull = invert(flat_rect_to_quad(flat.shape, quad))
    scene, quad = apply_geometry(flat, h_pull, canvas, bg_level=scene_background(params))
    return SynthStages(layout, kerned, gaps, fonted, flat, scene, quad)


def ink_free_gaps(fonted: np.ndarray, kerned_gaps) -> list:
    """Shrink each kerned gap to its ink-free column run after dilation;
    gaps the strokes have swallowed are dropped."""
    ink = fonted.any(axis=0)
    out = []
    for a, b in kerned_gaps:
        run = [c for c in range(a, b) if not ink[c]]
        if run:
            out.append((run[0], run[-1] + 1))
    return out


MAX_REDRAWS = 25


def synthesize_with_stages(word: str, ranges: ParamRanges, seed: int,
                           glyphs: GlyphSet | None = None,
                           canvas=CANVAS) -> tuple[WordSample, SynthStages]:
    """Draw parameters and run the forward model; deterministic in seed.

    Kerning overflows and degenerate quads redraw with an incremented
    substream, up to MAX_REDRAWS attempts.
    """
    layout = render_layout(word, glyphs)
    n_gaps = len(layout.gaps)
    last = None
    for attempt in range(MAX_REDRAWS):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0, attempt]))
        params = draw_params(rng, n_gaps, ranges)
        try:
            st = synthesize_stages(word, params, seed, glyphs, canvas)
        except (KerningOverflowError, SynthesisError, GeometryError) as e:
            last = e
            continue
        template = render_template(word, glyphs)
        sample = WordSample(st.scene, st.quad, word, template, params, seed,
                            ink_free_gaps(st.fonted, st.gaps), st.flat.shape)
        return sample, st
    raise SynthesisError(f"synthesis failed after {MAX_REDRAWS} redraws: {last}")


def synthesize(word: str, ranges: ParamRanges, seed: int,
               glyphs: GlyphSet | None = None, canvas=CANVAS) -> WordSample:
    return synthesize_with_stages(word, ranges, seed, glyphs, canvas)[0]


# ------------------------------------------------------------- perturbation

def perturb_quad(quad: Quad, pp: PerturbationParams, seed: int) -> Quad:
    """Corner noise eta_i plus per-box translation t, scaled by the quad's
    bounding-box extents; degenerate draws are redrawn (max 10)."""
    w, h = quad.bbox_extents()
    scale = np.array([w, h])
    for attempt in range(10):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        eta = rng.normal(0.0, 1.0, size=(4, 2)) * (pp.sigma_p * scale)
        t = rng.normal(0.0, 1.0, size=2) * (pp.sigma_t * scale)
        corners = quad.corners + eta + t
        if quad_is_valid(corners):
            return Quad.from_corners(corners)
    raise SynthesisError("perturbed quad degenerate after 10 draws")


# ------------------------------------------------------------------ dataset

MANIFEST_NAME = "manifest.json"


def sample_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def gen_dataset(lexicon, n: int, ranges: ParamRanges, seed: int, out_dir,
                alphabet: str, glyphs: GlyphSet | None = None, canvas=CANVAS) -> dict:
    """Write n samples (round-robin over the lexicon) plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    template_cache: dict[str, str] = {}
    for i in range(n):
        word = lexicon[i % len(lexicon)]
        s = sample_seed(seed, i)
        sample = synthesize(word, ranges, s, glyphs, canvas)
        img_name = f"sample_{i:05d}.pgm"
        imaging.write_pgm(out / img_name, sample.scene)
        tmpl_name = template_cache.get(word)
        if tmpl_name is None:
            tmpl_name = f"tmpl_{word}.tmpl.pgm"
            imaging.write_pgm(out / tmpl_name, sample.template.image)
            template_cache[word] = tmpl_name
        entries.append({
            "file": img_name,
            "template_file": tmpl_name,
            "transcript": word,
            "quad": sample.quad.flat(),
            "seed": s,
            "gaps": [[int(a), int(b)] for a, b in sample.gaps],
            "flat_extents": [int(v) for v in sample.flat_extents],
        })
    manifest = {
        "version": 1,
        "codec": alphabet,
        "canvas": [int(canvas[0]), int(canvas[1])],
        "domain": [int(DOMAIN[0]), int(DOMAIN[1])],
        "ranges": ranges.to_json(),
        "master_seed": int(seed),
        "entries": entries,
    }
    with open(out / MANIFEST_NAME, "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return manifest


def load_manifest(dataset_dir) -> dict:
    with open(Path(dataset_dir) / MANIFEST_NAME) as f:
        return json.load(f)


@dataclass
class Dataset:
    """Manifest plus eagerly loaded images (float32)."""

    dir: Path
    manifest: dict
    scenes: np.ndarray      # (N, H, W)
    templates: np.ndarray   # (N, 32, 256)
    quads: np.ndarray       # (N, 4, 2)
    transcripts: list

    def __len__(self) -> int:
        return len(self.transcripts)


def load_dataset(dataset_dir) -> Dataset:
    d = Path(dataset_dir)
    manifest = load_manifest(d)
    entries = manifest["entries"]
    ch, cw = manifest["canvas"]
    n = len(entries)
    scenes = np.zeros((n, ch, cw), dtype=np.float32)
    dh, dw = manifest["domain"]
    templates_arr = np.zeros((n, dh, dw), dtype=np.float32)
    quads = np.zeros((n, 4, 2))
    transcripts = []
    tmpl_cache: dict[str, np.ndarray] = {}
    for i, e in enumerate(entries):
        scenes[i] = imaging.read_pgm(d / e["file"])
        t = tmpl_cache.get(e["template_file"])
        if t is None:
            t = imaging.read_pgm(d / e["template_file"]).astype(np.float32)
            tmpl_cache[e["template_file"]] = t
        templates_arr[i] = t
        quads[i] = np.asarray(e["quad"], dtype=np.float64).reshape(4, 2)
        transcripts.append(e["transcript"])
    return Dataset(d, manifest, scenes, templates_arr, quads, transcripts)
