"""Self-contained SVG error-bar plots.

Hand-rolled rather than delegated to a plotting stack so the output bytes
are a pure function of the table: fixed header, fixed float formatting,
no timestamps or library version strings.
"""

from __future__ import annotations

W, H = 720, 480
ML, MR, MT, MB = 70, 160, 40, 60

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def emit_plot(series: dict, xlabel: str, ylabel: str, title: str = "") -> str:
    """series: name -> list of (x, mean, std), sorted by x.

    Returns the SVG document; error bars are +-1 std and each point carries
    a text node "mean+-std" at 3 decimals.
    """
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" '
        'fill="none" stroke="#333" stroke-width="1"/>',
    ]
    xs = [x for pts in series.values() for (x, _, _) in pts]
    if xs:
        xlo, xhi = min(xs), max(xs)
        if xhi == xlo:
            xhi = xlo + 1.0
    else:
        xlo, xhi = 0.0, 1.0
    ylo, yhi = 0.0, 1.0
    pw, ph = W - ML - MR, H - MT - MB

    def px(x):
        return ML + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return MT + (1.0 - (y - ylo) / (yhi - ylo)) * ph

    for i in range(6):
        y = ylo + (yhi - ylo) * i / 5
        parts.append(
            f'<line x1="{ML}" y1="{_fmt(py(y))}" x2="{W - MR}" y2="{_fmt(py(y))}" '
            'stroke="#ddd" stroke-width="0.5"/>'
        )
        parts.append(
            f'<text x="{ML - 8}" y="{_fmt(py(y) + 4)}" font-size="12" '
            f'text-anchor="end" fill="#333">{y:.1f}</text>'
        )
    for x in sorted(set(xs)):
        parts.append(
            f'<text x="{_fmt(px(x))}" y="{H - MB + 18}" font-size="12" '
            f'text-anchor="middle" fill="#333">{x:g}</text>'
        )
    parts.append(
        f'<text x="{ML + pw / 2:.1f}" y="{H - 14}" font-size="14" '
        f'text-anchor="middle" fill="#000">{xlabel}</text>'
    )
    parts.append(
        f'<text x="18" y="{MT + ph / 2:.1f}" font-size="14" text-anchor="middle" '
        f'fill="#000" transform="rotate(-90 18 {MT + ph / 2:.1f})">{ylabel}</text>'
    )
    if title:
        parts.append(
            f'<text x="{W / 2:.1f}" y="24" font-size="15" text-anchor="middle" '
            f'fill="#000">{title}</text>'
        )
    for si, (name, pts) in enumerate(sorted(series.items())):
        color = PALETTE[si % len(PALETTE)]
        coords = [(px(x), py(m)) for (x, m, s) in pts]
        if coords:
            path = " ".join(f"{_fmt(cx)},{_fmt(cy)}" for cx, cy in coords)
            parts.append(
                f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
        for (x, m, s), (cx, cy) in zip(pts, coords):
            y0, y1 = py(min(m + s, yhi)), py(max(m - s, ylo))
            parts.append(
                f'<line x1="{_fmt(cx)}" y1="{_fmt(y0)}" x2="{_fmt(cx)}" y2="{_fmt(y1)}" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
            parts.append(
                f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3.5" fill="{color}"/>'
            )
            parts.append(
                f'<text x="{_fmt(cx + 6)}" y="{_fmt(cy - 6)}" font-size="10" '
                f'fill="{color}">{m:.3f}&#177;{s:.3f}</text>'
            )
        ly = MT + 16 + 18 * si
        parts.append(
            f'<line x1="{W - MR + 10}" y1="{ly}" x2="{W - MR + 34}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{W - MR + 40}" y="{ly + 4}" font-size="12" fill="#000">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
