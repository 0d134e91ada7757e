"""Minimal static SVG line plots (no plotting dependency)."""
from __future__ import annotations

import numpy as np


def line_svg(x, y, title="", xlabel="", ylabel="", width=640, height=360, hlines=()):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pad = 48
    x0, x1 = float(x.min()), float(x.max())
    lo = min([float(y.min())] + [h for h, _ in hlines])
    hi = max([float(y.max())] + [h for h, _ in hlines])
    if x1 == x0:
        x1 = x0 + 1
    if hi == lo:
        hi = lo + 1

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)

    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="black"/>',
           f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1"/>']
    for h, colour in hlines:
        out.append(f'<line x1="{pad}" x2="{width - pad}" y1="{sy(h):.2f}" y2="{sy(h):.2f}" stroke="{colour}" stroke-dasharray="4 3"/>')
    out.append(f'<text x="{width / 2}" y="{pad / 2}" text-anchor="middle" font-size="14">{title}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" text-anchor="middle">{ylabel}</text>')
    out.append(f'<text x="{pad}" y="{height - pad + 16}" font-size="10">{x0:.3g}</text>')
    out.append(f'<text x="{width - pad}" y="{height - pad + 16}" font-size="10" text-anchor="end">{x1:.3g}</text>')
    out.append(f'<text x="{pad - 4}" y="{sy(lo):.2f}" font-size="10" text-anchor="end">{lo:.3g}</text>')
    out.append(f'<text x="{pad - 4}" y="{sy(hi):.2f}" font-size="10" text-anchor="end">{hi:.3g}</text>')
    out.append("</svg>\n")
    return "\n".join(out)
