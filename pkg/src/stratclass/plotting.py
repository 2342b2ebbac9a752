"""Decision-boundary figures written as plain SVG text.

The canvas shows sgn(h) on a regular grid of cells, the original points
coloured by label, and an arrow x -> z for every point that moved.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import ConfigError
from .models import ScoreModel
from .response import moved_mask

POS_FILL = "#dbe9f6"
NEG_FILL = "#f7dede"
POS_POINT = "#1f5fa8"
NEG_POINT = "#b22222"
ARROW = "#333333"


@dataclass(frozen=True)
class FigureSpec:
    xlim: tuple = (-4.0, 4.0)
    ylim: tuple = (-3.0, 3.0)
    resolution: tuple = (160, 120)
    width: int = 480
    height: int = 360
    show_points: bool = True
    show_arrows: bool = True
    point_radius: float = 2.5

    def __post_init__(self):
        nx, ny = self.resolution
        if nx < 2 or ny < 2:
            raise ValueError("figure resolution must be at least 2 per axis")
        if not (self.xlim[0] < self.xlim[1] and self.ylim[0] < self.ylim[1]):
            raise ValueError("figure axis ranges must be increasing")
        if self.width < 1 or self.height < 1:
            raise ValueError("figure size must be positive")


def fit_limits(X, pad: float = 0.5) -> tuple[tuple, tuple]:
    lo, hi = X.min(axis=0), X.max(axis=0)
    return (float(lo[0] - pad), float(hi[0] + pad)), (float(lo[1] - pad), float(hi[1] + pad))


def _fmt(v: float) -> str:
    return format(float(v), ".6g")


def sign_grid(model: ScoreModel, spec: FigureSpec) -> np.ndarray:
    """+1/-1 classification at cell centres, shape (ny, nx), row 0 at the top."""
    nx, ny = spec.resolution
    (x0, x1), (y0, y1) = spec.xlim, spec.ylim
    xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    ys = y1 - (np.arange(ny) + 0.5) * (y1 - y0) / ny
    gx, gy = np.meshgrid(xs, ys)
    return model.classify(np.column_stack([gx.ravel(), gy.ravel()])).reshape(ny, nx)


def render_svg(model: ScoreModel, data: Dataset, responses=None, spec: FigureSpec = FigureSpec(),
               title: str | None = None) -> str:
    if data.d != 2 or model.input_dim != 2:
        raise ConfigError("decision-boundary plots need 2-D data; disable plots for this "
                          "experiment (figure.enabled = false)")
    nx, ny = spec.resolution
    W, H = spec.width, spec.height
    (x0, x1), (y0, y1) = spec.xlim, spec.ylim
    sx, sy = W / (x1 - x0), H / (y1 - y0)
    cw, ch = W / nx, H / ny

    def px(p):
        return (p[0] - x0) * sx, (y1 - p[1]) * sy

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           '<defs><marker id="head" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="5" '
           f'markerHeight="5" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="{ARROW}"/></marker></defs>']
    if title:
        out.append(f"<title>{title}</title>")
    out.append('<g class="regions" shape-rendering="crispEdges">')
    S = sign_grid(model, spec)
    for j in range(ny):
        row = S[j]
        # merge runs of equal sign into one rectangle
        starts = np.flatnonzero(np.r_[True, row[1:] != row[:-1]])
        ends = np.r_[starts[1:], nx]
        for a, b in zip(starts, ends):
            fill = POS_FILL if row[a] > 0 else NEG_FILL
            out.append(f'<rect x="{_fmt(a * cw)}" y="{_fmt(j * ch)}" width="{_fmt((b - a) * cw)}" '
                       f'height="{_fmt(ch)}" fill="{fill}" data-sign="{int(row[a])}"/>')
    out.append("</g>")

    if spec.show_arrows and responses is not None:
        Z = np.asarray(responses, dtype=np.float64)
        out.append('<g class="arrows">')
        for i in np.flatnonzero(moved_mask(data.X, Z)):
            (ax, ay), (bx, by) = px(data.X[i]), px(Z[i])
            out.append(f'<line x1="{_fmt(ax)}" y1="{_fmt(ay)}" x2="{_fmt(bx)}" y2="{_fmt(by)}" '
                       f'stroke="{ARROW}" stroke-width="0.8" marker-end="url(#head)" '
                       f'data-z="{float(Z[i, 0])!r},{float(Z[i, 1])!r}"/>')
        out.append("</g>")

    if spec.show_points:
        out.append('<g class="points">')
        for p, lab in zip(data.X, data.y):
            cx, cy = px(p)
            fill = POS_POINT if lab > 0 else NEG_POINT
            out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(spec.point_radius)}" '
                       f'fill="{fill}" data-label="{int(lab)}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_decision_boundary(model: ScoreModel, data: Dataset, responses=None,
                           spec: FigureSpec = FigureSpec(), path=None, title: str | None = None) -> str:
    """Render the figure and write it to ``path`` if given; returns the SVG text."""
    svg = render_svg(model, data, responses, spec, title)
    if path is not None:
        Path(path).write_text(svg)
    return svg
