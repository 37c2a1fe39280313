"""Self-contained SVG phase portraits and control-vs-angle plots."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .dynamics import TWO_PI
from .manifold import Manifold, as_manifold, manifold_curve

WIDTH, HEIGHT = 640, 480
MARGIN = 56
MAX_POINTS = 5000
MANIFOLD_STROKE = 2.0
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


class _Frame:
    """Linear map from a data rectangle onto the plotting area (y up)."""

    def __init__(self, xlo, xhi, ylo, yhi, equal_aspect=False):
        if equal_aspect:
            span = max(xhi - xlo, yhi - ylo)
            cx, cy = 0.5 * (xlo + xhi), 0.5 * (ylo + yhi)
            xlo, xhi, ylo, yhi = cx - span / 2, cx + span / 2, cy - span / 2, cy + span / 2
            side = min(WIDTH, HEIGHT) - 2 * MARGIN
            self.pw = self.ph = side
        else:
            self.pw, self.ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def px(self, x, y):
        sx = MARGIN + (np.asarray(x) - self.xlo) / (self.xhi - self.xlo) * self.pw
        sy = MARGIN + self.ph - (np.asarray(y) - self.ylo) / (self.yhi - self.ylo) * self.ph
        return sx, sy


def _points(sx, sy) -> str:
    return " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(sx, sy))


def _decimate(*cols):
    n = len(cols[0])
    if n <= MAX_POINTS:
        return cols
    idx = np.unique(np.r_[np.arange(0, n, math.ceil(n / MAX_POINTS)), n - 1])
    return tuple(np.asarray(c)[idx] for c in cols)


def _wrap_pieces(theta, y):
    """Split a series at the points where ``theta mod 2pi`` wraps around."""
    w = np.mod(theta, TWO_PI)
    if len(w) == 0:
        return []
    breaks = np.nonzero(np.abs(np.diff(w)) > math.pi)[0] + 1
    return [(a, b) for a, b in zip(np.split(w, breaks), np.split(np.asarray(y), breaks)) if len(a) > 1]


def _axes(f: _Frame, xlabel: str, ylabel: str, title: str, xticks, yticks) -> list[str]:
    x0, y0 = f.px(f.xlo, f.ylo)
    x1, y1 = f.px(f.xhi, f.yhi)
    out = [f'<rect x="{x0:.1f}" y="{y1:.1f}" width="{x1 - x0:.1f}" height="{y0 - y1:.1f}" '
           f'fill="none" stroke="#333" stroke-width="1"/>']
    for val, label in xticks:
        sx, _ = f.px(val, f.ylo)
        out.append(f'<line x1="{sx:.1f}" y1="{y0:.1f}" x2="{sx:.1f}" y2="{y0 + 5:.1f}" stroke="#333"/>')
        out.append(f'<text x="{sx:.1f}" y="{y0 + 18:.1f}" font-size="11" text-anchor="middle">{escape(label)}</text>')
    for val, label in yticks:
        _, sy = f.px(f.xlo, val)
        out.append(f'<line x1="{x0 - 5:.1f}" y1="{sy:.1f}" x2="{x0:.1f}" y2="{sy:.1f}" stroke="#333"/>')
        out.append(f'<text x="{x0 - 8:.1f}" y="{sy + 4:.1f}" font-size="11" text-anchor="end">{escape(label)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{y0 + 38:.1f}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="24" font-size="14" text-anchor="middle">{escape(title)}</text>')
    return out


def _ticks(lo, hi, n=5):
    return [(x, f"{x:.3g}") for x in np.linspace(lo, hi, n)]


_THETA_TICKS = [(k * math.pi / 2, lbl) for k, lbl in enumerate(("0", "π/2", "π", "3π/2", "2π"))]


def _document(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def render_phase_portrait(trajectories: Sequence, manifold, view: str = "polar") -> str:
    """Trajectories with the terminal manifold overlaid, in the (theta, r) plane or the (x, y) plane."""
    if view not in ("polar", "cartesian"):
        raise ValueError(f"unknown view {view!r}")
    m: Manifold = as_manifold(manifold)
    mth, mr = manifold_curve(m)
    rmax = max([float(np.max(mr))] + [float(np.max(tr.r)) for tr in trajectories if len(tr.r)])
    rmax *= 1.05
    body = []
    if view == "polar":
        f = _Frame(0.0, TWO_PI, 0.0, rmax)
        body += _axes(f, "θ (mod 2π)", "r", "Phase portrait, polar coordinates",
                      _THETA_TICKS, _ticks(0.0, rmax))
    else:
        f = _Frame(-rmax, rmax, -rmax, rmax, equal_aspect=True)
        body += _axes(f, "x = r cos θ", "y = r sin θ", "Phase portrait, Cartesian coordinates",
                      _ticks(-rmax, rmax), _ticks(-rmax, rmax))

    for k, tr in enumerate(trajectories):
        color = PALETTE[k % len(PALETTE)]
        theta, r = _decimate(np.asarray(tr.theta), np.asarray(tr.r))
        style = f'fill="none" stroke="{color}" stroke-width="1"'
        if view == "polar":
            body.append(f'<g class="trajectory" id="trajectory-{k}">')
            for th, rr in _wrap_pieces(theta, r):
                body.append(f'<polyline {style} points="{_points(*f.px(th, rr))}"/>')
            body.append("</g>")
            sx, sy = f.px(np.mod(theta[:1], TWO_PI), r[:1])
        else:
            sx, sy = f.px(r * np.cos(theta), r * np.sin(theta))
            body.append(f'<polyline class="trajectory" id="trajectory-{k}" {style} points="{_points(sx, sy)}"/>')
        if len(sx):
            body.append(f'<circle class="start" cx="{sx[0]:.3f}" cy="{sy[0]:.3f}" r="3.5" fill="{color}"/>')

    if view == "polar":
        msx, msy = f.px(mth, mr)
    else:
        msx, msy = f.px(mr * np.cos(mth), mr * np.sin(mth))
    body.append(f'<polyline class="manifold" fill="none" stroke="black" stroke-width="{MANIFOLD_STROKE}" '
                f'stroke-dasharray="6 3" points="{_points(msx, msy)}"/>')
    return _document(body)


def render_control_vs_theta(trajectories: Sequence) -> str:
    """Applied control against the wrapped angle, one series per trajectory."""
    us = [np.asarray(tr.u_applied) for tr in trajectories if len(tr.u_applied)]
    lo = min((float(u.min()) for u in us), default=-1.0)
    hi = max((float(u.max()) for u in us), default=1.0)
    if hi - lo < 1e-9:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    f = _Frame(0.0, TWO_PI, lo - pad, hi + pad)
    body = _axes(f, "θ (mod 2π)", "u", "Control versus angle", _THETA_TICKS, _ticks(lo - pad, hi + pad))
    for k, tr in enumerate(trajectories):
        color = PALETTE[k % len(PALETTE)]
        theta, u = _decimate(np.asarray(tr.theta), np.asarray(tr.u_applied))
        body.append(f'<g class="trajectory" id="trajectory-{k}">')
        for th, uu in _wrap_pieces(theta, u):
            body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{_points(*f.px(th, uu))}"/>')
        body.append("</g>")
    return _document(body)
