"""Minimal deterministic SVG line plots for sweep tables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .errors import SchemaMismatch

BLUE = "#0072BD"
ORANGE = "#D95319"
YELLOW = "#EDB120"
PURPLE = "#7E2F8E"
GREEN = "#77AC30"
CYCLE = (BLUE, ORANGE, YELLOW, PURPLE, GREEN)

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=30, bottom=50)


@dataclass
class Series:
    label: str
    x: list
    y: list
    color: str


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t / step) * step)
        t += step
    return ticks


def _fmt(v: float) -> str:
    s = f"{v:.6g}"
    return "0" if s in ("-0", "0") else s


def _panel(out: list, series: list, x0: float, y0: float, w: float, h: float, xlabel: str, ylabel: str):
    xs = [v for s in series for v in s.x if math.isfinite(v)]
    ys = [v for s in series for v, u in zip(s.y, s.x) if math.isfinite(v) and math.isfinite(u)]
    if not xs or not ys:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def px(v):
        return x0 + (v - xlo) / (xhi - xlo) * w

    def py(v):
        return y0 + h - (v - ylo) / (yhi - ylo) * h

    out.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{w:.2f}" height="{h:.2f}" fill="none" stroke="#000"/>')
    for t in nice_ticks(xlo, xhi):
        if xlo <= t <= xhi:
            X = px(t)
            out.append(f'<line x1="{X:.2f}" y1="{y0 + h:.2f}" x2="{X:.2f}" y2="{y0 + h + 5:.2f}" stroke="#000"/>')
            out.append(f'<text x="{X:.2f}" y="{y0 + h + 18:.2f}" font-size="11" text-anchor="middle">{_fmt(t)}</text>')
    for t in nice_ticks(ylo, yhi):
        if ylo <= t <= yhi:
            Y = py(t)
            out.append(f'<line x1="{x0 - 5:.2f}" y1="{Y:.2f}" x2="{x0:.2f}" y2="{Y:.2f}" stroke="#000"/>')
            out.append(f'<text x="{x0 - 8:.2f}" y="{Y + 4:.2f}" font-size="11" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{x0 + w / 2:.2f}" y="{y0 + h + 38:.2f}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="{x0 - 52:.2f}" y="{y0 + h / 2:.2f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 {x0 - 52:.2f} {y0 + h / 2:.2f})">{escape(ylabel)}</text>'
    )
    for k, s in enumerate(series):
        segs, cur = [], []
        for u, v in zip(s.x, s.y):
            if math.isfinite(u) and math.isfinite(v):
                cur.append(f"{px(u):.2f},{py(v):.2f}")
            elif cur:
                segs.append(cur)
                cur = []
        if cur:
            segs.append(cur)
        for seg in segs:
            out.append(f'<polyline fill="none" stroke="{s.color}" stroke-width="1.8" points="{" ".join(seg)}"/>')
        ly = y0 + 14 + 16 * k
        lx = x0 + w - 130
        out.append(f'<line x1="{lx:.2f}" y1="{ly:.2f}" x2="{lx + 20:.2f}" y2="{ly:.2f}" stroke="{s.color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26:.2f}" y="{ly + 4:.2f}" font-size="11">{escape(s.label)}</text>')


def render(panels: list, title: str = "") -> str:
    """``panels`` is a list of (series, xlabel, ylabel); stacked vertically."""
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    total = MARGIN["top"] + len(panels) * (ph + MARGIN["bottom"])
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{total}" '
        f'viewBox="0 0 {WIDTH} {total}" font-family="sans-serif">',
        f'<rect width="{WIDTH}" height="{total}" fill="#fff"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="20" font-size="14" text-anchor="middle">{escape(title)}</text>')
    w = WIDTH - MARGIN["left"] - MARGIN["right"]
    for i, (series, xl, yl) in enumerate(panels):
        y0 = MARGIN["top"] + i * (ph + MARGIN["bottom"])
        _panel(out, series, MARGIN["left"], y0, w, ph, xl, yl)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def require(columns, header) -> None:
    missing = [c for c in columns if c not in header]
    if missing:
        raise SchemaMismatch(missing)


def _group(rows, key):
    groups = {}
    for r in rows:
        groups.setdefault(r.get(key), []).append(r)
    return groups


def transmission_plot(rows: list, header, xcol: str, xlabel: str, xscale: float = 1.0) -> str:
    """Isolation panel (one curve per delta) plus |t21|, |t12|, efficiency panel."""
    require([xcol, "isolation_db", "t21_mag", "t12_mag", "efficiency"], header)
    rows = sorted(rows, key=lambda r: r[xcol])
    iso = []
    for k, (delta, grp) in enumerate(sorted(_group(rows, "delta").items(), key=lambda kv: (kv[0] is None, kv[0] or 0))):
        label = "isolation" if delta is None else f"delta = {delta:g}"
        iso.append(Series(label, [r[xcol] * xscale for r in grp], [r["isolation_db"] for r in grp], CYCLE[k % len(CYCLE)]))
    first = sorted(_group(rows, "delta").items(), key=lambda kv: (kv[0] is None, kv[0] or 0))[0][1]
    x = [r[xcol] * xscale for r in first]
    trans = [
        Series("|t21|", x, [r["t21_mag"] for r in first], BLUE),
        Series("|t12|", x, [r["t12_mag"] for r in first], ORANGE),
        Series("efficiency", x, [r["efficiency"] for r in first], YELLOW),
    ]
    return render([(iso, xlabel, "isolation (dB)"), (trans, xlabel, "magnitude")])


def eigen_plot(rows: list, header) -> str:
    require(["lj_h", "f01_hz", "f02_hz"], header)
    rows = sorted(rows, key=lambda r: r["lj_h"])
    x = [r["lj_h"] * 1e9 for r in rows]
    series = [
        Series("first transition", x, [r["f01_hz"] / 1e9 for r in rows], BLUE),
        Series("second transition", x, [r["f02_hz"] / 1e9 for r in rows], ORANGE),
    ]
    return render([(series, "L_J (nH)", "frequency (GHz)")])
