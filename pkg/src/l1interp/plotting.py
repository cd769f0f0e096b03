"""Minimal self-contained SVG line plots (log or linear axes)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class _Series:
    kind: str
    xs: list
    ys: list
    err: list | None
    color: str
    dash: str | None
    label: str | None


@dataclass
class SvgPlot:
    title: str = ""
    xlabel: str = "p/n"
    ylabel: str = "risk"
    logx: bool = True
    logy: bool = True
    width: int = 640
    height: int = 440
    series: list = field(default_factory=list)

    margin_l = 70
    margin_r = 20
    margin_t = 40
    margin_b = 55

    def _color(self, color):
        return color or PALETTE[len(self.series) % len(PALETTE)]

    def line(self, xs, ys, *, color=None, dash=None, label=None):
        self.series.append(_Series("line", list(xs), list(ys), None, self._color(color), dash,
                                   label))
        return self

    def points(self, xs, ys, err=None, *, color=None, label=None):
        self.series.append(_Series("points", list(xs), list(ys),
                                   None if err is None else list(err), self._color(color), None,
                                   label))
        return self

    # -- geometry ---------------------------------------------------------
    def _ok(self, x, y):
        if not (math.isfinite(x) and math.isfinite(y)):
            return False
        return (x > 0 or not self.logx) and (y > 0 or not self.logy)

    def _bounds(self):
        xs, ys = [], []
        for s in self.series:
            for i, (x, y) in enumerate(zip(s.xs, s.ys)):
                if not self._ok(x, y):
                    continue
                xs.append(x)
                ys.append(y)
                if s.err is not None and math.isfinite(s.err[i]):
                    lo = y - s.err[i]
                    if lo > 0 or not self.logy:
                        ys.append(lo)
                    ys.append(y + s.err[i])
        if not xs:
            raise ValueError("nothing to plot")
        return self._pad(min(xs), max(xs), self.logx), self._pad(min(ys), max(ys), self.logy)

    @staticmethod
    def _pad(lo, hi, log):
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.04 * (hi - lo)
        return lo - pad, hi + pad

    def _map(self, v, rng, lo_px, hi_px, log):
        t = (math.log10(v) if log else v) - rng[0]
        return lo_px + (hi_px - lo_px) * t / (rng[1] - rng[0])

    @staticmethod
    def _ticks(rng, log):
        lo, hi = rng
        if log:
            return [10.0**k for k in range(math.ceil(lo), math.floor(hi) + 1)]
        step = 10 ** math.floor(math.log10((hi - lo) / 5))
        for m in (1, 2, 5, 10):
            if (hi - lo) / (step * m) <= 6:
                step *= m
                break
        first = math.ceil(lo / step) * step
        return [first + i * step for i in range(int((hi - first) / step) + 1)]

    # -- output ---------------------------------------------------------------
    def render(self) -> str:
        xr, yr = self._bounds()
        x0, x1 = self.margin_l, self.width - self.margin_r
        y0, y1 = self.height - self.margin_b, self.margin_t

        def px(x):
            return self._map(x, xr, x0, x1, self.logx)

        def py(y):
            return self._map(y, yr, y0, y1, self.logy)

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
               f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
               'font-family="sans-serif" font-size="12">',
               f'<rect width="{self.width}" height="{self.height}" fill="white"/>']
        if self.title:
            out.append(f'<text x="{self.width / 2:.1f}" y="22" text-anchor="middle" '
                       f'font-size="14">{escape(self.title)}</text>')
        out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
                   'fill="none" stroke="black"/>')
        for t in self._ticks(xr, self.logx):
            X = px(t)
            out.append(f'<line x1="{X:.2f}" y1="{y0}" x2="{X:.2f}" y2="{y0 + 5}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{y0 + 18}" text-anchor="middle">{t:g}</text>')
        for t in self._ticks(yr, self.logy):
            Y = py(t)
            out.append(f'<line x1="{x0 - 5}" y1="{Y:.2f}" x2="{x0}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{x0 - 8}" y="{Y + 4:.2f}" text-anchor="end">{t:g}</text>')
        out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{self.height - 12}" '
                   f'text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{escape(self.ylabel)}</text>')
        out.append(f'<clipPath id="plotarea"><rect x="{x0}" y="{y1}" width="{x1 - x0}" '
                   f'height="{y0 - y1}"/></clipPath>')
        out.append('<g clip-path="url(#plotarea)">')
        for s in self.series:
            pts = [(px(x), py(y), i) for i, (x, y) in enumerate(zip(s.xs, s.ys)) if self._ok(x, y)]
            if s.kind == "line":
                if len(pts) < 2:
                    continue
                path = " ".join(f"{X:.2f},{Y:.2f}" for X, Y, _ in pts)
                dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
                out.append(f'<polyline points="{path}" fill="none" stroke="{s.color}" '
                           f'stroke-width="1.6"{dash}/>')
            else:
                for X, Y, i in pts:
                    if s.err is not None and math.isfinite(s.err[i]) and s.err[i] > 0:
                        y, e = s.ys[i], s.err[i]
                        lo = py(y - e) if (y - e > 0 or not self.logy) else y0
                        hi = py(y + e)
                        out.append(f'<line x1="{X:.2f}" y1="{lo:.2f}" x2="{X:.2f}" y2="{hi:.2f}" '
                                   f'stroke="{s.color}"/>')
                    out.append(f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="3" fill="{s.color}"/>')
        out.append("</g>")
        ly = y1 + 14
        for s in self.series:
            if not s.label:
                continue
            lx = x1 - 170
            if s.kind == "line":
                dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
                out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                           f'stroke="{s.color}" stroke-width="1.6"{dash}/>')
            else:
                out.append(f'<circle cx="{lx + 11}" cy="{ly - 4}" r="3" fill="{s.color}"/>')
            out.append(f'<text x="{lx + 28}" y="{ly}">{escape(s.label)}</text>')
            ly += 16
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
