"""Minimal deterministic SVG line plots (polylines, markers, axes, labels)."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Figure"]


def _f(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / count
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(t) for t in np.arange(start, hi + 0.5 * step, step) if lo - 1e-12 <= t <= hi + 1e-12]


@dataclass
class Figure:
    """A single panel with data limits ``xlim`` x ``ylim``."""

    xlim: tuple[float, float]
    ylim: tuple[float, float]
    width: int = 640
    height: int = 480
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    margin: int = 56
    _items: list[str] = field(default_factory=list)

    def _px(self, x, y):
        x0, x1 = self.xlim
        y0, y1 = self.ylim
        m = self.margin
        px = m + (np.asarray(x, dtype=float) - x0) / (x1 - x0) * (self.width - 2 * m)
        py = self.height - m - (np.asarray(y, dtype=float) - y0) / (y1 - y0) * (self.height - 2 * m)
        return px, py

    def line(self, x, y, color: str = "#1f4e79", width: float = 1.2, dash: str | None = None) -> None:
        px, py = self._px(x, y)
        ok = np.isfinite(px) & np.isfinite(py)
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(px[ok], py[ok]))
        if not pts:
            return
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self._items.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{extra} '
                           f'points="{pts}"/>')

    def markers(self, x, y, color: str = "#b22222", radius: float = 3.5) -> None:
        px, py = self._px(x, y)
        for a, b in zip(np.atleast_1d(px), np.atleast_1d(py)):
            self._items.append(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="{radius}" fill="{color}"/>')

    def text(self, x, y, label: str, size: int = 11) -> None:
        px, py = self._px(x, y)
        self._items.append(f'<text x="{_f(float(px))}" y="{_f(float(py))}" font-size="{size}" '
                           f'font-family="sans-serif">{escape(label)}</text>')

    def hline(self, y: float, color: str = "#888888") -> None:
        self.line(self.xlim, [y, y], color=color, width=0.8, dash="4 3")

    def to_string(self) -> str:
        m, W, H = self.margin, self.width, self.height
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}">',
               f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
               f'<rect x="{m}" y="{m}" width="{W - 2 * m}" height="{H - 2 * m}" fill="none" '
               'stroke="black" stroke-width="0.8"/>']
        for t in _ticks(*self.xlim):
            px, _ = self._px(t, self.ylim[0])
            out.append(f'<text x="{_f(float(px))}" y="{H - m + 16}" font-size="10" text-anchor="middle" '
                       f'font-family="sans-serif">{t:g}</text>')
        for t in _ticks(*self.ylim):
            _, py = self._px(self.xlim[0], t)
            out.append(f'<text x="{m - 6}" y="{_f(float(py) + 3)}" font-size="10" text-anchor="end" '
                       f'font-family="sans-serif">{t:g}</text>')
        if self.title:
            out.append(f'<text x="{W / 2:.1f}" y="{m / 2:.1f}" font-size="14" text-anchor="middle" '
                       f'font-family="sans-serif">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{W / 2:.1f}" y="{H - 12}" font-size="12" text-anchor="middle" '
                       f'font-family="sans-serif">{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(f'<text x="14" y="{H / 2:.1f}" font-size="12" text-anchor="middle" '
                       f'font-family="sans-serif" transform="rotate(-90 14 {H / 2:.1f})">'
                       f'{escape(self.ylabel)}</text>')
        out.append(f'<g clip-path="none">')
        out.extend(self._items)
        out.append('</g>')
        out.append('</svg>')
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_string())
