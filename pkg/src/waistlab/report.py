"""Serialization helpers: JSON-ready values, CSV tables and minimal SVG plots."""

import csv
import io
import json
import math

import numpy as np

__all__ = ["jsonable", "dumps", "write_csv", "svg_plot"]


def jsonable(obj):
    """Convert numpy scalars and arrays (recursively) to plain Python values.

    Non-finite floats become strings so the output is strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj):
    """Stable JSON text: sorted keys, shortest round-trip float repr."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False)


def write_csv(fh, header, rows):
    """Write a header row and data rows with ``.`` decimals and LF endings."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _ticks(lo, hi, num=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, num)


def svg_plot(x, y, yerr=None, title="", xlabel="", ylabel="", hline=None, width=640, height=400):
    """Single-curve SVG line plot with optional error bars and a horizontal reference line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    err = np.zeros_like(y) if yerr is None else np.asarray(yerr, dtype=float)
    left, right, top, bottom = 70, 20, 40, 50
    lo_y = float(np.min(y - err))
    hi_y = float(np.max(y + err))
    if hline is not None:
        lo_y, hi_y = min(lo_y, hline), max(hi_y, hline)
    pad = 0.05 * (hi_y - lo_y or 1.0)
    lo_y, hi_y = lo_y - pad, hi_y + pad
    lo_x, hi_x = float(np.min(x)), float(np.max(x))
    if hi_x == lo_x:
        hi_x = lo_x + 1.0
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (v - lo_x) / (hi_x - lo_x) * pw

    def py(v):
        return top + (hi_y - v) / (hi_y - lo_y) * ph

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
              f'viewBox="0 0 {width} {height}">\n')
    out.write(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    out.write(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{_esc(title)}</text>\n')
    out.write(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>\n')
    out.write(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>\n')
    for v in _ticks(lo_x, hi_x):
        out.write(f'<line x1="{px(v):.2f}" y1="{top + ph}" x2="{px(v):.2f}" y2="{top + ph + 5}" stroke="black"/>\n')
        out.write(f'<text x="{px(v):.2f}" y="{top + ph + 18}" text-anchor="middle" font-size="11">{v:.4g}</text>\n')
    for v in _ticks(lo_y, hi_y):
        out.write(f'<line x1="{left - 5}" y1="{py(v):.2f}" x2="{left}" y2="{py(v):.2f}" stroke="black"/>\n')
        out.write(f'<text x="{left - 8}" y="{py(v) + 4:.2f}" text-anchor="end" font-size="11">{v:.4g}</text>\n')
    out.write(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">'
              f'{_esc(xlabel)}</text>\n')
    out.write(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
              f'transform="rotate(-90 16 {top + ph / 2:.1f})">{_esc(ylabel)}</text>\n')
    if hline is not None:
        out.write(f'<line x1="{left}" y1="{py(hline):.2f}" x2="{left + pw}" y2="{py(hline):.2f}" '
                  f'stroke="gray" stroke-dasharray="6 4"/>\n')
    pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
    out.write(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>\n')
    for a, b, e in zip(x, y, err):
        if e > 0:
            out.write(f'<line x1="{px(a):.2f}" y1="{py(b - e):.2f}" x2="{px(a):.2f}" y2="{py(b + e):.2f}" '
                      f'stroke="firebrick"/>\n')
        out.write(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="steelblue"/>\n')
    out.write("</svg>\n")
    return out.getvalue()


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
