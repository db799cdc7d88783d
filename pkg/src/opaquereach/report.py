"""Verification reports: JSON, text tables, vertex CSV and SVG pictures.

A report is a plain, JSON-serialisable record of one command run: one entry
per horizon plus an aggregate status.  Serialisation rounds floats to nine
decimals so that to_json / from_json round-trips exactly, and the SVG
renderer formats every coordinate with a fixed precision on a fixed canvas,
which makes repeated runs byte-identical and lets tests pin hashes.

Wall-clock timings live under a single "timing" key so consumers that want
reproducible documents can drop that one field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

__all__ = ["Entry", "Report", "aggregate_status", "exit_code_for",
           "from_json", "to_json", "to_text", "vertices_csv", "witness_dict",
           "render_svg"]

_STATUS_ORDER = ("FAILS", "UNKNOWN", "HOLDS")
_EXIT = {"HOLDS": 0, "FAILS": 1, "UNKNOWN": 2}

SVG_WIDTH = 640
SVG_HEIGHT = 480
_SVG_MARGIN = 48.0

_STYLES = {
    "secret": 'fill="#d9534f" fill-opacity="0.40" stroke="#8a1f1b" stroke-width="1.5"',
    "nonsecret": 'fill="#5bc0de" fill-opacity="0.40" stroke="#1b6d8a" stroke-width="1.5"',
    "pruned": 'fill="#5cb85c" fill-opacity="0.40" stroke="#2d6a2d" stroke-width="1.5"',
}


@dataclass(frozen=True)
class Entry:
    """Result at one horizon."""

    k: int
    status: str
    distance: float | None = None
    radius: float | None = None
    witness: dict | None = None
    note: str = ""


@dataclass(frozen=True)
class Report:
    command: str
    mode: str
    scenario: str
    entries: tuple = ()
    status: str = "UNKNOWN"
    cost_prediction: float | None = None
    timing: dict = field(default_factory=dict)

    @property
    def exit_code(self):
        return _EXIT[self.status]


def aggregate_status(statuses):
    """FAILS beats UNKNOWN beats HOLDS; empty input is UNKNOWN."""
    names = [getattr(s, "value", s) for s in statuses]
    for worst in _STATUS_ORDER[:2]:
        if worst in names:
            return worst
    return "HOLDS" if names else "UNKNOWN"


def exit_code_for(status):
    return _EXIT[getattr(status, "value", status)]


def witness_dict(w):
    """Flatten a failure witness into JSON-native types."""
    if w is None:
        return None
    out = {"output": _round(np.asarray(w.output)),
           "distance": _round(w.distance),
           "nearest": None if w.nearest is None else _round(np.asarray(w.nearest))}
    traj = getattr(w, "trajectory", None)
    out["trajectory"] = None if traj is None else {
        "x0": _round(np.asarray(traj.x0)),
        "controls": _round(np.asarray(traj.controls))}
    return out


def _round(x):
    if isinstance(x, np.ndarray):
        return [_round(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, (float, np.floating)):
        return round(float(x), 9)
    if isinstance(x, (int, np.integer)):
        return int(x)
    return x


def to_json(r: Report) -> dict:
    return {
        "tool": "opaque-reach",
        "command": r.command,
        "mode": r.mode,
        "scenario": r.scenario,
        "status": r.status,
        "exit_code": r.exit_code,
        "entries": [
            {"k": e.k, "status": e.status, "distance": _round(e.distance),
             "radius": _round(e.radius), "witness": _round(e.witness),
             "note": e.note}
            for e in r.entries],
        "cost_prediction": _round(r.cost_prediction),
        "timing": _round(r.timing),
    }


def from_json(doc: dict) -> Report:
    entries = tuple(Entry(e["k"], e["status"], e.get("distance"),
                          e.get("radius"), e.get("witness"), e.get("note", ""))
                    for e in doc["entries"])
    return Report(doc["command"], doc["mode"], doc["scenario"], entries,
                  doc["status"], doc.get("cost_prediction"),
                  doc.get("timing", {}))


def to_text(r: Report) -> str:
    """Fixed-width table, one row per horizon."""
    show_radius = any(e.radius is not None for e in r.entries)
    head = ["k", "status", "radius" if show_radius else "distance", "note"]
    rows = [head]
    for e in r.entries:
        val = e.radius if show_radius else e.distance
        rows.append([str(e.k), e.status,
                     "-" if val is None else f"{val:.9g}", e.note])
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = [f"{r.command} [{r.mode}] {r.scenario}: {r.status}"]
    for row in rows:
        lines.append(("  ".join(c.ljust(w) for c, w in zip(row[:3], widths))
                      + ("  " + row[3] if row[3] else "")).rstrip())
    if r.cost_prediction is not None:
        lines.append(f"predicted cost {r.cost_prediction:.3g} s"
                     + (f", elapsed {r.timing['elapsed']:.3g} s"
                        if "elapsed" in r.timing else ""))
    return "\n".join(lines) + "\n"


def vertices_csv(named_sets) -> str:
    """Rows of (label, k, vertex index, coordinates) for each named set."""
    lines = []
    width = max(np.atleast_2d(v).shape[1] for _, _, v in named_sets)
    lines.append("set,k,vertex," + ",".join(f"c{i}" for i in range(width)))
    for label, k, verts in named_sets:
        for i, row in enumerate(np.atleast_2d(np.asarray(verts, dtype=float))):
            coords = [f"{x:.9g}" for x in row] + [""] * (width - len(row))
            lines.append(f"{label},{k},{i}," + ",".join(coords))
    return "\n".join(lines) + "\n"


def _ring(pts):
    """Convex outline of 2-D points in drawing order."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if len(pts) <= 2:
        return pts
    try:
        hull = ConvexHull(pts)
        return pts[hull.vertices]
    except QhullError:
        order = np.lexsort(pts.T[::-1])
        return pts[order]


def _fmt(x):
    return f"{x:.6f}"


class _Frame:
    """Maps data coordinates onto the fixed canvas, y axis flipped."""

    def __init__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        pad = np.maximum((hi - lo) * 0.1, 0.5)
        self.lo, self.hi = lo - pad, hi + pad
        self.sx = (SVG_WIDTH - 2 * _SVG_MARGIN) / (self.hi[0] - self.lo[0])
        self.sy = (SVG_HEIGHT - 2 * _SVG_MARGIN) / (self.hi[1] - self.lo[1])

    def map(self, p):
        x = _SVG_MARGIN + (p[0] - self.lo[0]) * self.sx
        y = SVG_HEIGHT - _SVG_MARGIN - (p[1] - self.lo[1]) * self.sy
        return x, y


def render_svg(named_sets, title="", arrow=None) -> str:
    """Draw labelled point sets on a fixed 640x480 canvas.

    named_sets is a list of (label, vertices); 2-D sets become convex
    polygons, 1-D sets become horizontal interval bars stacked per label.
    arrow, when given, is a (tail, head) pair drawn with the measured
    length, used for the opacity radius.
    """
    dims = {np.atleast_2d(np.asarray(v, dtype=float)).shape[1]
            for _, v in named_sets}
    if len(dims) != 1:
        raise ValueError("all sets in one picture must share a dimension")
    dim = dims.pop()
    if dim not in (1, 2):
        raise ValueError("pictures are drawn in 1 or 2 dimensions; project first")
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
             f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
             f'<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>']
    if title:
        parts.append(f'<text x="{_fmt(SVG_WIDTH / 2)}" y="24" font-size="15" '
                     f'text-anchor="middle" font-family="monospace">{title}</text>')
    if dim == 1:
        all_pts = np.vstack([np.column_stack([np.atleast_2d(v)[:, 0],
                                              np.zeros(np.atleast_2d(v).shape[0])])
                             for _, v in named_sets])
        frame = _Frame(np.vstack([all_pts, all_pts + [0.0, 1.0]]))
        for i, (label, verts) in enumerate(named_sets):
            verts = np.atleast_2d(np.asarray(verts, dtype=float))[:, 0]
            y = 0.25 + 0.5 * i / max(1, len(named_sets) - 1)
            x0, yc = frame.map((verts.min(), y))
            x1, _ = frame.map((verts.max(), y))
            style = _STYLES.get(label, _STYLES["secret"])
            parts.append(f'<rect x="{_fmt(x0)}" y="{_fmt(yc - 9.0)}" '
                         f'width="{_fmt(max(x1 - x0, 2.0))}" height="18.000000" '
                         f'{style}/>')
            parts.append(f'<text x="{_fmt(x0)}" y="{_fmt(yc - 14.0)}" '
                         f'font-size="12" font-family="monospace">{label}</text>')
        if arrow is not None:
            tail, head = (np.atleast_1d(np.asarray(p, dtype=float))[0] for p in arrow)
            tx, ty = frame.map((tail, 0.5))
            hx, _ = frame.map((head, 0.5))
            parts.append(_arrow_svg(tx, ty, hx, ty, abs(head - tail)))
    else:
        cloud = np.vstack([np.atleast_2d(np.asarray(v, dtype=float))
                           for _, v in named_sets])
        if arrow is not None:
            cloud = np.vstack([cloud, np.atleast_2d(arrow)])
        frame = _Frame(cloud)
        for label, verts in named_sets:
            ring = _ring(verts)
            style = _STYLES.get(label, _STYLES["secret"])
            if len(ring) == 1:
                x, y = frame.map(ring[0])
                parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4.000000" '
                             f'{style}/>')
                lx, ly = x, y - 8.0
            else:
                coords = " ".join(f"{_fmt(x)},{_fmt(y)}"
                                  for x, y in (frame.map(p) for p in ring))
                tag = "polygon" if len(ring) > 2 else "polyline"
                parts.append(f'<{tag} points="{coords}" {style}/>')
                lx, ly = frame.map(ring[0])
                ly -= 8.0
            parts.append(f'<text x="{_fmt(lx)}" y="{_fmt(ly)}" font-size="12" '
                         f'font-family="monospace">{label}</text>')
        if arrow is not None:
            tail, head = (np.asarray(p, dtype=float) for p in arrow)
            tx, ty = frame.map(tail)
            hx, hy = frame.map(head)
            parts.append(_arrow_svg(tx, ty, hx, hy,
                                    float(np.linalg.norm(head - tail))))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _arrow_svg(tx, ty, hx, hy, length):
    mid_x, mid_y = (tx + hx) / 2.0, (ty + hy) / 2.0 - 6.0
    return (f'<line x1="{_fmt(tx)}" y1="{_fmt(ty)}" x2="{_fmt(hx)}" y2="{_fmt(hy)}" '
            f'stroke="#333333" stroke-width="1.5" stroke-dasharray="6,3"/>\n'
            f'<circle cx="{_fmt(hx)}" cy="{_fmt(hy)}" r="3.000000" fill="#333333"/>\n'
            f'<text x="{_fmt(mid_x)}" y="{_fmt(mid_y)}" font-size="12" '
            f'font-family="monospace">r={length:.6g}</text>')
