"""Evidence gap map: x by y grid of bubbles."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

from maenrich.errors import InputError
from maenrich.render.svg import DARK, GREY, GRID, SvgDocument, diverging, el, fmt, points_attr, text
from maenrich.synthmap import EvidenceMapCell

SHAPES = ("circle", "square", "triangle", "diamond", "triangle-down", "hexagon")

LEFT, TOP, BOTTOM, LEGEND_W = 170.0, 50.0, 130.0, 240.0
DEFAULT_CELL = 80.0


class UnknownLevel(InputError):
    def __init__(self, axis: str, level: str):
        super().__init__(f"level {level!r} missing from the {axis} ordering")
        self.axis = axis
        self.level = level


def shape_glyph(shape: str, cx: float, cy: float, r: float, attrs: dict) -> str:
    if shape == "circle":
        return el("circle", {**attrs, "cx": cx, "cy": cy, "r": r})
    if shape == "square":
        s = r * math.sqrt(math.pi) / 2  # same area as the circle
        pts = [(cx - s, cy - s), (cx + s, cy - s), (cx + s, cy + s), (cx - s, cy + s)]
    elif shape in ("triangle", "triangle-down"):
        a = r * 1.55
        sign = 1 if shape == "triangle" else -1
        pts = [
            (cx + a * math.cos(math.radians(-90 * sign + 120 * i)), cy + a * math.sin(math.radians(-90 * sign + 120 * i)))
            for i in range(3)
        ]
    elif shape == "diamond":
        a = r * 1.25
        pts = [(cx, cy - a), (cx + a, cy), (cx, cy + a), (cx - a, cy)]
    else:
        a = r * 1.1
        pts = [(cx + a * math.cos(math.radians(60 * i)), cy + a * math.sin(math.radians(60 * i))) for i in range(6)]
    return el("polygon", {**attrs, "points": points_attr(pts)})


def render_gap_map(
    cells: Sequence[EvidenceMapCell],
    level_orders: Mapping[str, Sequence[str]],
    *,
    size_by: str = "studies",
    width: float | None = None,
    height: float | None = None,
    x_title: str = "",
    y_title: str = "",
    shape_title: str = "",
    title: str = "Evidence gap map",
) -> SvgDocument:
    """Full grid with a bubble per occupied cell.

    Bubble area is proportional to ``n_studies`` (or ``n_effects`` with
    ``size_by="effects"``); fill follows the diverging scale over pooled
    estimates, grey where there is no estimate; a third dimension maps to
    glyph shape.
    """
    xs = list(level_orders.get("x", []))
    ys = list(level_orders.get("y", []))
    shapes = list(level_orders.get("shape", []) or [])
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    si = {v: i for i, v in enumerate(shapes)}
    for c in cells:
        if c.x_level not in xi:
            raise UnknownLevel("x", c.x_level)
        if c.y_level not in yi:
            raise UnknownLevel("y", c.y_level)
        if c.shape_level is not None and c.shape_level not in si:
            raise UnknownLevel("shape", c.shape_level)

    nx, ny = max(len(xs), 1), max(len(ys), 1)
    if width is None and height is None:
        cell = DEFAULT_CELL
    else:
        cw = ((width or 0) - LEFT - LEGEND_W) / nx if width else math.inf
        ch = ((height or 0) - TOP - BOTTOM) / ny if height else math.inf
        cell = max(min(cw, ch), 12.0)
    W = width or LEFT + nx * cell + LEGEND_W
    H = height or max(TOP + ny * cell + BOTTOM, TOP + 260.0 + 18 * len(shapes))
    doc = SvgDocument(W, H, title, f"{len(cells)} occupied cells on a {len(xs)} x {len(ys)} grid")
    doc.add(text(W / 2, 24, title, font_size=15, text_anchor="middle", font_weight="bold"))

    x0, y0 = LEFT, TOP
    gx, gy = len(xs) * cell, len(ys) * cell
    for i in range(len(xs) + 1):
        doc.add(el("line", {"class": "grid", "x1": x0 + i * cell, "y1": y0, "x2": x0 + i * cell, "y2": y0 + gy, "stroke": GRID}))
    for j in range(len(ys) + 1):
        doc.add(el("line", {"class": "grid", "x1": x0, "y1": y0 + j * cell, "x2": x0 + gx, "y2": y0 + j * cell, "stroke": GRID}))
    for i, lvl in enumerate(xs):
        cx = x0 + (i + 0.5) * cell
        doc.add(text(cx, y0 + gy + 12, lvl, text_anchor="end", transform=f"rotate(-45 {fmt(cx)} {fmt(y0 + gy + 12)})"))
    for j, lvl in enumerate(ys):
        doc.add(text(x0 - 8, y0 + (j + 0.5) * cell + 4, lvl, text_anchor="end"))
    if x_title:
        doc.add(text(x0 + gx / 2, H - 12, x_title, font_size=12, text_anchor="middle", font_weight="bold"))
    if y_title:
        doc.add(text(16, y0 + gy / 2, y_title, font_size=12, text_anchor="middle", font_weight="bold",
                     transform=f"rotate(-90 16 {fmt(y0 + gy / 2)})"))

    def count(c: EvidenceMapCell) -> int:
        return c.n_effects if size_by == "effects" else c.n_studies

    max_count = max((count(c) for c in cells), default=1)
    estimates = [abs(c.pooled.estimate) for c in cells if c.pooled is not None]
    limit = max(estimates, default=0.0)
    per_cell: dict[tuple[str, str], list[EvidenceMapCell]] = {}
    for c in cells:
        per_cell.setdefault((c.x_level, c.y_level), []).append(c)
    crowd = max((len(v) for v in per_cell.values()), default=1)
    rmax = 0.42 * cell / math.sqrt(crowd) if crowd > 1 else 0.42 * cell

    for (xl, yl), group in per_cell.items():
        group = sorted(group, key=lambda c: si.get(c.shape_level, -1))
        cx0 = x0 + (xi[xl] + 0.5) * cell
        cy = y0 + (yi[yl] + 0.5) * cell
        n = len(group)
        for k, c in enumerate(group):
            cx = cx0 + (k - (n - 1) / 2) * (cell / n) if n > 1 else cx0
            r = rmax * math.sqrt(count(c) / max_count)
            fill = GREY if c.pooled is None else diverging(c.pooled.estimate, limit)
            shape = SHAPES[si[c.shape_level] % len(SHAPES)] if c.shape_level is not None else "circle"
            attrs = {
                "class": "glyph",
                "data-x": c.x_level,
                "data-y": c.y_level,
                "data-shape": c.shape_level,
                "data-studies": str(c.n_studies),
                "data-effects": str(c.n_effects),
                "fill": fill,
                "stroke": DARK,
                "stroke-width": 0.8,
            }
            doc.add(shape_glyph(shape, cx, cy, r, attrs))
            label = f"{c.n_studies}/{c.n_effects}"
            doc.add(text(cx, cy + rmax + 2 if n == 1 else cy + r + 10, label, font_size=8,
                         text_anchor="middle", **{"class": "cell-label"}))

    _legend(doc, x0 + gx + 24, y0, max_count, limit, shapes, size_by, shape_title, rmax)
    return doc


def _legend(doc, lx, ly, max_count, limit, shapes, size_by, shape_title, rmax):
    doc.add(text(lx, ly + 4, f"Bubble area: number of {size_by}", font_size=10, font_weight="bold"))
    doc.add(text(lx, ly + 18, "Labels: studies/effects", font_size=9))
    y = ly + 30
    for n in sorted({1, max(1, max_count // 2), max_count}):
        r = min(rmax, 24.0) * math.sqrt(n / max_count)
        doc.add(el("circle", {"class": "legend", "cx": lx + 24, "cy": y + 24 - r, "r": r,
                              "fill": "none", "stroke": DARK}))
        doc.add(text(lx + 56, y + 24 - r + 4, str(n), font_size=9))
        y += 2 * r + 6
    y += 14
    doc.add(text(lx, y, "Mean effect", font_size=10, font_weight="bold"))
    y += 8
    for i in range(5):
        v = -limit + i * (2 * limit / 4) if limit > 0 else 0.0
        doc.add(el("rect", {"class": "legend", "x": lx + i * 22, "y": y, "width": 22, "height": 12,
                            "fill": diverging(v, limit), "stroke": GRID}))
    doc.add(text(lx, y + 26, fmt(-limit), font_size=9))
    doc.add(text(lx + 110, y + 26, fmt(limit), font_size=9, text_anchor="end"))
    doc.add(el("rect", {"class": "legend", "x": lx + 120, "y": y, "width": 12, "height": 12, "fill": GREY}))
    doc.add(text(lx + 136, y + 10, "n/a", font_size=9))
    y += 46
    if shapes:
        doc.add(text(lx, y, shape_title or "Shape", font_size=10, font_weight="bold"))
        y += 14
        for i, s in enumerate(shapes):
            doc.add(shape_glyph(SHAPES[i % len(SHAPES)], lx + 10, y, 6,
                                {"class": "legend", "fill": "none", "stroke": DARK}))
            doc.add(text(lx + 24, y + 4, s, font_size=9))
            y += 18
