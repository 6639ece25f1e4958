"""Rectangular cladogram with per-tip effect estimates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from maenrich.errors import InputError
from maenrich.render.svg import DARK, GREY, GRID, SvgDocument, el, nice_ticks, palette, path_d, text
from maenrich.tree import PhyloTree, canonical_label


class UnknownSpecies(InputError):
    def __init__(self, label: str):
        super().__init__(f"annotated species {label!r} is not a tip of the tree")
        self.label = label


@dataclass(frozen=True)
class TipAnnotation:
    estimate: float
    ci_low: float
    ci_high: float
    group: str | None = None


def render_tree(
    tree: PhyloTree,
    annotations: Mapping[str, TipAnnotation],
    *,
    width: float = 900.0,
    row_height: float = 14.0,
    title: str = "Effects across the phylogeny",
) -> SvgDocument:
    """Branch lengths to scale on the left, effect panel on the right.

    Glyph colour comes from the annotation group (palette order follows
    sorted group names). Unannotated tips keep a grey label and no glyph.
    """
    tip_index = {canonical_label(tree.labels[t]): t for t in tree.tips()}
    ann: dict[int, TipAnnotation] = {}
    for label, a in annotations.items():
        node = tip_index.get(canonical_label(label))
        if node is None:
            raise UnknownSpecies(label)
        ann[node] = a
    groups = sorted({a.group for a in ann.values() if a.group is not None})
    gcol = {g: palette(i) for i, g in enumerate(groups)}

    order = tree.preorder()
    tips = [n for n in order if not tree.children(n)]
    depth = tree.depths()
    top, left = 60.0, 20.0
    height = top + row_height * max(len(tips), 1) + 70
    tree_w = width * 0.45
    label_w = 150.0
    panel_x0 = left + tree_w + label_w
    panel_x1 = width - 30.0
    max_depth = float(max(depth[tips])) if tips else 1.0
    sx = tree_w / max_depth if max_depth > 0 else 0.0

    y: dict[int, float] = {}
    for i, t in enumerate(tips):
        y[t] = top + row_height * (i + 0.5)
    for n in reversed(order):
        kids = tree.children(n)
        if kids:
            y[n] = (y[kids[0]] + y[kids[-1]]) / 2
    x = {n: left + depth[n] * sx for n in order}

    doc = SvgDocument(width, height, title, f"{len(tips)} tips, {len(ann)} annotated")
    doc.add(text(width / 2, 24, title, font_size=15, text_anchor="middle", font_weight="bold"))

    for n in order:
        kids = tree.children(n)
        if n != tree.root:
            p = tree.parent[n]
            doc.add(el("path", {"class": "branch", "d": path_d([("M", x[p], y[n]), ("L", x[n], y[n])]),
                                "stroke": DARK, "stroke-width": 1, "fill": "none"}))
        if len(kids) > 1:
            doc.add(el("path", {"class": "branch", "d": path_d([("M", x[n], y[kids[0]]), ("L", x[n], y[kids[-1]])]),
                                "stroke": DARK, "stroke-width": 1, "fill": "none"}))

    if ann:
        lo = min(a.ci_low for a in ann.values())
        hi = max(a.ci_high for a in ann.values())
    else:
        lo, hi = -1.0, 1.0
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    ticks = nice_ticks(lo, hi)
    lo, hi = min(lo, ticks[0]), max(hi, ticks[-1])

    def ex(v: float) -> float:
        return panel_x0 + (v - lo) / (hi - lo) * (panel_x1 - panel_x0)

    axis_y = top + row_height * len(tips) + 10
    for t in ticks:
        doc.add(el("line", {"class": "grid", "x1": ex(t), "y1": top, "x2": ex(t), "y2": axis_y, "stroke": GRID}))
        doc.add(text(ex(t), axis_y + 14, f"{t:g}", font_size=9, text_anchor="middle"))
    doc.add(el("line", {"class": "zero", "x1": ex(0), "y1": top, "x2": ex(0), "y2": axis_y,
                        "stroke": DARK, "stroke-dasharray": "3 3"}))
    doc.add(text((panel_x0 + panel_x1) / 2, axis_y + 32, "Effect size", font_size=11, text_anchor="middle"))

    for t in tips:
        a = ann.get(t)
        colour = gcol.get(a.group, DARK) if a else GREY
        doc.add(el("line", {"class": "leader", "x1": x[t], "y1": y[t], "x2": left + tree_w + 4, "y2": y[t],
                            "stroke": GRID, "stroke-dasharray": "1 2"}))
        doc.add(text(left + tree_w + 6, y[t] + 3, tree.labels[t] or "", font_size=9, fill=DARK if a else GREY,
                     font_style="italic", **{"class": "tip-label"}))
        if a is None:
            continue
        doc.add(el("line", {"class": "whisker", "x1": ex(a.ci_low), "y1": y[t], "x2": ex(a.ci_high), "y2": y[t],
                            "stroke": colour, "stroke-width": 1.2}))
        doc.add(el("circle", {"class": "tip-glyph", "cx": ex(a.estimate), "cy": y[t], "r": 3.5, "fill": colour},
                   children=[el("title", None, f"{tree.labels[t]}: {a.estimate:.3f} [{a.ci_low:.3f}, {a.ci_high:.3f}]")]))

    for i, g in enumerate(groups):
        ly = height - 24
        lx = left + i * 120
        doc.add(el("rect", {"class": "legend", "x": lx, "y": ly - 8, "width": 10, "height": 10, "fill": gcol[g]}))
        doc.add(text(lx + 14, ly + 1, g, font_size=10, **{"class": "legend"}))
    return doc
