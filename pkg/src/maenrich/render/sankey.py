"""Sankey diagram of moderator composition."""

from __future__ import annotations

from maenrich.render.svg import DARK, SvgDocument, el, palette, path_d, text
from maenrich.synthmap import SankeyGraph

NODE_W = 14.0
PAD = 8.0


def render_sankey(
    graph: SankeyGraph,
    *,
    width: float = 900.0,
    height: float = 520.0,
    title: str = "Moderator flows",
) -> SvgDocument:
    """Columns of node bars with ribbons between adjacent columns.

    Bar height and ribbon thickness are proportional to row counts; the
    vertical order is the node order from :func:`sankey_flows`. Ribbons
    take the colour of their source node.
    """
    cols = list(graph.columns)
    doc = SvgDocument(width, height, title, f"{len(graph.links)} flows across {len(cols)} moderators")
    doc.add(text(width / 2, 24, title, font_size=15, text_anchor="middle", font_weight="bold"))
    top, bottom, left, right = 60.0, 30.0, 40.0, 170.0
    if not cols:
        return doc
    per_col = {c: graph.column_nodes(c) for c in cols}
    total = max((sum(n.count for n in ns) for ns in per_col.values()), default=0)
    max_nodes = max(len(ns) for ns in per_col.values())
    usable = height - top - bottom - PAD * max(max_nodes - 1, 0)
    scale = usable / total if total else 0.0
    step = (width - left - right - NODE_W) / max(len(cols) - 1, 1)

    pos: dict[tuple[str, str], tuple[float, float, float]] = {}  # x, y, h
    colour: dict[tuple[str, str], str] = {}
    for ci, c in enumerate(cols):
        x = left + ci * step
        y = top
        anchor = "start" if ci == 0 else "end" if ci == len(cols) - 1 else "middle"
        hx = x if ci == 0 else x + NODE_W if ci == len(cols) - 1 else x + NODE_W / 2
        doc.add(text(hx, top - 14, c, font_size=12, text_anchor=anchor, font_weight="bold"))
        for ni, node in enumerate(per_col[c]):
            h = node.count * scale
            pos[node.id] = (x, y, h)
            colour[node.id] = palette(ni)
            y += h + PAD

    out_off = {k: 0.0 for k in pos}
    in_off = {k: 0.0 for k in pos}
    ribbons = []
    for link in graph.links:
        sx, sy, _ = pos[link.source]
        tx, ty, _ = pos[link.target]
        t = link.weight * scale
        y1 = sy + out_off[link.source]
        y2 = ty + in_off[link.target]
        out_off[link.source] += t
        in_off[link.target] += t
        xa, xb = sx + NODE_W, tx
        mid = (xa + xb) / 2
        d = path_d([
            ("M", xa, y1),
            ("C", mid, y1, mid, y2, xb, y2),
            ("L", xb, y2 + t),
            ("C", mid, y2 + t, mid, y1 + t, xa, y1 + t),
            ("Z",),
        ])
        ribbons.append(el("path", {
            "class": "ribbon",
            "d": d,
            "fill": colour[link.source],
            "fill-opacity": 0.45,
            "stroke": "none",
            "data-source": f"{link.source[0]}={link.source[1]}",
            "data-target": f"{link.target[0]}={link.target[1]}",
            "data-weight": str(link.weight),
        }, children=[el("title", None, f"{link.source[1]} -> {link.target[1]}: {link.weight}")]))
    doc.extend(ribbons)

    for c in cols:
        last = c == cols[-1]
        for node in per_col[c]:
            x, y, h = pos[node.id]
            doc.add(el("rect", {"class": "node", "x": x, "y": y, "width": NODE_W, "height": h,
                                "fill": colour[node.id], "stroke": DARK, "stroke-width": 0.6,
                                "data-count": str(node.count)}))
            lx = x - 6 if last else x + NODE_W + 6
            doc.add(text(lx, y + h / 2 + 4, f"{node.level} ({node.count})", font_size=10,
                         text_anchor="end" if last else "start"))
    return doc
