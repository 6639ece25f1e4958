"""Chord diagram for country coupling."""

from __future__ import annotations

import math
from dataclasses import dataclass

from maenrich.biblio import WeightedGraph
from maenrich.render.svg import DARK, SvgDocument, el, fmt, palette, path_d, text

GAP_DEG = 2.0


@dataclass(frozen=True)
class ChordArc:
    label: str
    strength: float
    start: float  # degrees clockwise from 12 o'clock
    end: float

    @property
    def span(self) -> float:
        return self.end - self.start


def chord_layout(graph: WeightedGraph, gap: float = GAP_DEG) -> list[ChordArc]:
    """Arc angles, strongest node first (ties by label).

    Each node is followed by a fixed gap; the remaining ``360 - n*gap``
    degrees are shared in proportion to strength.
    """
    strength = {n: 0.0 for n in graph.nodes}
    for (a, b), w in graph.edges.items():
        strength[a] += w
        strength[b] += w
    order = sorted(strength, key=lambda n: (-strength[n], n))
    total = sum(strength.values())
    free = 360.0 - gap * len(order)
    arcs = []
    angle = 0.0
    for n in order:
        span = free * strength[n] / total if total > 0 else free / len(order)
        arcs.append(ChordArc(n, strength[n], angle, angle + span))
        angle += span + gap
    return arcs


def _point(cx: float, cy: float, r: float, deg: float) -> tuple[float, float]:
    t = math.radians(deg)
    return cx + r * math.sin(t), cy - r * math.cos(t)


def _arc_to(cx, cy, r, a0, a1, sweep=1):
    x, y = _point(cx, cy, r, a1)
    large = 1 if abs(a1 - a0) > 180 else 0
    return ("A", float(r), float(r), 0, large, sweep, x, y)


def render_chord(
    graph: WeightedGraph,
    *,
    width: float = 760.0,
    height: float = 760.0,
    title: str = "Country coupling",
) -> SvgDocument:
    """Outer arcs per node and ribbons per edge, ribbon ends sized by weight."""
    arcs = chord_layout(graph)
    cx, cy = width / 2, height / 2 + 10
    r_out = min(width, height) / 2 - 110
    r_in = r_out - 16
    doc = SvgDocument(width, height, title, f"{len(arcs)} nodes, {len(graph.edges)} links")
    doc.add(text(width / 2, 24, title, font_size=15, text_anchor="middle", font_weight="bold"))
    colour = {a.label: palette(i) for i, a in enumerate(arcs)}

    # each node's arc is split among its links in arc order of the partner
    rank = {a.label: i for i, a in enumerate(arcs)}
    cursor = {a.label: a.start for a in arcs}
    unit = {a.label: (a.span / a.strength if a.strength > 0 else 0.0) for a in arcs}
    edges = sorted(graph.edges.items(), key=lambda kv: (rank[kv[0][0]], rank[kv[0][1]]))
    slots: dict[tuple[str, str], tuple[float, float]] = {}
    neighbours: dict[str, list[tuple[str, float]]] = {a.label: [] for a in arcs}
    for (x, y), w in graph.edges.items():
        neighbours[x].append((y, w))
        neighbours[y].append((x, w))
    for a in arcs:
        for p, w in sorted(neighbours[a.label], key=lambda pw: rank[pw[0]]):
            s = cursor[a.label]
            cursor[a.label] = s + w * unit[a.label]
            slots[(a.label, p)] = (s, cursor[a.label])

    for (a, b), w in edges:
        a0, a1 = slots[(a, b)]
        b0, b1 = slots[(b, a)]
        p0 = _point(cx, cy, r_in, a0)
        q0 = _point(cx, cy, r_in, b0)
        d = path_d([
            ("M", *p0),
            _arc_to(cx, cy, r_in, a0, a1),
            ("Q", float(cx), float(cy), *q0),
            _arc_to(cx, cy, r_in, b0, b1),
            ("Q", float(cx), float(cy), *p0),
            ("Z",),
        ])
        src = a if rank[a] < rank[b] else b
        doc.add(el("path", {"class": "ribbon", "d": d, "fill": colour[src], "fill-opacity": 0.5,
                            "stroke": "none", "data-source": a, "data-target": b, "data-weight": str(w)},
                   children=[el("title", None, f"{a} - {b}: {w}")]))

    for a in arcs:
        o0 = _point(cx, cy, r_out, a.start)
        i1 = _point(cx, cy, r_in, a.end)
        d = path_d([
            ("M", *o0),
            _arc_to(cx, cy, r_out, a.start, a.end),
            ("L", *i1),
            _arc_to(cx, cy, r_in, a.end, a.start, sweep=0),
            ("Z",),
        ])
        doc.add(el("path", {"class": "arc", "d": d, "fill": colour[a.label], "stroke": DARK, "stroke-width": 0.4,
                            "data-label": a.label, "data-start": fmt(a.start), "data-end": fmt(a.end)},
                   children=[el("title", None, f"{a.label}: strength {a.strength:g}")]))
        mid = (a.start + a.end) / 2
        lx, ly = _point(cx, cy, r_out + 8, mid)
        rot = mid - 90 if mid < 180 else mid + 90
        anchor = "start" if mid < 180 else "end"
        doc.add(text(lx, ly, a.label, font_size=10, text_anchor=anchor, dominant_baseline="middle",
                     transform=f"rotate({fmt(rot)} {fmt(lx)} {fmt(ly)})", **{"class": "arc-label"}))
    return doc
