"""Co-authorship network with cluster hulls."""

from __future__ import annotations

import math
from typing import Mapping

from maenrich.biblio import WeightedGraph, degree_centrality
from maenrich.render.layout import convex_hull, fruchterman_reingold
from maenrich.render.svg import DARK, SvgDocument, el, palette, points_attr, text

HULL_OPACITY = 0.4
N_LABELS = 12


def render_network(
    graph: WeightedGraph,
    clusters: Mapping[str, int],
    *,
    seed: int = 42,
    width: float = 900.0,
    height: float = 900.0,
    title: str = "Co-authorship network",
) -> SvgDocument:
    """Force-directed drawing; one palette colour per cluster.

    Clusters with two or more members get a translucent convex hull
    padded around their nodes. Node radius grows with the square root of
    strength (minimum 2 px); edge width is proportional to weight.
    """
    nodes = list(graph.nodes)
    index = {n: i for i, n in enumerate(nodes)}
    edges = [(index[a], index[b], float(w)) for (a, b), w in graph.edges.items()]
    unit = fruchterman_reingold(len(nodes), edges, seed=seed)
    margin = 50.0
    top = 40.0
    xy = {
        n: (margin + unit[i, 0] * (width - 2 * margin), top + margin + unit[i, 1] * (height - top - 2 * margin))
        for i, n in enumerate(nodes)
    }
    cent = degree_centrality(graph)
    max_strength = max((s for _, s in cent.values()), default=0) or 1
    rmax = 14.0
    radius = {n: max(2.0, rmax * math.sqrt(cent[n][1] / max_strength)) for n in nodes}
    max_w = max(graph.edges.values(), default=1) or 1

    n_clusters = len(set(clusters.values()))
    doc = SvgDocument(width, height, title, f"{len(nodes)} nodes, {len(graph.edges)} edges, {n_clusters} clusters")
    doc.add(text(width / 2, 24, title, font_size=15, text_anchor="middle", font_weight="bold"))

    members: dict[int, list[str]] = {}
    for n in nodes:
        members.setdefault(clusters[n], []).append(n)
    for cid in sorted(members):
        group = members[cid]
        if len(group) < 2:
            continue
        ring = []
        for n in group:
            x, y = xy[n]
            pad = radius[n] + 8.0
            ring += [(round(x + pad * math.cos(a * math.pi / 4), 6), round(y + pad * math.sin(a * math.pi / 4), 6))
                     for a in range(8)]
        hull = convex_hull(ring)
        doc.add(el("polygon", {"class": "hull", "points": points_attr(hull), "fill": palette(cid - 1),
                               "fill-opacity": HULL_OPACITY, "stroke": "none", "data-cluster": str(cid)}))

    for (a, b), w in graph.edges.items():
        (x1, y1), (x2, y2) = xy[a], xy[b]
        doc.add(el("line", {"class": "edge", "x1": x1, "y1": y1, "x2": x2, "y2": y2, "stroke": "#777777",
                            "stroke-opacity": 0.7, "stroke-width": 3.0 * w / max_w, "data-weight": str(w)}))
    for n in nodes:
        x, y = xy[n]
        doc.add(el("circle", {"class": "node", "cx": x, "cy": y, "r": radius[n], "fill": palette(clusters[n] - 1),
                              "stroke": DARK, "stroke-width": 0.6, "data-cluster": str(clusters[n])},
                   children=[el("title", None, f"{n} (degree {cent[n][0]}, strength {cent[n][1]})")]))
    ranked = sorted(nodes, key=lambda n: (-cent[n][1], n))[:N_LABELS]
    for n in sorted(ranked):
        x, y = xy[n]
        doc.add(text(x + radius[n] + 2, y - radius[n] - 1, n, font_size=9, **{"class": "node-label"}))
    return doc
