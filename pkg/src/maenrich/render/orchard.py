"""Orchard plot: pooled trunk with per-effect bubbles."""

from __future__ import annotations

import math
from typing import Callable, Mapping, Sequence

from maenrich.errors import InputError
from maenrich.ingest.records import EffectRecord
from maenrich.meta import PooledResult
from maenrich.render.svg import DARK, GREY, GRID, SvgDocument, XorShift64Star, el, nice_ticks, palette, text

DEFAULT_THRESHOLD = 400.0
MIN_RADIUS = 1.5
MAX_RADIUS = 16.0


class MetricMissing(InputError):
    def __init__(self, effect_key: str):
        super().__init__(f"no bubble metric for effect {effect_key!r}")
        self.effect_key = effect_key


def _metric_lookup(metric: Mapping[str, float | None] | Callable[[EffectRecord], float | None]):
    if callable(metric):
        return metric
    return lambda e: metric.get(e.effect_key)


def render_orchard(
    pooled: PooledResult | Mapping[str, PooledResult],
    effects: Sequence[EffectRecord],
    bubble_metric: Mapping[str, float | None] | Callable[[EffectRecord], float | None],
    threshold: float = DEFAULT_THRESHOLD,
    *,
    group_of: Callable[[EffectRecord], str] | None = None,
    allow_missing: bool = False,
    seed: int = 42,
    width: float = 820.0,
    panel_height: float = 150.0,
    metric_name: str = "Altmetric score",
    title: str = "Orchard plot",
) -> SvgDocument:
    """One horizontal panel per group (a single panel without grouping).

    Bubble area is proportional to the metric; bubbles whose metric is
    strictly above ``threshold`` are filled grey. With ``allow_missing``
    an effect without a metric is drawn as a hollow minimum-size ring.
    """
    lookup = _metric_lookup(bubble_metric)
    if group_of is None:
        groups = ["All effects"]
        members = {"All effects": list(effects)}
        trunks = {"All effects": pooled if isinstance(pooled, PooledResult) else None}
    else:
        members = {}
        for e in effects:
            members.setdefault(group_of(e), []).append(e)
        groups = sorted(members)
        trunks = {g: (pooled.get(g) if isinstance(pooled, Mapping) else None) for g in groups}

    values: dict[str, float | None] = {}
    for e in effects:
        m = lookup(e)
        if m is None and not allow_missing:
            raise MetricMissing(e.effect_key)
        values[e.effect_key] = None if m is None else float(m)
    known = [m for m in values.values() if m is not None]
    max_metric = max(known, default=0.0)

    lo = min([e.yi - 1.96 * math.sqrt(e.vi) for e in effects] + [0.0])
    hi = max([e.yi + 1.96 * math.sqrt(e.vi) for e in effects] + [0.0])
    for p in trunks.values():
        if p is None:
            continue
        lo, hi = min(lo, p.ci_low), max(hi, p.ci_high)
        if p.pi_low is not None:
            lo, hi = min(lo, p.pi_low), max(hi, p.pi_high)
    ticks = nice_ticks(lo, hi)
    lo, hi = min(lo, ticks[0]), max(hi, ticks[-1])

    left, right, top = 130.0, 30.0, 50.0
    height = top + panel_height * len(groups) + 90

    def ex(v: float) -> float:
        return left + (v - lo) / (hi - lo) * (width - left - right)

    doc = SvgDocument(width, height, title, f"{len(effects)} effects in {len(groups)} panel(s); grey above {threshold:g}")
    doc.add(text(width / 2, 24, title, font_size=15, text_anchor="middle", font_weight="bold"))
    bottom = top + panel_height * len(groups)
    for t in ticks:
        doc.add(el("line", {"class": "grid", "x1": ex(t), "y1": top, "x2": ex(t), "y2": bottom, "stroke": GRID}))
        doc.add(text(ex(t), bottom + 14, f"{t:g}", font_size=9, text_anchor="middle"))
    doc.add(el("line", {"class": "zero", "x1": ex(0), "y1": top, "x2": ex(0), "y2": bottom,
                        "stroke": DARK, "stroke-dasharray": "3 3"}))
    doc.add(text((left + width - right) / 2, bottom + 32, "Effect size", font_size=11, text_anchor="middle"))

    rng = XorShift64Star(seed)
    for gi, g in enumerate(groups):
        cy = top + panel_height * (gi + 0.5)
        colour = palette(gi)
        doc.add(text(left - 10, cy + 4, g, font_size=11, text_anchor="end", **{"class": "panel-label"}))
        for e in members[g]:
            jitter = rng.uniform(-0.35, 0.35) * panel_height
            m = values[e.effect_key]
            if m is None:
                attrs = {"class": "fruit missing", "r": MIN_RADIUS, "fill": "none", "stroke": DARK}
            else:
                r = MAX_RADIUS * math.sqrt(m / max_metric) if max_metric > 0 else MIN_RADIUS
                fill = GREY if m > threshold else colour
                attrs = {"class": "fruit", "r": max(MIN_RADIUS, r), "fill": fill, "fill-opacity": 0.6,
                         "stroke": DARK, "stroke-width": 0.4}
            doc.add(el("circle", {"cx": ex(e.yi), "cy": cy + jitter, **attrs},
                       children=[el("title", None, f"{e.effect_key}: {e.yi:.3f}; {metric_name} "
                                                   f"{'missing' if m is None else f'{m:g}'}")]))
        p = trunks[g]
        if p is None:
            continue
        if p.pi_low is not None:
            doc.add(el("line", {"class": "pi", "x1": ex(p.pi_low), "y1": cy, "x2": ex(p.pi_high), "y2": cy,
                                "data-low": p.pi_low, "data-high": p.pi_high,
                                "stroke": DARK, "stroke-width": 1.5}))
        doc.add(el("line", {"class": "ci", "x1": ex(p.ci_low), "y1": cy, "x2": ex(p.ci_high), "y2": cy,
                            "data-low": p.ci_low, "data-high": p.ci_high,
                            "stroke": DARK, "stroke-width": 6, "stroke-linecap": "round"}))
        doc.add(el("circle", {"class": "trunk", "cx": ex(p.estimate), "cy": cy, "r": 6, "fill": "#FFFFFF",
                              "stroke": DARK, "stroke-width": 2},
                   children=[el("title", None, f"pooled {p.estimate:.3f} [{p.ci_low:.3f}, {p.ci_high:.3f}], k={p.k}")]))

    ly = height - 24
    doc.add(el("circle", {"class": "legend", "cx": left, "cy": ly, "r": 6, "fill": GREY, "stroke": DARK,
                          "stroke-width": 0.4}))
    doc.add(text(left + 10, ly + 4, f"{metric_name} > {threshold:g}", font_size=10, **{"class": "legend"}))
    doc.add(text(left + 200, ly + 4, "thick bar: 95% CI; thin bar: prediction interval; bubble area: "
                 f"{metric_name}", font_size=10, **{"class": "legend"}))
    return doc
