import math
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maenrich.biblio import WeightedGraph, connected_components
from maenrich.ingest import EffectRecord, parse_newick
from maenrich.meta import pool_random
from maenrich.render import (
    DIVERGING,
    PALETTE,
    MetricMissing,
    NothingToReport,
    ReportArtifacts,
    Table,
    TipAnnotation,
    UnknownLevel,
    UnknownSpecies,
    XorShift64Star,
    build_report,
    chord_layout,
    convex_hull,
    fruchterman_reingold,
    render_chord,
    render_gap_map,
    render_network,
    render_orchard,
    render_sankey,
    render_tree,
)
from maenrich.render.svg import GREY, fmt
from maenrich.synthmap import gap_map, sankey_flows

NS = "{http://www.w3.org/2000/svg}"


def parse(doc):
    return ET.fromstring(doc.to_string())


def by_class(root, cls):
    return [e for e in root.iter() if cls in (e.get("class") or "").split()]


def same_bytes(make):
    return make().to_string() == make().to_string()


# -- primitives --------------------------------------------------------------------


def test_fmt_is_fixed_two_decimals():
    assert fmt(1) == "1.00" and fmt(-0.001) == "0.00" and fmt(2.345678) == "2.35"


def test_palette_and_scale_constants():
    assert len(PALETTE) == 8 and len(set(PALETTE)) == 8
    assert DIVERGING == ("#2166AC", "#F7F7F7", "#B2182B")


def test_xorshift_reference_values():
    a, b = XorShift64Star(42), XorShift64Star(42)
    seq = [a.next_u64() for _ in range(5)]
    assert seq == [b.next_u64() for _ in range(5)]
    assert len(set(seq)) == 5
    assert all(0 <= XorShift64Star(s).random() < 1 for s in range(50))
    assert XorShift64Star(1).next_u64() != XorShift64Star(2).next_u64()


def test_convex_hull_square():
    pts = [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)]
    assert sorted(convex_hull(pts)) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_layout_is_seeded_and_bounded():
    edges = [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 2.0)]
    a = fruchterman_reingold(5, edges, seed=42)
    assert (a == fruchterman_reingold(5, edges, seed=42)).all()
    assert not (a == fruchterman_reingold(5, edges, seed=7)).all()
    assert a.min() >= -1e-12 and a.max() <= 1 + 1e-12


# -- gap map -------------------------------------------------------------------------


def _cells():
    recs = [EffectRecord("S1", "a", 0.2, 0.04, {"x": "I1", "y": "O1"}),
            EffectRecord("S2", "b", -0.4, 0.04, {"x": "I2", "y": "O2"})]
    gm = gap_map(recs, "x", "y")
    return gm.cells, gm.levels()


def test_gap_map_two_glyphs_full_grid():
    cells, levels = _cells()
    root = parse(render_gap_map(cells, levels))
    assert len(by_class(root, "glyph")) == 2
    assert len(by_class(root, "grid")) == (2 + 1) + (2 + 1)


def test_gap_map_empty_and_deterministic():
    root = parse(render_gap_map([], {"x": ["a", "b"], "y": ["c"]}))
    assert by_class(root, "glyph") == [] and len(by_class(root, "grid")) == 5
    cells, levels = _cells()
    assert same_bytes(lambda: render_gap_map(cells, levels))


def test_gap_map_unknown_level():
    cells, _ = _cells()
    with pytest.raises(UnknownLevel):
        render_gap_map(cells, {"x": ["I1"], "y": ["O1", "O2"]})


def test_gap_map_shapes_differ():
    recs = [EffectRecord("S1", "a", 0.2, 0.04, {"x": "I", "y": "O", "p": "adults"}),
            EffectRecord("S2", "b", 0.1, 0.04, {"x": "I", "y": "O", "p": "kids"})]
    gm = gap_map(recs, "x", "y", "p")
    glyphs = by_class(parse(render_gap_map(gm.cells, gm.levels())), "glyph")
    assert sorted(g.tag.replace(NS, "") for g in glyphs) == ["circle", "polygon"]


# -- sankey --------------------------------------------------------------------------


def _flows(pairs):
    return sankey_flows([EffectRecord(f"s{i}", f"e{i}", 0.1, 0.1, {"a": x, "b": y}) for i, (x, y) in enumerate(pairs)],
                        ["a", "b"])


def test_sankey_ribbon_count():
    root = parse(render_sankey(_flows([("h", "d"), ("e", "f")])))
    assert len(by_class(root, "ribbon")) == 2
    assert len(by_class(root, "node")) == 4


def test_sankey_equal_thickness_chain():
    root = parse(render_sankey(_flows([("h", "d")] * 3)))
    (ribbon,) = by_class(root, "ribbon")
    bars = by_class(root, "node")
    assert len({b.get("height") for b in bars}) == 1
    assert same_bytes(lambda: render_sankey(_flows([("h", "d"), ("e", "f")])))


# -- network -------------------------------------------------------------------------


TRIANGLE = WeightedGraph(["a", "b", "c"], {("a", "b"): 1, ("a", "c"): 1, ("b", "c"): 1})


def test_network_triangle():
    root = parse(render_network(TRIANGLE, connected_components(TRIANGLE)))
    nodes = by_class(root, "node")
    assert len(nodes) == 3 and len(by_class(root, "edge")) == 3
    assert len({n.get("fill") for n in nodes}) == 1


def test_network_two_components():
    g = WeightedGraph(["a", "b", "c", "d"], {("a", "b"): 1, ("c", "d"): 3})
    nodes = by_class(parse(render_network(g, connected_components(g))), "node")
    assert len({n.get("fill") for n in nodes}) == 2


def test_network_seed_contract():
    comps = connected_components(TRIANGLE)
    assert same_bytes(lambda: render_network(TRIANGLE, comps, seed=42))
    a = render_network(TRIANGLE, comps, seed=1).to_string()
    b = render_network(TRIANGLE, comps, seed=2).to_string()
    count = lambda s: (s.count('class="node"'), s.count('class="edge"'))  # noqa: E731
    assert count(a) == count(b)


# -- chord ---------------------------------------------------------------------------


def test_chord_two_nodes():
    g = WeightedGraph(["X", "Y"], {("X", "Y"): 1})
    root = parse(render_chord(g))
    assert len(by_class(root, "arc")) == 2 and len(by_class(root, "ribbon")) == 1


def test_chord_span_ratio():
    g = WeightedGraph(["X", "Y", "Z"], {("X", "Y"): 1, ("X", "Z"): 2})
    arcs = {a.label: a for a in chord_layout(g)}
    assert arcs["X"].strength == 3 and arcs["Y"].strength == 1
    assert arcs["X"].span / arcs["Y"].span == pytest.approx(3.0)
    assert arcs["X"].span == pytest.approx((360 - 6) * 3 / 6)
    root = parse(render_chord(g))
    start = {e.get("data-label"): float(e.get("data-start")) for e in by_class(root, "arc")}
    assert start["X"] == 0.0


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.tuples(st.sampled_from("ABCDEF"), st.sampled_from("ABCDEF")),
                       st.integers(1, 9), min_size=1, max_size=10))
def test_chord_spans_sum(edges):
    clean = {tuple(sorted(k)): w for k, w in edges.items() if k[0] != k[1]}
    nodes = sorted({n for k in clean for n in k}) or ["A"]
    arcs = chord_layout(WeightedGraph(nodes, clean))
    assert sum(a.span for a in arcs) == pytest.approx(360 - 2 * len(nodes), abs=0.01)
    assert [a.label for a in arcs] == sorted(nodes, key=lambda n: (-next(a.strength for a in arcs if a.label == n), n))
    assert ET.fromstring(render_chord(WeightedGraph(nodes, clean)).to_string()) is not None


# -- tree ----------------------------------------------------------------------------


def test_tree_glyphs_and_unknown_species():
    t = parse_newick("((A:1,B:1):1,C:2);")
    ann = {s: TipAnnotation(0.1 * i, -0.2, 0.5, "g") for i, s in enumerate("ABC")}
    root = parse(render_tree(t, ann))
    assert len(by_class(root, "tip-glyph")) == 3 and len(by_class(root, "whisker")) == 3
    with pytest.raises(UnknownSpecies):
        render_tree(t, {"Z": TipAnnotation(0, -1, 1)})
    assert same_bytes(lambda: render_tree(t, ann))


def test_tree_unannotated_tips_greyed():
    t = parse_newick("((A:1,B:1):1,C:2);")
    root = parse(render_tree(t, {"a": TipAnnotation(0.1, 0, 0.2, "x")}))
    labels = {e.text: e.get("fill") for e in by_class(root, "tip-label")}
    assert labels["B"] == labels["C"] == GREY and labels["A"] != GREY
    assert len(by_class(root, "tip-glyph")) == 1


# -- orchard -------------------------------------------------------------------------


def _orchard_effects(ys=(0.0, 0.5, 1.0)):
    return [EffectRecord(f"s{i}", f"e{i}", y, 0.04, {}) for i, y in enumerate(ys)]


def test_orchard_trunk_and_fruit():
    effs = _orchard_effects()
    pooled = pool_random(effs, "DL")
    root = parse(render_orchard(pooled, effs, {e.effect_key: 10.0 for e in effs}))
    fruit = by_class(root, "fruit")
    assert len(fruit) == 3 and len(by_class(root, "ci")) == 1 and len(by_class(root, "pi")) == 1
    assert len({f.get("r") for f in fruit}) == 1  # constant metric -> equal areas
    (pi,) = by_class(root, "pi")
    assert float(pi.get("data-low")) == pytest.approx(-6.382, abs=5e-3)
    assert float(pi.get("data-high")) == pytest.approx(7.382, abs=5e-3)


def test_orchard_threshold_is_strict():
    effs = _orchard_effects()
    pooled = pool_random(effs, "DL")
    scores = {"e0": 450.0, "e1": 400.0, "e2": 12.0}
    fruit = by_class(parse(render_orchard(pooled, effs, scores)), "fruit")
    assert sum(f.get("fill") == GREY for f in fruit) == 1


def test_orchard_missing_metric():
    effs = _orchard_effects()
    pooled = pool_random(effs, "DL")
    with pytest.raises(MetricMissing):
        render_orchard(pooled, effs, {"e0": 1.0, "e1": 2.0})
    root = parse(render_orchard(pooled, effs, {"e0": 1.0, "e1": 2.0}, allow_missing=True))
    assert len(by_class(root, "missing")) == 1


def test_orchard_area_proportional():
    effs = _orchard_effects((0.1, 0.2))
    pooled = pool_random(effs, "DL")
    fruit = by_class(parse(render_orchard(pooled, effs, {"e0": 100.0, "e1": 25.0})), "fruit")
    r = sorted(float(f.get("r")) for f in fruit)
    assert (r[1] / r[0]) ** 2 == pytest.approx(4.0, rel=0.01)


# -- report --------------------------------------------------------------------------


def test_report_sections_and_errors():
    cells, levels = _cells()
    svg = render_gap_map(cells, levels).to_string()
    html = build_report(ReportArtifacts(figures={"gap_map": svg}))
    assert html.count('<section class="figure"') == 1
    assert "http://" not in html.replace("http://www.w3.org/2000/svg", "")
    with pytest.raises(NothingToReport):
        build_report(ReportArtifacts())


def test_report_order_tables_and_footer():
    cells, levels = _cells()
    svg = render_gap_map(cells, levels).to_string()
    art = ReportArtifacts(
        figures={"sankey": svg, "gap_map": svg},
        tables={"loco": Table("LOCO", ["cluster", "delta"], [["a", math.nan], ["b", 0.123456]])},
        inputs={"data": "ab" * 32},
        seed=7,
    )
    html = build_report(art)
    assert html.index('id="figure-gap_map"') < html.index('id="figure-sankey"')
    assert "<td>NA</td>" in html and "0.1235" in html
    assert "ab" * 32 in html and "seed" in html and build_report(art) == html
