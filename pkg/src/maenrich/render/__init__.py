"""Deterministic SVG figures and the HTML report."""

from maenrich.render.chord import ChordArc, chord_layout, render_chord
from maenrich.render.gapmap import UnknownLevel, render_gap_map
from maenrich.render.layout import convex_hull, fruchterman_reingold
from maenrich.render.network import render_network
from maenrich.render.orchard import MetricMissing, render_orchard
from maenrich.render.report import NothingToReport, ReportArtifacts, Table, build_report
from maenrich.render.sankey import render_sankey
from maenrich.render.svg import DIVERGING, PALETTE, SvgDocument, XorShift64Star
from maenrich.render.tree import TipAnnotation, UnknownSpecies, render_tree

__all__ = [
    "ChordArc", "DIVERGING", "MetricMissing", "NothingToReport", "PALETTE", "ReportArtifacts",
    "SvgDocument", "Table", "TipAnnotation", "UnknownLevel", "UnknownSpecies", "XorShift64Star",
    "build_report", "chord_layout", "convex_hull", "fruchterman_reingold", "render_chord",
    "render_gap_map", "render_network", "render_orchard", "render_sankey", "render_tree",
]
