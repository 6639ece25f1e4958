"""Enrichment analyses for meta-analytic datasets.

Evidence-gap maps, moderator Sankey flows, phylogenetic summaries,
co-authorship and country-coupling networks, and altmetric orchard
plots, all rendered as deterministic SVG and a single HTML report.
"""

__version__ = "0.1.0"
