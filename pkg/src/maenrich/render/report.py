"""Single-file HTML report bundling figures and tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from html import escape
from typing import Any, Sequence

from maenrich import __version__
from maenrich.errors import InputError

FIGURE_ORDER = ("gap_map", "sankey", "network", "chord", "tree", "orchard")
FIGURE_TITLES = {
    "gap_map": "Evidence gap map",
    "sankey": "Moderator flows",
    "network": "Co-authorship network",
    "chord": "Country coupling",
    "tree": "Effects across the phylogeny",
    "orchard": "Orchard plot with impact bubbles",
}
TABLE_ORDER = ("pooled", "cumulative", "loco", "tabulations")

_CSS = """
body{font-family:Helvetica,Arial,sans-serif;margin:2em auto;max-width:1000px;color:#333}
h1{font-size:1.6em}h2{font-size:1.2em;border-bottom:1px solid #ddd;padding-bottom:.2em}
table{border-collapse:collapse;margin:.5em 0 1.5em;font-size:.85em}
th,td{border:1px solid #ddd;padding:.25em .6em;text-align:right}
th{background:#f4f4f4}td:first-child,th:first-child{text-align:left}
svg{max-width:100%;height:auto}footer{margin-top:3em;font-size:.8em;color:#666}
code{font-size:.95em}
""".strip()


class NothingToReport(InputError):
    def __init__(self):
        super().__init__("no figures or tables to report")


@dataclass
class Table:
    title: str
    columns: Sequence[str]
    rows: Sequence[Sequence[Any]]


@dataclass
class ReportArtifacts:
    """Figures keyed by name from ``FIGURE_ORDER`` (SVG text) and tables
    keyed by name from ``TABLE_ORDER``. ``inputs`` maps an input label to
    its sha256 hex digest."""

    figures: dict[str, str] = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    seed: int = 42
    version: str = __version__

    def is_empty(self) -> bool:
        return not self.figures and not self.tables


def _cell(v: Any) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return "NA" if math.isnan(v) else f"{v:.4f}"
    return escape(str(v))


def _table_html(name: str, table: Table) -> str:
    head = "".join(f"<th>{escape(c)}</th>" for c in table.columns)
    body = "\n".join("<tr>" + "".join(f"<td>{_cell(v)}</td>" for v in row) + "</tr>" for row in table.rows)
    return (f'<section class="table" id="table-{name}">\n<h2>{escape(table.title)}</h2>\n'
            f"<table>\n<thead><tr>{head}</tr></thead>\n<tbody>\n{body}\n</tbody>\n</table>\n</section>")


def _strip_prolog(svg: str) -> str:
    s = svg.strip()
    if s.startswith("<?xml"):
        s = s[s.index("?>") + 2:].lstrip()
    return s


def build_report(artifacts: ReportArtifacts, title: str = "Meta-analysis enrichment report") -> str:
    """Sections appear in fixed order regardless of dict insertion order."""
    if artifacts.is_empty():
        raise NothingToReport()
    parts = ["<!DOCTYPE html>", '<html lang="en">', "<head>", '<meta charset="utf-8">',
             f"<title>{escape(title)}</title>", f"<style>\n{_CSS}\n</style>", "</head>", "<body>",
             f"<h1>{escape(title)}</h1>"]
    for name in FIGURE_ORDER:
        if name in artifacts.figures:
            parts.append(f'<section class="figure" id="figure-{name}">\n<h2>{escape(FIGURE_TITLES[name])}</h2>\n'
                         f"{_strip_prolog(artifacts.figures[name])}\n</section>")
    for name in TABLE_ORDER:
        if name in artifacts.tables:
            parts.append(_table_html(name, artifacts.tables[name]))
    rows = "\n".join(f"<li>{escape(k)}: <code>{escape(v)}</code></li>" for k, v in sorted(artifacts.inputs.items()))
    parts.append(f'<footer class="provenance">\n<p>maenrich {escape(artifacts.version)}; seed {artifacts.seed}</p>\n'
                 f"<p>Input sha256:</p>\n<ul>\n{rows}\n</ul>\n</footer>")
    parts += ["</body>", "</html>", ""]
    return "\n".join(parts)
