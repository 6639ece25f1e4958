"""Bibliometric networks: co-authorship and country bibliographic coupling.

Co-authorship is the off-diagonal part of ``W W^T`` for the author x paper
incidence ``W``. Country coupling multiplies country x reference
incidence by its transpose, where a country's references are the union
of the cited references of every paper listing that country (full
counting).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from maenrich.errors import InputError
from maenrich.ingest.link import record_ids
from maenrich.ingest.records import BibRecord, fold_diacritics

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

UNREPORTED = "Unreported"
FIELDS = ("journal", "funder", "language", "year", "country")

_INITIALS_ONLY = re.compile(r"^(?:[A-Z]\.?-?){1,4}$")


class UnknownField(InputError):
    def __init__(self, name: str):
        super().__init__(f"cannot tabulate field {name!r}; choose from {', '.join(FIELDS)}")
        self.name = name


def author_key(raw: str) -> str:
    """``"family, i j"``: lowercase, diacritics folded, one letter per given name.

    Accepts ``Family, Given`` and ``Given Family`` forms, plus Scopus-style
    ``Family A.B.`` without a comma. "Smith, Alice" and "Smith, A." collide
    by design; true homonyms collide too, which an alias file can undo.
    """
    name = " ".join(fold_diacritics(raw).replace("{", "").replace("}", "").split())
    if "," in name:
        family, given = (s.strip() for s in name.split(",", 1))
    else:
        parts = name.split(" ")
        if len(parts) > 1 and _INITIALS_ONLY.match(parts[-1]):
            family, given = " ".join(parts[:-1]), parts[-1]
        elif len(parts) > 1:
            family, given = parts[-1], " ".join(parts[:-1])
        else:
            family, given = name, ""
    pieces = [p for p in re.split(r"[\s.\-]+", given) if p]
    letters = []
    for p in pieces:
        # bare run of capitals ("AB") is a run of initials
        letters += list(p) if p.isupper() and len(p) <= 4 else [p[0]]
    initials = " ".join(letters)
    family = family.lower().strip()
    return f"{family}, {initials.lower()}" if initials else family


def load_aliases(text: str) -> dict[str, str]:
    """``[aliases]`` TOML table mapping author keys (or raw names) to canonical keys."""
    table = tomllib.loads(text).get("aliases", {})
    return {author_key(k): v for k, v in table.items()}


@dataclass(frozen=True)
class IncidenceMatrix:
    row_labels: list[str]
    col_labels: list[str]
    matrix: sparse.csr_matrix

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass
class WeightedGraph:
    """Undirected graph; edge keys are ``(a, b)`` with ``a < b``."""

    nodes: list[str]
    edges: dict[tuple[str, str], float] = field(default_factory=dict)
    attributes: dict[str, dict] = field(default_factory=dict)

    def edge_set(self) -> set[tuple[str, str, float]]:
        return {(a, b, w) for (a, b), w in self.edges.items()}

    def adjacency(self) -> sparse.csr_matrix:
        index = {n: i for i, n in enumerate(self.nodes)}
        n = len(self.nodes)
        if not self.edges:
            return sparse.csr_matrix((n, n))
        rows, cols, vals = [], [], []
        for (a, b), w in self.edges.items():
            rows += [index[a], index[b]]
            cols += [index[b], index[a]]
            vals += [w, w]
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def to_dict(self) -> dict:
        return {
            "nodes": [dict(id=n, **self.attributes.get(n, {})) for n in self.nodes],
            "edges": [{"source": a, "target": b, "weight": w} for (a, b), w in sorted(self.edges.items())],
        }


def _incidence(rows_per_col: Sequence[Iterable[str]], col_labels: list[str]) -> IncidenceMatrix:
    row_labels = sorted({r for rows in rows_per_col for r in rows})
    index = {lab: i for i, lab in enumerate(row_labels)}
    ri, ci = [], []
    for j, rows in enumerate(rows_per_col):
        for r in set(rows):
            ri.append(index[r])
            ci.append(j)
    data = np.ones(len(ri), dtype=np.int64)
    mat = sparse.csr_matrix((data, (ri, ci)), shape=(len(row_labels), len(col_labels)), dtype=np.int64)
    return IncidenceMatrix(row_labels, col_labels, mat)


def author_incidence(bib_records: Sequence[BibRecord], aliases: Mapping[str, str] | None = None) -> IncidenceMatrix:
    """Author x paper 0/1 matrix; rows sorted by author key, columns in record order."""
    aliases = aliases or {}
    per_paper = []
    for rec in bib_records:
        keys = [author_key(a) for a in rec.authors]
        per_paper.append([aliases.get(k, k) for k in keys])
    return _incidence(per_paper, record_ids(list(bib_records)))


def reference_incidence(bib_records: Sequence[BibRecord]) -> IncidenceMatrix:
    """Cited-reference x paper 0/1 matrix (the transpose of Paper x CitedPaper)."""
    return _incidence([rec.references for rec in bib_records], record_ids(list(bib_records)))


def country_incidence(bib_records: Sequence[BibRecord]) -> IncidenceMatrix:
    """Country x paper 0/1 matrix."""
    return _incidence([rec.countries for rec in bib_records], record_ids(list(bib_records)))


def cooccurrence(incidence: IncidenceMatrix) -> sparse.csr_matrix:
    """``W W^T`` including the diagonal (papers per author)."""
    W = incidence.matrix
    return (W @ W.T).tocsr()


def _graph_from_product(labels: list[str], product: sparse.spmatrix, integral: bool = True) -> WeightedGraph:
    coo = sparse.triu(product, k=1).tocoo()
    edges = {}
    for i, j, w in zip(coo.row, coo.col, coo.data):
        if w > 0:
            a, b = labels[i], labels[j]
            if a > b:
                a, b = b, a
            edges[(a, b)] = int(w) if integral else float(w)
    return WeightedGraph(nodes=list(labels), edges=dict(sorted(edges.items())))


def coauthorship_graph(incidence: IncidenceMatrix) -> WeightedGraph:
    """Edge weight = number of co-authored papers; isolated authors kept."""
    return _graph_from_product(incidence.row_labels, cooccurrence(incidence))


def country_coupling_graph(bib_records: Sequence[BibRecord], counting: str = "full") -> WeightedGraph:
    """Countries coupled by shared cited references.

    ``full``: weight = size of the intersection of the two countries'
    cumulative bibliographies. ``fractional``: each paper credits its
    countries 1/n_countries, and weights are the inner products of the
    resulting country x reference credit vectors (real-valued).
    """
    countries = country_incidence(bib_records)
    refs = reference_incidence(bib_records)
    if refs.matrix.shape[0] == 0 or countries.matrix.shape[0] == 0:
        return WeightedGraph(nodes=list(countries.row_labels))
    C = countries.matrix.astype(float)
    if counting == "fractional":
        n_per_paper = np.asarray(C.sum(axis=0)).ravel()
        n_per_paper[n_per_paper == 0] = 1.0
        C = C @ sparse.diags(1.0 / n_per_paper)
        B = C @ refs.matrix.T.astype(float)
        return _graph_from_product(countries.row_labels, (B @ B.T).tocsr(), integral=False)
    if counting != "full":
        raise ValueError(f"counting must be 'full' or 'fractional', not {counting!r}")
    B = (C @ refs.matrix.T.astype(float)) > 0
    B = B.astype(np.int64)
    return _graph_from_product(countries.row_labels, (B @ B.T).tocsr())


def connected_components(graph: WeightedGraph) -> dict[str, int]:
    """Cluster id per node, numbered 1.. in order of each component's smallest label."""
    if not graph.nodes:
        return {}
    _, labels = csgraph.connected_components(graph.adjacency(), directed=False)
    smallest: dict[int, str] = {}
    for node, lab in zip(graph.nodes, labels):
        if lab not in smallest or node < smallest[lab]:
            smallest[lab] = node
    renumber = {lab: i + 1 for i, lab in enumerate(sorted(smallest, key=smallest.get))}
    return {node: renumber[lab] for node, lab in zip(graph.nodes, labels)}


def degree_centrality(graph: WeightedGraph) -> dict[str, tuple[int, float]]:
    """``(degree, strength)``: incident edge count and incident weight sum."""
    deg = {n: 0 for n in graph.nodes}
    strength = {n: 0 for n in graph.nodes}
    for (a, b), w in graph.edges.items():
        deg[a] += 1
        deg[b] += 1
        strength[a] += w
        strength[b] += w
    return {n: (deg[n], strength[n]) for n in graph.nodes}


def annotate(graph: WeightedGraph) -> WeightedGraph:
    """Attach cluster id, degree and strength to every node (in place)."""
    comps = connected_components(graph)
    cent = degree_centrality(graph)
    for n in graph.nodes:
        graph.attributes[n] = {"cluster": comps[n], "degree": cent[n][0], "strength": cent[n][1]}
    return graph


def tabulate_field(bib_records: Sequence[BibRecord], field_name: str) -> list[tuple[str, int]]:
    """Value counts, most frequent first (ties alphabetical).

    Missing values are grouped under ``Unreported``. For ``country`` every
    country of a paper is counted once.
    """
    if field_name not in FIELDS:
        raise UnknownField(field_name)
    counts: Counter[str] = Counter()
    for rec in bib_records:
        if field_name == "country":
            values = list(dict.fromkeys(rec.countries)) or [UNREPORTED]
        else:
            value = getattr(rec, field_name)
            values = [UNREPORTED if value is None or value == "" else str(value)]
        counts.update(values)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class ClusterSummary:
    n_clusters: int
    mean_size: float
    max_size: int
    sizes: list[int]

    def to_dict(self) -> dict:
        return {
            "n_clusters": self.n_clusters,
            "mean_size": self.mean_size,
            "max_size": self.max_size,
            "sizes": list(self.sizes),
        }


def cluster_summary(graph: WeightedGraph, components: Mapping[str, int]) -> ClusterSummary:
    """Cluster sizes indexed by cluster id; mean rounded to 2 decimals."""
    if not graph.nodes:
        return ClusterSummary(0, 0.0, 0, [])
    counts = Counter(components[n] for n in graph.nodes)
    sizes = [counts[c] for c in sorted(counts)]
    return ClusterSummary(len(sizes), round(sum(sizes) / len(sizes), 2), max(sizes), sizes)


def paper_clusters(incidence: IncidenceMatrix, components: Mapping[str, int]) -> dict[str, int]:
    """Cluster of each paper.

    All authors of one paper are pairwise co-authors, so they always share
    a component, and each paper takes that component.
    """
    W = incidence.matrix.tocsc()
    out = {}
    for j, paper in enumerate(incidence.col_labels):
        rows = W.indices[W.indptr[j]:W.indptr[j + 1]]
        if len(rows):
            out[paper] = components[incidence.row_labels[rows[0]]]
    return out
