"""Subcommand bodies: load inputs, run the analysis modules, produce files.

Every step returns an :class:`Outputs` mapping file names to text plus
one summary line per file. Nothing here writes to disk or touches the
network except :func:`alt_fetch` in live mode.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

from maenrich import __version__
from maenrich.altclient import CACHE_ONLY, LIVE, AltmetricCache, AltmetricClient
from maenrich.biblio import (
    FIELDS,
    author_incidence,
    annotate,
    cluster_summary,
    coauthorship_graph,
    connected_components,
    country_coupling_graph,
    load_aliases,
    paper_clusters,
    tabulate_field,
)
from maenrich.errors import InputError, MaenrichError
from maenrich.ingest import ColumnMapping, link_records, parse_bibliography, parse_dataset, parse_newick
from maenrich.ingest.records import BibRecord, EffectRecord
from maenrich.meta import (
    Z975,
    TooFewClusters,
    cumulative_pool,
    leave_one_cluster_out,
    multilevel_reml,
    pool_auto,
    pool_common,
    robust_variance,
    subgroup_pool,
)
from maenrich.phylo import NoOverlap, match_species, phylo_correlation, prune_tree, species_aggregate
from maenrich.render import (
    ReportArtifacts,
    Table,
    TipAnnotation,
    build_report,
    render_chord,
    render_gap_map,
    render_network,
    render_orchard,
    render_sankey,
    render_tree,
)
from maenrich.serialize import dumps, sha256_file
from maenrich.synthmap import gap_map, sankey_flows
from maenrich.tree import PhyloTree

TAU2_METHODS = ("DL", "REML")


class MissingInput(InputError):
    def __init__(self, what: str, flag: str):
        super().__init__(f"{what} is required (pass {flag} or set it in the config [run] table)")


@dataclass
class RunConfig:
    """Resolved settings for one invocation."""

    out: Path = Path("out")
    data: Path | None = None
    config: Path | None = None
    bib: Path | None = None
    tree: Path | None = None
    cache: Path | None = None
    aliases: Path | None = None
    dois: Path | None = None
    x: str | None = None
    y: str | None = None
    shape: str | None = None
    sankey_columns: list[str] = field(default_factory=list)
    group: str | None = None
    rho: float = 0.5
    tau2: str = "REML"
    seed: int = 42
    threshold: float = 400.0
    alt_mode: str = CACHE_ONLY
    rate: float = 1.0
    cluster_by: str = "study"
    counting: str = "full"
    refs_field: str | None = None
    size_by: str = "studies"
    width: float | None = None
    height: float | None = None

    def validate(self) -> None:
        for name in ("data", "config", "bib", "tree", "aliases", "dois"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise InputError(f"{p}: no such file")
        if self.cache is not None and Path(self.cache).exists() and not Path(self.cache).is_dir():
            raise InputError(f"{self.cache}: cache path is not a directory")
        if not 0.0 <= self.rho <= 1.0:
            raise InputError(f"rho must lie in [0, 1], got {self.rho}")
        if self.tau2 not in TAU2_METHODS:
            raise InputError(f"tau2 method must be one of {TAU2_METHODS}, got {self.tau2!r}")
        if self.alt_mode not in (LIVE, CACHE_ONLY):
            raise InputError(f"altmetric mode must be {LIVE!r} or {CACHE_ONLY!r}")
        if self.counting not in ("full", "fractional"):
            raise InputError(f"counting must be 'full' or 'fractional', got {self.counting!r}")
        if self.size_by not in ("studies", "effects"):
            raise InputError(f"size-by must be 'studies' or 'effects', got {self.size_by!r}")
        if not (self.cluster_by in ("study", "author-cluster") or self.cluster_by.startswith("moderator:")):
            raise InputError(f"cluster-by must be study, author-cluster or moderator:<column>, got {self.cluster_by!r}")


@dataclass
class Outputs:
    files: dict[str, str] = field(default_factory=dict)
    summaries: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    exit_code: int = 0

    def add(self, name: str, text: str, summary: str) -> None:
        self.files[name] = text
        self.summaries.append(f"{name}: {summary}")

    def merge(self, other: "Outputs") -> "Outputs":
        self.files.update(other.files)
        self.summaries += other.summaries
        self.errors += other.errors
        self.exit_code = max(self.exit_code, other.exit_code)
        return self


def _size(cfg: RunConfig, width: float, height: float | None = None) -> dict:
    out = {"width": cfg.width or width}
    if height is not None:
        out["height"] = cfg.height or height
    return out


class Inputs:
    """Lazily parsed inputs shared by the steps of one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg

    def _read(self, path: Path) -> str:
        try:
            return Path(path).read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"{path}: not UTF-8 text ({exc.reason})") from None
        except OSError as exc:
            raise InputError(f"{path}: {exc.strerror}") from None

    @staticmethod
    def _tag(path: Path, exc: MaenrichError) -> MaenrichError:
        if not str(exc).startswith(str(path)):
            exc.args = (f"{path}: {exc}",)
        return exc

    @cached_property
    def mapping(self) -> ColumnMapping:
        if self.cfg.config is None:
            raise MissingInput("a column-mapping config", "--config")
        try:
            return ColumnMapping.from_toml(self._read(self.cfg.config))
        except MaenrichError as exc:
            raise self._tag(self.cfg.config, exc)

    @cached_property
    def effects(self) -> list[EffectRecord]:
        if self.cfg.data is None:
            raise MissingInput("an effects table", "--data")
        mapping = self.mapping
        try:
            return parse_dataset(self._read(self.cfg.data), mapping)
        except MaenrichError as exc:
            raise self._tag(self.cfg.data, exc)

    @property
    def has_bib(self) -> bool:
        return self.cfg.bib is not None

    @cached_property
    def bib(self) -> list[BibRecord]:
        if self.cfg.bib is None:
            raise MissingInput("a bibliography", "--bib")
        try:
            return parse_bibliography(self._read(self.cfg.bib), str(self.cfg.bib), self.cfg.refs_field)
        except MaenrichError as exc:
            raise self._tag(self.cfg.bib, exc)

    @cached_property
    def aliases(self) -> dict[str, str]:
        return load_aliases(self._read(self.cfg.aliases)) if self.cfg.aliases else {}

    @cached_property
    def tree(self) -> PhyloTree:
        if self.cfg.tree is None:
            raise MissingInput("a Newick tree", "--tree")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                tree = parse_newick(self._read(self.cfg.tree))
            except MaenrichError as exc:
                raise self._tag(self.cfg.tree, exc)
        self.warnings = [f"{self.cfg.tree}: {w.message}" for w in caught]
        return tree

    @cached_property
    def linked(self):
        return link_records(self.effects, self.bib)

    def input_hashes(self) -> dict[str, str]:
        out = {}
        for name in ("data", "config", "bib", "tree", "aliases", "dois"):
            p = getattr(self.cfg, name)
            if p is not None:
                out[f"{name} ({Path(p).name})"] = sha256_file(p)
        return out


# -- evidence map -----------------------------------------------------------


def _declared(inp: Inputs) -> list[str]:
    return list(inp.mapping.moderators)


def map_step(inp: Inputs) -> Outputs:
    cfg = inp.cfg
    if not cfg.x or not cfg.y:
        raise MissingInput("x and y moderator columns", "--x/--y")
    orders = inp.mapping.extra.get("levels", {})
    gm = gap_map(inp.effects, cfg.x, cfg.y, cfg.shape, declared=_declared(inp), level_orders=orders)
    out = Outputs()
    out.add("cells.json", dumps(gm.to_dict()), f"{len(gm.cells)} cells, {gm.remainder} rows without x/y")
    levels = gm.levels()
    svg = render_gap_map(gm.cells, levels, size_by=cfg.size_by, x_title=cfg.x, y_title=cfg.y,
                         shape_title=cfg.shape or "", width=cfg.width, height=cfg.height)
    out.add("gap_map.svg", svg.to_string(), f"{len(levels['x'])} x {len(levels['y'])} grid")
    return out


def sankey_step(inp: Inputs) -> Outputs:
    cols = inp.cfg.sankey_columns
    if not cols:
        raise MissingInput("sankey columns", "--columns")
    graph = sankey_flows(inp.effects, cols, declared=_declared(inp))
    out = Outputs()
    out.add("sankey.json", dumps(graph.to_dict()), f"{len(graph.nodes)} nodes, {len(graph.links)} links")
    svg = render_sankey(graph, **_size(inp.cfg, 900.0, 520.0))
    out.add("sankey.svg", svg.to_string(), f"{len(cols)} columns")
    return out


# -- phylogeny --------------------------------------------------------------


def _majority(values: list[str | None]) -> str | None:
    counts = Counter(v for v in values if v is not None)
    if not counts:
        return None
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]


def phylo_step(inp: Inputs) -> Outputs:
    cfg = inp.cfg
    with_species = [e for e in inp.effects if e.species]
    if not with_species:
        raise InputError(f"{cfg.data}: no effect rows carry a species")
    tree = inp.tree
    match = match_species(tree, {e.species for e in with_species})
    if not match.matched:
        raise NoOverlap()
    usable = [e for e in with_species if e.species in match.matched]
    aggregated = species_aggregate(usable, cfg.rho)
    pruned = prune_tree(tree, match.matched.values())
    labels, corr = phylo_correlation(pruned)
    group_of = {}
    if cfg.group:
        for s in match.matched:
            group_of[s] = _majority([e.moderator(cfg.group) for e in usable if e.species == s])
    tips, annotations = [], {}
    for a in aggregated:
        half = Z975 * math.sqrt(a.vi)
        tip = match.matched[a.key]
        g = group_of.get(a.key)
        annotations[tip] = TipAnnotation(a.yi, a.yi - half, a.yi + half, g)
        tips.append({"species": a.key, "tip": tip, "estimate": a.yi, "vi": a.vi, "n_effects": a.n_inputs,
                     "ci": [a.yi - half, a.yi + half], "group": g})
    doc = {
        "rho": cfg.rho,
        "group_column": cfg.group,
        "tips": tips,
        "tree": pruned.to_nested(),
        "correlation": {"labels": labels, "matrix": corr.tolist()},
        "missing_from_tree": match.missing_from_tree,
        "unused_tips": match.unused_tips,
    }
    out = Outputs()
    out.errors += getattr(inp, "warnings", [])
    out.add("phylo.json", dumps(doc), f"{len(tips)} species on the tree, {len(match.missing_from_tree)} not found")
    svg = render_tree(pruned, annotations, **_size(cfg, 900.0))
    out.add("tree.svg", svg.to_string(), f"{len(labels)} tips drawn")
    return out


# -- bibliometrics ----------------------------------------------------------


def _author_network(inp: Inputs):
    inc = author_incidence(inp.bib, inp.aliases)
    graph = annotate(coauthorship_graph(inc))
    comps = connected_components(graph)
    return inc, graph, comps


def authors_step(inp: Inputs) -> Outputs:
    inc, graph, comps = _author_network(inp)
    summary = cluster_summary(graph, comps)
    doc = {"graph": graph.to_dict(), "clusters": summary.to_dict(),
           "paper_clusters": paper_clusters(inc, comps)}
    out = Outputs()
    out.add("authors_graph.json", dumps(doc),
            f"{len(graph.nodes)} authors, {len(graph.edges)} links, {summary.n_clusters} clusters "
            f"(largest {summary.max_size})")
    svg = render_network(graph, comps, seed=inp.cfg.seed, **_size(inp.cfg, 900.0, 900.0))
    out.add("network.svg", svg.to_string(), f"seed {inp.cfg.seed}")
    return out


def tabulations(inp: Inputs) -> dict:
    return {f: [[v, n] for v, n in tabulate_field(inp.bib, f)] for f in FIELDS}


def countries_step(inp: Inputs) -> Outputs:
    graph = annotate(country_coupling_graph(inp.bib, inp.cfg.counting))
    out = Outputs()
    out.add("countries_graph.json", dumps({"counting": inp.cfg.counting, "graph": graph.to_dict()}),
            f"{len(graph.nodes)} countries, {len(graph.edges)} coupling links")
    svg = render_chord(graph, **_size(inp.cfg, 760.0, 760.0))
    out.add("chord.svg", svg.to_string(), f"{len(graph.nodes)} arcs")
    tabs = tabulations(inp)
    out.add("tabulations.json", dumps(tabs), f"{len(inp.bib)} records over {len(tabs)} fields")
    return out


# -- pooling ----------------------------------------------------------------


def cluster_function(inp: Inputs) -> tuple[str, Callable[[EffectRecord], str]]:
    how = inp.cfg.cluster_by
    if how == "study":
        return how, lambda e: e.study_key
    if how.startswith("moderator:"):
        col = how.split(":", 1)[1]
        if col not in inp.mapping.moderators:
            raise InputError(f"cluster-by moderator {col!r} is not a declared moderator")
        return how, lambda e: e.moderator(col) or "Unreported"
    inc, _, comps = _author_network(inp)
    by_paper = paper_clusters(inc, comps)
    linked = inp.linked

    def of(e: EffectRecord) -> str:
        rid = linked.record_id_for(e)
        if rid is None or rid not in by_paper:
            return f"unlinked:{e.study_key}"
        return f"cluster {by_paper[rid]}"

    return how, of


def pool_step(inp: Inputs) -> Outputs:
    effects = inp.effects
    label, cluster_of = cluster_function(inp)
    entries = {
        "common": pool_common(effects).to_dict(),
        "random_dl": pool_auto(effects, "DL").to_dict(),
        "random_reml": pool_auto(effects, "REML").to_dict(),
    }
    base = pool_auto(effects, inp.cfg.tau2)
    try:
        entries["robust"] = robust_variance(effects, cluster_of, base).to_dict()
    except TooFewClusters as exc:
        entries["robust"] = None
        entries["robust_note"] = str(exc)
    try:
        s2c, s2e, ml = multilevel_reml(effects, cluster_of)
        entries["multilevel"] = {"sigma2_cluster": s2c, "sigma2_effect": s2e, "pooled": ml.to_dict()}
    except MaenrichError as exc:
        entries["multilevel"] = None
        entries["multilevel_note"] = str(exc)
    doc = {"tau2_method": inp.cfg.tau2, "cluster_by": label, "k": len(effects), "results": entries}
    if inp.cfg.group:
        doc["subgroups"] = {g: p.to_dict() for g, p in
                            subgroup_pool(effects, lambda e: e.moderator(inp.cfg.group), inp.cfg.tau2).items()}
    out = Outputs()
    out.add("pool.json", dumps(doc), f"k={len(effects)}, estimate {base.estimate:.4f} ({base.method})")
    return out


def loco_step(inp: Inputs) -> Outputs:
    label, cluster_of = cluster_function(inp)
    counts = Counter(str(cluster_of(e)) for e in inp.effects)
    rows = leave_one_cluster_out(inp.effects, cluster_of, inp.cfg.tau2)
    doc = {"cluster_by": label, "tau2_method": inp.cfg.tau2,
           "entries": [dict(r.to_dict(), n_dropped=counts[r.cluster]) for r in rows]}
    out = Outputs()
    top = rows[0]
    out.add("loco.json", dumps(doc), f"{len(rows)} clusters, largest shift {top.delta:+.4f} ({top.cluster})")
    return out


def cumulative_step(inp: Inputs) -> Outputs:
    steps = cumulative_pool(inp.effects, inp.cfg.tau2)
    doc = {"tau2_method": inp.cfg.tau2, "steps": [{"year": y, "pooled": p.to_dict()} for y, p in steps]}
    out = Outputs()
    out.add("cumulative.json", dumps(doc), f"{len(steps)} years")
    return out


# -- altmetrics -------------------------------------------------------------


def effect_dois(inp: Inputs) -> dict[str, str]:
    """DOI per effect key: the table's own DOI, else the linked record's."""
    out = {}
    linked = inp.linked if inp.has_bib else None
    for e in inp.effects:
        doi = e.doi
        if not doi and linked is not None:
            rec = linked.record_for(e)
            doi = rec.doi if rec else None
        if doi:
            out[e.effect_key] = doi
    return out


def _doi_list(inp: Inputs) -> list[str]:
    cfg = inp.cfg
    if cfg.dois is not None:
        lines = Path(cfg.dois).read_text(encoding="utf-8").splitlines()
        return [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if cfg.data is not None:
        return sorted(set(effect_dois(inp).values()))
    if cfg.bib is not None:
        return sorted({r.doi for r in inp.bib if r.doi})
    raise MissingInput("a DOI source", "--dois, --data or --bib")


def alt_fetch(inp: Inputs, client_factory: Callable[..., AltmetricClient] = AltmetricClient) -> Outputs:
    cfg = inp.cfg
    if cfg.cache is None:
        raise MissingInput("a cache directory", "--cache")
    dois = _doi_list(inp)
    client = client_factory(AltmetricCache(cfg.cache), rate_limit_per_sec=cfg.rate)
    with client:
        batch = client.fetch_batch(dois, cfg.alt_mode)
    records = [r.to_dict() for r in batch.records if r is not None]
    doc = {"mode": cfg.alt_mode, "records": records,
           "errors": [{"doi": d, "error": type(e).__name__, "message": str(e)} for d, e in batch.errors],
           "network_calls": batch.network_calls}
    out = Outputs()
    out.errors += batch.report()
    out.exit_code = max((getattr(e, "exit_code", 2) for _, e in batch.errors), default=0)
    tracked = sum(1 for r in records if r["status"] == "Tracked")
    out.add("altmetrics.json", dumps(doc),
            f"{len(records)} records ({tracked} tracked), {len(batch.errors)} errors, "
            f"{batch.network_calls} network calls")
    return out


def _cached_scores(inp: Inputs) -> dict[str, float | None]:
    cache = AltmetricCache(inp.cfg.cache) if inp.cfg.cache else None
    client = AltmetricClient(cache)
    scores: dict[str, float | None] = {}
    for key, doi in effect_dois(inp).items():
        try:
            rec = client.fetch_doi(doi, CACHE_ONLY)
        except MaenrichError:
            continue
        if rec.tracked:
            scores[key] = rec.score
    return scores


def alt_plot(inp: Inputs, allow_missing: bool = False) -> Outputs:
    cfg = inp.cfg
    if cfg.cache is None:
        raise MissingInput("a cache directory", "--cache")
    effects = inp.effects
    scores = _cached_scores(inp)
    if cfg.group:
        group_of = lambda e: e.moderator(cfg.group) or "Unreported"  # noqa: E731
        pooled = subgroup_pool(effects, group_of, cfg.tau2)
    else:
        group_of = None
        pooled = pool_auto(effects, cfg.tau2)
    svg = render_orchard(pooled, effects, scores, cfg.threshold, group_of=group_of, allow_missing=allow_missing,
                         seed=cfg.seed, **_size(cfg, 820.0))
    above = sum(1 for s in scores.values() if s is not None and s > cfg.threshold)
    out = Outputs()
    out.add("orchard.svg", svg.to_string(),
            f"{len(effects)} bubbles, {len(scores)} with scores, {above} above {cfg.threshold:g}")
    return out


# -- report -----------------------------------------------------------------

FIGURE_FILES = {
    "gap_map": "gap_map.svg",
    "sankey": "sankey.svg",
    "network": "network.svg",
    "chord": "chord.svg",
    "tree": "tree.svg",
    "orchard": "orchard.svg",
}


def _pooled_row(name: str, d: dict | None) -> list:
    if d is None:
        return [name, None, None, None, None, None, None, None, None, None]
    pi = d.get("pi") or [None, None]
    return [name, d["k"], d["estimate"], d["se"], d["ci"][0], d["ci"][1], d["tau2"], d["i2"], pi[0], pi[1]]


def tables_from_json(docs: dict[str, dict]) -> dict[str, Table]:
    """Report tables from the parsed JSON of the pool/cumulative/loco/tabulation steps."""
    tables = {}
    cols = ["Model", "k", "Estimate", "SE", "CI low", "CI high", "tau2", "I2", "PI low", "PI high"]
    if "pool.json" in docs:
        res = docs["pool.json"]["results"]
        rows = [_pooled_row("Common effect", res["common"]), _pooled_row("Random effects (DL)", res["random_dl"]),
                _pooled_row("Random effects (REML)", res["random_reml"]),
                _pooled_row(f"Cluster-robust ({docs['pool.json']['cluster_by']})", res.get("robust"))]
        ml = res.get("multilevel")
        rows.append(_pooled_row("Two-level REML", ml["pooled"] if ml else None))
        tables["pooled"] = Table("Pooled estimates", cols, rows)
    if "cumulative.json" in docs:
        rows = [[str(s["year"]), s["pooled"]["k"], s["pooled"]["estimate"], s["pooled"]["ci"][0],
                 s["pooled"]["ci"][1], s["pooled"]["tau2"]] for s in docs["cumulative.json"]["steps"]]
        tables["cumulative"] = Table("Cumulative meta-analysis by year",
                                     ["Up to year", "k", "Estimate", "CI low", "CI high", "tau2"], rows)
    if "loco.json" in docs:
        rows = [[r["cluster"], r["n_dropped"], r["pooled"]["estimate"], r["pooled"]["ci"][0], r["pooled"]["ci"][1],
                 r["delta"]] for r in docs["loco.json"]["entries"]]
        tables["loco"] = Table(f"Leave one cluster out ({docs['loco.json']['cluster_by']})",
                               ["Dropped cluster", "Effects dropped", "Estimate", "CI low", "CI high", "Shift"], rows)
    if "tabulations.json" in docs:
        rows = [[f, v, n] for f in FIELDS for v, n in docs["tabulations.json"].get(f, [])]
        tables["tabulations"] = Table("Bibliographic tabulations", ["Field", "Value", "Papers"], rows)
    return tables


def assemble_report(inp: Inputs, files: dict[str, str]) -> str:
    """Report from already-produced step outputs (in memory or read back from disk)."""
    figures = {name: files[fn] for name, fn in FIGURE_FILES.items() if fn in files}
    docs = {fn: json.loads(files[fn]) for fn in ("pool.json", "cumulative.json", "loco.json", "tabulations.json")
            if fn in files}
    artifacts = ReportArtifacts(figures=figures, tables=tables_from_json(docs), inputs=inp.input_hashes(),
                                seed=inp.cfg.seed, version=__version__)
    return build_report(artifacts)


def report_steps(inp: Inputs) -> list[tuple[str, Callable[[], Outputs]]]:
    """Steps whose inputs are configured, in fixed order."""
    cfg = inp.cfg
    steps: list[tuple[str, Callable[[], Outputs]]] = []
    if cfg.data is not None and cfg.x and cfg.y:
        steps.append(("map", lambda: map_step(inp)))
    if cfg.data is not None and len(cfg.sankey_columns) >= 2:
        steps.append(("sankey", lambda: sankey_step(inp)))
    if cfg.bib is not None:
        steps.append(("biblio-authors", lambda: authors_step(inp)))
        steps.append(("biblio-countries", lambda: countries_step(inp)))
    if cfg.data is not None and cfg.tree is not None:
        steps.append(("phylo", lambda: phylo_step(inp)))
    if cfg.data is not None and cfg.cache is not None:
        if cfg.alt_mode == LIVE:
            steps.append(("alt-fetch", lambda: alt_fetch(inp)))
        steps.append(("alt-plot", lambda: alt_plot(inp, allow_missing=True)))
    if cfg.data is not None:
        steps.append(("pool", lambda: pool_step(inp)))
        steps.append(("cumulative", lambda: cumulative_step(inp)))
        steps.append(("loco", lambda: loco_step(inp)))
    return steps
