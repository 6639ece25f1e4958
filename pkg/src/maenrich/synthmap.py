"""Evidence-gap-map cells and moderator Sankey flows."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from maenrich.errors import InputError
from maenrich.ingest.records import EffectRecord
from maenrich.meta import PooledResult, pool_common, pool_random, robust_variance

UNREPORTED = "Unreported"


class UnknownColumn(InputError):
    def __init__(self, name: str):
        super().__init__(f"unknown moderator column {name!r}")
        self.name = name


class TooFewColumns(InputError):
    def __init__(self, n: int):
        super().__init__(f"a Sankey diagram needs at least 2 columns, got {n}")


def missing_label(column: str) -> str:
    return f"Missing({column})"


def level_sort_key(order: Sequence[str] | None):
    """Explicit order first, then anything unlisted lexicographically."""
    rank = {lvl: i for i, lvl in enumerate(order or [])}
    return lambda lvl: (0, rank[lvl], "") if lvl in rank else (1, 0, lvl)


@dataclass(frozen=True)
class EvidenceMapCell:
    x_level: str
    y_level: str
    shape_level: str | None
    n_studies: int
    n_effects: int
    pooled: PooledResult | None

    def to_dict(self) -> dict:
        return {
            "x": self.x_level,
            "y": self.y_level,
            "shape": self.shape_level,
            "n_studies": self.n_studies,
            "n_effects": self.n_effects,
            "pooled": None if self.pooled is None else self.pooled.to_dict(),
        }


@dataclass(frozen=True)
class GapMap:
    cells: list[EvidenceMapCell]
    remainder: int
    x_col: str
    y_col: str
    shape_col: str | None = None
    level_orders: dict = field(default_factory=dict)

    def levels(self) -> dict[str, list[str]]:
        """Grid levels per axis: declared order first (kept even when empty), then the rest sorted."""

        def axis(col: str, seen: set) -> list[str]:
            order = list(self.level_orders.get(col, []))
            return order + sorted(seen - set(order))

        out = {"x": axis(self.x_col, {c.x_level for c in self.cells}),
               "y": axis(self.y_col, {c.y_level for c in self.cells})}
        if self.shape_col:
            out["shape"] = axis(self.shape_col, {c.shape_level for c in self.cells if c.shape_level is not None})
        return out

    def to_dict(self) -> dict:
        return {
            "x_column": self.x_col,
            "y_column": self.y_col,
            "shape_column": self.shape_col,
            "excluded_rows": self.remainder,
            "levels": self.levels(),
            "cells": [c.to_dict() for c in self.cells],
        }


def _check_columns(effects: Sequence[EffectRecord], cols: Iterable[str], declared: Iterable[str] | None):
    if declared is None:
        if not effects:
            return
        known = set()
        for e in effects:
            known.update(e.moderators)
    else:
        known = set(declared)
    for c in cols:
        if c not in known:
            raise UnknownColumn(c)


def pool_cell(rows: Sequence[EffectRecord], tau2_method: str = "DL") -> PooledResult:
    """Cell estimate: RE pooling with CR1 SEs clustered by study.

    One effect passes through; one study gets model-based RE SEs.
    """
    if len(rows) == 1:
        return pool_common(rows)
    pooled = pool_random(rows, tau2_method)
    if len({r.study_key for r in rows}) < 2:
        return pooled
    return robust_variance(rows, lambda e: e.study_key, pooled)


def gap_map(
    effects: Sequence[EffectRecord],
    x_col: str,
    y_col: str,
    shape_col: str | None = None,
    *,
    declared: Iterable[str] | None = None,
    level_orders: Mapping[str, Sequence[str]] | None = None,
    tau2_method: str = "DL",
) -> GapMap:
    """Counts and pooled estimates for every occupied (x, y[, shape]) cell.

    Rows missing x or y are dropped and counted in ``remainder``; a missing
    shape becomes ``Unreported``. A study spanning several cells counts
    once in each.
    """
    _check_columns(effects, [c for c in (x_col, y_col, shape_col) if c], declared)
    groups: dict[tuple, list[EffectRecord]] = defaultdict(list)
    remainder = 0
    for e in effects:
        x, y = e.moderator(x_col), e.moderator(y_col)
        if x is None or y is None:
            remainder += 1
            continue
        shape = None
        if shape_col:
            shape = e.moderator(shape_col) or UNREPORTED
        groups[(x, y, shape)].append(e)

    orders = level_orders or {}
    kx, ky = level_sort_key(orders.get(x_col)), level_sort_key(orders.get(y_col))
    ks = level_sort_key(orders.get(shape_col)) if shape_col else (lambda s: 0)
    cells = []
    for key in sorted(groups, key=lambda t: (kx(t[0]), ky(t[1]), ks(t[2]))):
        rows = groups[key]
        cells.append(
            EvidenceMapCell(
                x_level=key[0],
                y_level=key[1],
                shape_level=key[2],
                n_studies=len({r.study_key for r in rows}),
                n_effects=len(rows),
                pooled=pool_cell(rows, tau2_method),
            )
        )
    return GapMap(cells=cells, remainder=remainder, x_col=x_col, y_col=y_col, shape_col=shape_col,
                  level_orders={c: list(o) for c, o in orders.items() if c in (x_col, y_col, shape_col)})


@dataclass(frozen=True)
class SankeyNode:
    column: str
    level: str
    count: int

    @property
    def id(self) -> tuple[str, str]:
        return (self.column, self.level)


@dataclass(frozen=True)
class SankeyLink:
    source: tuple[str, str]
    target: tuple[str, str]
    weight: int


@dataclass(frozen=True)
class SankeyGraph:
    columns: list[str]
    nodes: list[SankeyNode]
    links: list[SankeyLink]

    def column_nodes(self, column: str) -> list[SankeyNode]:
        return [n for n in self.nodes if n.column == column]

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "nodes": [{"column": n.column, "level": n.level, "count": n.count} for n in self.nodes],
            "links": [
                {
                    "source": {"column": l.source[0], "level": l.source[1]},
                    "target": {"column": l.target[0], "level": l.target[1]},
                    "weight": l.weight,
                }
                for l in self.links
            ],
        }


def sankey_flows(
    effects: Sequence[EffectRecord],
    ordered_cols: Sequence[str],
    *,
    declared: Iterable[str] | None = None,
) -> SankeyGraph:
    """Co-occurrence flows between each adjacent pair of moderator columns.

    Missing values are kept as an explicit ``Missing(<column>)`` level.
    Nodes within a column are ordered by count descending, then label.
    """
    cols = list(ordered_cols)
    if len(cols) < 2:
        raise TooFewColumns(len(cols))
    _check_columns(effects, cols, declared)

    def level(e: EffectRecord, c: str) -> str:
        val = e.moderator(c)
        return missing_label(c) if val is None else val

    nodes = []
    rank: dict[tuple[str, str], int] = {}
    for c in cols:
        counts = Counter(level(e, c) for e in effects)
        for lvl, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            rank[(c, lvl)] = len(nodes)
            nodes.append(SankeyNode(c, lvl, n))

    links = []
    for a, b in zip(cols, cols[1:]):
        pairs = Counter((level(e, a), level(e, b)) for e in effects)
        for (la, lb), w in sorted(pairs.items(), key=lambda kv: (rank[(a, kv[0][0])], rank[(b, kv[0][1])])):
            links.append(SankeyLink((a, la), (b, lb), w))
    return SankeyGraph(columns=cols, nodes=nodes, links=links)
