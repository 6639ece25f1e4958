"""Tree pruning, phylogenetic correlation, and per-species aggregation."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from maenrich.errors import InputError
from maenrich.ingest.records import EffectRecord
from maenrich.meta import AggregatedEffect, aggregate_correlated
from maenrich.tree import PhyloTree, canonical_label

DEFAULT_RHO = 0.5


class NoOverlap(InputError):
    def __init__(self):
        super().__init__("none of the requested species are tips of the tree")


class ZeroDepthTip(InputError):
    def __init__(self, label: str):
        super().__init__(f"tip {label!r} sits at distance 0 from the root")
        self.label = label


class MissingSpecies(InputError):
    def __init__(self, effect_key: str):
        super().__init__(f"effect {effect_key!r} has no species")
        self.effect_key = effect_key


def prune_tree(tree: PhyloTree, keep: Iterable[str]) -> PhyloTree:
    """Drop tips not in ``keep`` and splice out nodes left with one child.

    Tip names match case-insensitively with ``_`` equal to a space.
    Root-to-tip distances of surviving tips are unchanged; to guarantee
    that, a root left with a single child is retained as a unary root.
    """
    wanted = {canonical_label(k) for k in keep}
    tip_set = set(tree.tips())
    kept_tips = {t for t in tip_set if canonical_label(tree.labels[t] or "") in wanted}
    if not kept_tips:
        raise NoOverlap()

    # nodes with at least one kept descendant tip
    alive = set()
    for t in kept_tips:
        node = t
        while node >= 0 and node not in alive:
            alive.add(node)
            node = tree.parent[node]

    out = PhyloTree()
    _copy_alive(tree, alive, out)
    out.root = 0
    return out


def _copy_alive(tree: PhyloTree, alive: set[int], out: PhyloTree) -> None:
    # iterative preorder copy; unary non-root nodes pass their length down

    stack = [(tree.root, -1, 0.0)]
    while stack:
        node, new_parent, carried = stack.pop()
        kids = [c for c in tree.children(node) if c in alive]
        length = carried + (tree.lengths[node] if node != tree.root else 0.0)
        if node != tree.root and len(kids) == 1:
            stack.append((kids[0], new_parent, length))
            continue
        root_len = tree.lengths[node] if node == tree.root else length
        new = out.add_node(new_parent, tree.labels[node], root_len)
        for c in reversed(kids):
            stack.append((c, new, 0.0))


def phylo_covariance(tree: PhyloTree) -> tuple[list[str], np.ndarray]:
    """Shared root-to-MRCA path length for every tip pair (Brownian covariance)."""
    labels, A = tree.ancestry_matrix()
    lengths = np.asarray(tree.lengths, dtype=float).copy()
    lengths[tree.root] = 0.0
    return labels, (A * lengths) @ A.T


def phylo_correlation(tree: PhyloTree) -> tuple[list[str], np.ndarray]:
    """Tip correlation ``cov_ij / sqrt(t_i t_j)``; diagonal set to exactly 1.

    Normalizing by both depths keeps non-ultrametric trees valid.
    """
    labels, cov = phylo_covariance(tree)
    depth = np.diag(cov).copy()
    for lab, d in zip(labels, depth):
        if d <= 0:
            raise ZeroDepthTip(lab)
    scale = np.sqrt(depth)
    corr = cov / np.outer(scale, scale)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return labels, corr


def species_aggregate(effects: Sequence[EffectRecord], rho: float = DEFAULT_RHO) -> list[AggregatedEffect]:
    """One aggregated effect per species, sorted by species label."""
    groups: dict[str, list[EffectRecord]] = defaultdict(list)
    for e in effects:
        if not e.species:
            raise MissingSpecies(e.effect_key)
        groups[e.species].append(e)
    return [aggregate_correlated(groups[s], rho, key=s) for s in sorted(groups)]


@dataclass(frozen=True)
class SpeciesMatch:
    matched: dict[str, str]  # dataset species -> tree tip label
    missing_from_tree: list[str]
    unused_tips: list[str]


def match_species(tree: PhyloTree, species: Iterable[str]) -> SpeciesMatch:
    """Pair dataset species with tree tips (case/underscore-insensitive)."""
    tips = {canonical_label(t): t for t in tree.tip_labels()}
    matched, missing = {}, []
    for s in sorted(set(species)):
        tip = tips.get(canonical_label(s))
        if tip is None:
            missing.append(s)
        else:
            matched[s] = tip
    used = set(matched.values())
    return SpeciesMatch(matched, missing, sorted(t for t in tips.values() if t not in used))
