"""Rooted phylogenetic tree with branch lengths."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np


def canonical_label(label: str) -> str:
    """Case-insensitive key treating underscores and spaces alike."""
    return " ".join(label.replace("_", " ").split()).lower()


@dataclass
class PhyloTree:
    """Parent-pointer tree. Node 0 is not necessarily the root; see ``root``.

    ``lengths[i]`` is the branch from node ``i`` up to its parent. The root's
    own length is kept for round-tripping but never counted in depths.
    """

    parent: list[int] = field(default_factory=list)
    labels: list[str | None] = field(default_factory=list)
    lengths: list[float] = field(default_factory=list)
    root: int = 0

    def __post_init__(self):
        self._children: list[list[int]] | None = None

    def add_node(self, parent: int, label: str | None, length: float) -> int:
        self.parent.append(parent)
        self.labels.append(label)
        self.lengths.append(float(length))
        self._children = None
        return len(self.parent) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def children(self, node: int) -> list[int]:
        if self._children is None:
            kids: list[list[int]] = [[] for _ in self.parent]
            for i, p in enumerate(self.parent):
                if p >= 0:
                    kids[p].append(i)
            self._children = kids
        return self._children[node]

    def preorder(self) -> list[int]:
        order = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(reversed(self.children(node)))
        return order

    def tips(self) -> list[int]:
        """Leaf node ids in left-to-right order."""
        return [n for n in self.preorder() if not self.children(n)]

    def tip_labels(self) -> list[str]:
        return [self.labels[n] or "" for n in self.tips()]

    def depths(self) -> np.ndarray:
        """Root-to-node path length for every node (root excluded from sum)."""
        d = np.zeros(self.n_nodes)
        for node in self.preorder():
            if node != self.root:
                d[node] = d[self.parent[node]] + self.lengths[node]
        return d

    def tip_depths(self) -> dict[str, float]:
        d = self.depths()
        return {self.labels[n] or "": float(d[n]) for n in self.tips()}

    def find_tip(self, label: str) -> int | None:
        key = canonical_label(label)
        for n in self.tips():
            if canonical_label(self.labels[n] or "") == key:
                return n
        return None

    def ancestry_matrix(self) -> tuple[list[str], np.ndarray]:
        """Tip x node 0/1 matrix: entry set when the node's branch lies on the
        root-to-tip path. The root column is always zero."""
        tips = self.tips()
        A = np.zeros((len(tips), self.n_nodes))
        for row, tip in enumerate(tips):
            node = tip
            while node != self.root:
                A[row, node] = 1.0
                node = self.parent[node]
        return [self.labels[t] or "" for t in tips], A

    def to_newick(self) -> str:
        def fmt_len(x: float) -> str:
            return repr(float(x))

        def label(node: int) -> str:
            text = self.labels[node] or ""
            if text and re.search(r"[\s():;,\[\]']", text):
                text = "'" + text.replace("'", "''") + "'"
            return text

        def emit(node: int) -> str:
            kids = self.children(node)
            body = "(" + ",".join(emit(k) for k in kids) + ")" if kids else ""
            return f"{body}{label(node)}:{fmt_len(self.lengths[node])}"

        return emit(self.root) + ";"

    def to_nested(self) -> dict:
        """Nested ``{"label", "length", "children"}`` form for JSON output."""

        def emit(node: int) -> dict:
            out = {"label": self.labels[node], "length": self.lengths[node]}
            kids = self.children(node)
            if kids:
                out["children"] = [emit(k) for k in kids]
            return out

        return emit(self.root)
