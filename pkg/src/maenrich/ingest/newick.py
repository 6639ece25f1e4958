"""Newick reader."""

from __future__ import annotations

import re
import warnings

from maenrich.errors import InputError
from maenrich.tree import PhyloTree

_UNQUOTED = re.compile(r"[^\s()\[\]':;,]+")
_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


class ParseError(InputError):
    def __init__(self, offset: int, expected: str):
        super().__init__(f"newick offset {offset}: expected {expected}")
        self.offset = offset
        self.expected = expected


class DuplicateTip(InputError):
    def __init__(self, label: str):
        super().__init__(f"duplicate tip label {label!r}")
        self.label = label


class MissingBranchLength(UserWarning):
    pass


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip(self):
        text = self.text
        while self.pos < len(text):
            c = text[self.pos]
            if c.isspace():
                self.pos += 1
            elif c == "[":
                end = text.find("]", self.pos)
                if end < 0:
                    raise ParseError(self.pos, "']' closing comment")
                self.pos = end + 1
            else:
                break

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def label(self) -> str | None:
        c = self.peek()
        if c == "'":
            start = self.pos
            i = self.pos + 1
            chunks = []
            while True:
                j = self.text.find("'", i)
                if j < 0:
                    raise ParseError(start, "closing quote")
                chunks.append(self.text[i:j])
                if self.text.startswith("''", j):
                    chunks.append("'")
                    i = j + 2
                    continue
                self.pos = j + 1
                return "".join(chunks)
        m = _UNQUOTED.match(self.text, self.pos)
        if not m:
            return None
        self.pos = m.end()
        return m.group(0)

    def length(self) -> float | None:
        if self.peek() != ":":
            return None
        self.pos += 1
        self.skip()
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            raise ParseError(self.pos, "branch length")
        value = float(m.group(0))
        if value < 0:
            raise ParseError(self.pos, "nonnegative branch length")
        self.pos = m.end()
        return value


def parse_newick(text: str) -> PhyloTree:
    """Parse one rooted Newick tree terminated by ``;``.

    Missing branch lengths below the root become 0 and trigger a single
    :class:`MissingBranchLength` warning. Internal labels are optional;
    tip labels must be present and unique.
    """
    r = _Reader(text)
    tree = PhyloTree()
    stack: list[int] = []
    missing = 0
    expect_item = True

    def finish(node: int):
        nonlocal missing
        length = r.length()
        if length is None:
            if tree.parent[node] >= 0:
                missing += 1
            length = 0.0
        tree.lengths[node] = length

    while True:
        if expect_item:
            c = r.peek()
            parent = stack[-1] if stack else -1
            if c == "(":
                r.pos += 1
                stack.append(tree.add_node(parent, None, 0.0))
                continue
            start = r.pos
            name = r.label()
            if not name:
                raise ParseError(start, "'(' or tip label")
            node = tree.add_node(parent, name, 0.0)
            finish(node)
            expect_item = False
            if not stack:
                if r.peek() != ";":
                    raise ParseError(r.pos, "';'")
                break
            continue

        c = r.peek()
        if c == "," and stack:
            r.pos += 1
            expect_item = True
        elif c == ")" and stack:
            r.pos += 1
            node = stack.pop()
            label = r.label()
            if label:
                tree.labels[node] = label
            finish(node)
        elif c == ";" and not stack:
            break
        else:
            raise ParseError(r.pos, "')' or ','" if stack else "';'")

    r.pos += 1
    r.skip()
    if r.pos < len(text):
        raise ParseError(r.pos, "end of input after ';'")

    tree.root = next(i for i, p in enumerate(tree.parent) if p < 0)
    seen = set()
    for label in tree.tip_labels():
        if label in seen:
            raise DuplicateTip(label)
        seen.add(label)
    if missing:
        warnings.warn(
            f"{missing} branch length(s) missing; treated as 0",
            MissingBranchLength,
            stacklevel=2,
        )
    return tree
