"""BibTeX reader.

Handles ``@string`` macros, ``#`` concatenation, braced and quoted
values, and both ``{...}`` and ``(...)`` entry delimiters. ``@comment``
and ``@preamble`` blocks are skipped.
"""

from __future__ import annotations

import re

from maenrich.errors import InputError
from maenrich.ingest.countries import countries_of
from maenrich.ingest.latex import decode_latex
from maenrich.ingest.records import BibRecord, normalize_doi, parse_year, reference_key

DEFAULT_REFS_FIELD = "cited-references"

_MONTHS = {
    m: m.capitalize()
    for m in ("jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec")
}
_IDENT = re.compile(r"[^\s\"#%'(),={}]+")


class BibtexError(InputError):
    pass


class UnbalancedBraces(BibtexError):
    def __init__(self, offset: int):
        super().__init__(f"unbalanced braces starting at offset {offset}")
        self.offset = offset


class EmptyEntry(BibtexError):
    def __init__(self, key: str):
        super().__init__(f"entry {key!r} has no fields")
        self.key = key


class MissingAuthors(BibtexError):
    def __init__(self, key: str):
        super().__init__(f"entry {key!r} has no authors")
        self.key = key


class BibtexSyntaxError(BibtexError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        n = len(self.text)
        while self.pos < n and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def braced(self) -> str:
        """Content of a ``{...}`` group starting at pos; braces kept inside."""
        start = self.pos
        depth = 0
        i = self.pos
        text = self.text
        n = len(text)
        while i < n:
            c = text[i]
            if c == "\\":
                i += 2
                continue
            if c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    self.pos = i + 1
                    return text[start + 1:i]
            i += 1
        raise UnbalancedBraces(start)

    def quoted(self) -> str:
        start = self.pos
        depth = 0
        i = self.pos + 1
        text = self.text
        while i < len(text):
            c = text[i]
            if c == "\\":
                i += 2
                continue
            if c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
            elif c == '"' and depth == 0:
                self.pos = i + 1
                return text[start + 1:i]
            i += 1
        raise UnbalancedBraces(start)

    def ident(self) -> str:
        m = _IDENT.match(self.text, self.pos)
        if not m:
            raise BibtexSyntaxError(self.pos, "expected identifier")
        self.pos = m.end()
        return m.group(0)


def _value(sc: _Scanner, macros: dict[str, str]) -> str:
    parts = []
    while True:
        sc.skip_ws()
        c = sc.peek()
        if c == "{":
            parts.append(sc.braced())
        elif c == '"':
            parts.append(sc.quoted())
        elif c == "":
            raise BibtexSyntaxError(sc.pos, "unexpected end of input in value")
        else:
            word = sc.ident()
            low = word.lower()
            if word.isdigit():
                parts.append(word)
            elif low in macros:
                parts.append(macros[low])
            elif low in _MONTHS:
                parts.append(_MONTHS[low])
            else:
                parts.append(word)
        sc.skip_ws()
        if sc.peek() == "#":
            sc.pos += 1
            continue
        return "".join(parts)


def _skip_block(sc: _Scanner):
    sc.skip_ws()
    if sc.peek() == "{":
        sc.braced()
    elif sc.peek() == "(":
        start = sc.pos
        end = sc.text.find(")", start)
        if end < 0:
            raise UnbalancedBraces(start)
        sc.pos = end + 1


def _split_authors(raw: str) -> list[str]:
    """Split on `` and `` at brace depth 0."""
    names = []
    depth = 0
    last = 0
    i = 0
    low = raw.lower()
    while i < len(raw):
        c = raw[i]
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
        elif depth == 0 and c.isspace():
            m = re.match(r"\s+and\s+", low[i:])
            if m:
                names.append(raw[last:i])
                i += m.end()
                last = i
                continue
        i += 1
    names.append(raw[last:])
    return [n for n in (decode_latex(x) for x in names) if n]


def read_entries(text: str) -> list[tuple[str, str, dict[str, str]]]:
    """Raw ``(type, key, {field: value})`` triples in file order.

    Field names are lowercased; values are undecoded.
    """
    sc = _Scanner(text)
    macros: dict[str, str] = {}
    out = []
    while True:
        at = text.find("@", sc.pos)
        if at < 0:
            break
        sc.pos = at + 1
        sc.skip_ws()
        m = re.compile(r"[A-Za-z]+").match(text, sc.pos)
        if not m:
            continue
        etype = m.group(0).lower()
        sc.pos = m.end()
        sc.skip_ws()
        if etype in ("comment", "preamble"):
            _skip_block(sc)
            continue
        opener = sc.peek()
        if opener not in "{(" or opener == "":
            raise BibtexSyntaxError(sc.pos, f"expected '{{' after @{etype}")
        closer = "}" if opener == "{" else ")"
        entry_start = sc.pos
        sc.pos += 1
        if etype == "string":
            sc.skip_ws()
            name = sc.ident().lower()
            sc.skip_ws()
            if sc.peek() != "=":
                raise BibtexSyntaxError(sc.pos, "expected '=' in @string")
            sc.pos += 1
            macros[name] = _value(sc, macros)
            sc.skip_ws()
            if sc.peek() != closer:
                raise UnbalancedBraces(entry_start)
            sc.pos += 1
            continue

        sc.skip_ws()
        key_match = re.compile(r"[^,\s}]*").match(text, sc.pos)
        key = key_match.group(0)
        sc.pos = key_match.end()
        fields: dict[str, str] = {}
        while True:
            sc.skip_ws()
            c = sc.peek()
            if c == ",":
                sc.pos += 1
                continue
            if c == closer:
                sc.pos += 1
                break
            if c == "" or c == "@":
                raise UnbalancedBraces(entry_start)
            name = sc.ident().lower()
            sc.skip_ws()
            if sc.peek() != "=":
                if sc.peek() in ("", "@"):
                    raise UnbalancedBraces(entry_start)
                raise BibtexSyntaxError(sc.pos, f"expected '=' after field {name!r}")
            sc.pos += 1
            fields[name] = _value(sc, macros)
        if not fields:
            raise EmptyEntry(key)
        out.append((etype, key, fields))
    return out


def _first(fields: dict[str, str], *names: str) -> str | None:
    for n in names:
        if n in fields:
            value = decode_latex(fields[n])
            if value:
                return value
    return None


def _split_semicolons(raw: str) -> list[str]:
    return [s.strip() for s in raw.split(";") if s.strip()]


def entry_to_record(key: str, fields: dict[str, str], refs_field: str = DEFAULT_REFS_FIELD) -> BibRecord:
    authors = _split_authors(fields.get("author", ""))
    if not authors:
        raise MissingAuthors(key)
    affiliations: list[str] = []
    for name in ("affiliations", "affiliation", "address"):
        if name in fields:
            affiliations += _split_semicolons(decode_latex(fields[name]))
    refs: dict[str, None] = {}
    if refs_field.lower() in fields:
        for ref in fields[refs_field.lower()].split(";"):
            rk = reference_key(decode_latex(ref))
            if rk:
                refs.setdefault(rk, None)
    funder = _first(fields, "funding", "funding_details", "funder")
    if funder:
        funder = _split_semicolons(funder)[0] if _split_semicolons(funder) else None
    return BibRecord(
        key=key or None,
        doi=normalize_doi(_first(fields, "doi")),
        title=_first(fields, "title") or "",
        authors=tuple(authors),
        countries=countries_of(affiliations),
        references=tuple(refs),
        journal=_first(fields, "journal", "journaltitle"),
        funder=funder,
        language=_first(fields, "language", "langid"),
        year=parse_year(_first(fields, "year", "date")),
    )


def parse_bibtex(text: str, refs_field: str = DEFAULT_REFS_FIELD) -> list[BibRecord]:
    """Parse BibTeX into records, preserving file order.

    ``refs_field`` names the (nonstandard) field holding cited references
    separated by semicolons. Affiliations come from ``affiliations``,
    ``affiliation`` or ``address`` (semicolon-separated, one per author
    institution).
    """
    return [entry_to_record(key, fields, refs_field) for _, key, fields in read_entries(text)]
