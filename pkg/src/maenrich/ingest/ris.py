"""RIS reader (``TG  - value`` lines, records closed by ``ER  -``)."""

from __future__ import annotations

import re

from maenrich.errors import InputError
from maenrich.ingest.countries import countries_of
from maenrich.ingest.records import BibRecord, normalize_doi, parse_year, reference_key, squash_ws

_TAG_LINE = re.compile(r"^([A-Z][A-Z0-9])\s{1,2}-(?: (.*))?$")


class RisError(InputError):
    pass


class RecordWithoutTerminator(RisError):
    def __init__(self, index: int):
        super().__init__(f"record {index} has no 'ER  -' terminator")
        self.index = index


class MissingAuthors(RisError):
    def __init__(self, index: int):
        super().__init__(f"record {index} has no authors")
        self.index = index


def read_records(text: str) -> list[dict[str, list[str]]]:
    """Tag -> values (in order) for each record; indices are 1-based in errors."""
    records = []
    current: dict[str, list[str]] | None = None
    last_tag = None
    for line in text.lstrip("﻿").splitlines():
        m = _TAG_LINE.match(line.rstrip())
        if m:
            tag, value = m.group(1), (m.group(2) or "").strip()
            if tag == "ER":
                if current is None:
                    continue
                records.append(current)
                current = None
                last_tag = None
                continue
            if tag == "TY" or current is None:
                if current is not None:
                    raise RecordWithoutTerminator(len(records) + 1)
                current = {}
            current.setdefault(tag, []).append(value)
            last_tag = tag
        elif line.strip() and current is not None and last_tag is not None:
            # continuation of a wrapped value
            values = current[last_tag]
            values[-1] = (values[-1] + " " + line.strip()).strip()
    if current is not None:
        raise RecordWithoutTerminator(len(records) + 1)
    return records


def _first(rec: dict[str, list[str]], *tags: str) -> str | None:
    for t in tags:
        for v in rec.get(t, []):
            v = squash_ws(v)
            if v:
                return v
    return None


def record_to_bib(rec: dict[str, list[str]], index: int) -> BibRecord:
    authors = [squash_ws(a) for a in rec.get("AU", []) + rec.get("A1", []) if a.strip()]
    if not authors:
        raise MissingAuthors(index)
    affiliations = []
    for value in rec.get("AD", []):
        affiliations += [s.strip() for s in value.split(";") if s.strip()]
    refs: dict[str, None] = {}
    for value in rec.get("CR", []):
        for ref in value.split(";"):
            rk = reference_key(ref)
            if rk:
                refs.setdefault(rk, None)
    funder = _first(rec, "FU")
    if funder:
        funder = funder.split(";")[0].strip() or None
    return BibRecord(
        key=_first(rec, "ID"),
        doi=normalize_doi(_first(rec, "DO")),
        title=_first(rec, "T1", "TI") or "",
        authors=tuple(authors),
        countries=countries_of(affiliations),
        references=tuple(refs),
        journal=_first(rec, "JO", "JF", "T2"),
        funder=funder,
        language=_first(rec, "LA"),
        year=parse_year(_first(rec, "PY", "Y1")),
    )


def parse_ris(text: str) -> list[BibRecord]:
    """Parse RIS text.

    AU/A1 give authors, DO the DOI, PY/Y1 the year, T1/TI the title,
    JO/JF (then T2) the journal, AD affiliations, LA language, ID the
    citation key. Nonstandard CR lines carry cited references and FU the
    funder. Unknown tags are ignored.
    """
    return [record_to_bib(rec, i + 1) for i, rec in enumerate(read_records(text))]
