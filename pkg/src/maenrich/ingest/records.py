"""Domain records produced by the parsers."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field

_DOI_PREFIXES = (
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "doi.org/",
    "doi:",
)

_DOI_SEARCH = re.compile(r"10\.\d{4,9}/[^\s;,\"'<>]+", re.IGNORECASE)


def normalize_doi(value: str | None) -> str | None:
    """Lowercase a DOI and strip resolver/``doi:`` prefixes.

    Returns None for blank input.
    """
    if value is None:
        return None
    doi = value.strip().lower()
    changed = True
    while changed:
        changed = False
        for prefix in _DOI_PREFIXES:
            if doi.startswith(prefix):
                doi = doi[len(prefix):].strip()
                changed = True
    doi = doi.rstrip(".")
    return doi or None


def find_doi(text: str) -> str | None:
    """First DOI-looking token inside free text, normalized."""
    m = _DOI_SEARCH.search(text)
    return normalize_doi(m.group(0)) if m else None


def fold_diacritics(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(c for c in decomposed if not unicodedata.combining(c))


def squash_ws(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class EffectRecord:
    """One effect-size row: estimate ``yi`` with known sampling variance ``vi``."""

    study_key: str
    effect_key: str
    yi: float
    vi: float
    moderators: dict[str, str | None] = field(default_factory=dict)
    species: str | None = None
    year: int | None = None
    doi: str | None = None

    def moderator(self, name: str) -> str | None:
        return self.moderators.get(name)

    def to_dict(self) -> dict:
        return {
            "study_key": self.study_key,
            "effect_key": self.effect_key,
            "yi": self.yi,
            "vi": self.vi,
            "moderators": dict(self.moderators),
            "species": self.species,
            "year": self.year,
            "doi": self.doi,
        }


@dataclass(frozen=True)
class BibRecord:
    """Bibliographic metadata for one publication.

    ``references`` holds cited-reference keys: a normalized DOI when the
    reference string carries one, otherwise ``surname|year|titleprefix``.
    """

    title: str
    authors: tuple[str, ...]
    key: str | None = None
    doi: str | None = None
    countries: tuple[str, ...] = ()
    references: tuple[str, ...] = ()
    journal: str | None = None
    funder: str | None = None
    language: str | None = None
    year: int | None = None

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "doi": self.doi,
            "title": self.title,
            "authors": list(self.authors),
            "countries": list(self.countries),
            "references": list(self.references),
            "journal": self.journal,
            "funder": self.funder,
            "language": self.language,
            "year": self.year,
        }


def parse_year(text: str | None) -> int | None:
    if not text:
        return None
    m = re.search(r"\d{4}", text)
    return int(m.group(0)) if m else None


_REF_YEAR = re.compile(r"\((\d{4})[a-z]?\)")
_ANY_YEAR = re.compile(r"\b(1[5-9]\d\d|20\d\d)\b")
# "Surname, I.J.," author tokens at the head of a Scopus-style reference.
_AUTHOR_TOKEN = re.compile(r"[^,]+,\s*(?:[A-Z][a-z]?\.\s*-?\s*)+,?\s*")
# Web of Science "Surname IJ, 1999, SOURCE TITLE".
_WOS = re.compile(r"^([^,]+?)\s+[A-Z]{1,4},\s*(\d{4}),\s*(.+)$")


def reference_key(text: str) -> str | None:
    """Stable key for one cited-reference string.

    DOI when present; otherwise first-author surname, year and the first
    24 alphanumerics of the title, joined with ``|``. Scopus-style strings
    (``Authors, Title (Year) Journal``) and Web of Science strings
    (``Surname I, Year, Source``) are recognized; anything else falls back
    to the start of the string.
    """
    text = squash_ws(text)
    if not text:
        return None
    doi = find_doi(text)
    if doi:
        return doi
    plain = fold_diacritics(text)
    wos = _WOS.match(plain)
    if wos:
        surname = re.sub(r"[^a-z\- ]", "", wos.group(1).lower()).strip()
        return f"{surname}|{wos.group(2)}|{re.sub(r'[^a-z0-9]', '', wos.group(3).lower())[:24]}"
    surname = plain.split(",", 1)[0].strip().lower() if "," in plain else plain.split()[0].lower()
    surname = re.sub(r"[^a-z\- ]", "", surname).strip()
    year_match = _REF_YEAR.search(plain) or _ANY_YEAR.search(plain)
    year = year_match.group(1) if year_match else ""
    head = plain[: year_match.start()] if year_match and _REF_YEAR.search(plain) else plain
    pos = 0
    while True:
        m = _AUTHOR_TOKEN.match(head, pos)
        if not m:
            break
        pos = m.end()
    title = head[pos:] if pos < len(head) else head
    title_key = re.sub(r"[^a-z0-9]", "", title.lower())[:24]
    return f"{surname}|{year}|{title_key}"
