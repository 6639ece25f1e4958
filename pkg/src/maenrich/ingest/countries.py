"""Affiliation string -> country name."""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

from maenrich.ingest.records import fold_diacritics, squash_ws

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

# Trailing postcodes / zip codes glued onto the country token.
_TRAILING_CODE = re.compile(r"^[\d\- ]+|[\d\- ]+$")

# Title-casing would mangle these.
_LOWER_WORDS = {"and", "of", "the"}


@lru_cache(maxsize=1)
def synonym_table() -> dict[str, str]:
    text = resources.files("maenrich.data").joinpath("countries.toml").read_text("utf-8")
    table = tomllib.loads(text).get("synonyms", {})
    return {k.lower(): v for k, v in table.items()}


def _title(token: str) -> str:
    words = token.split(" ")
    out = []
    for i, w in enumerate(words):
        if i > 0 and w.lower() in _LOWER_WORDS:
            out.append(w.lower())
        else:
            out.append(w[:1].upper() + w[1:].lower())
    return " ".join(out)


def country_of(affiliation: str) -> str | None:
    """Country named by the last comma-separated token of an affiliation."""
    token = squash_ws(affiliation).rstrip(". ")
    if not token:
        return None
    token = token.rsplit(",", 1)[-1].strip()
    token = _TRAILING_CODE.sub("", token).strip().rstrip(".")
    if not token:
        return None
    key = fold_diacritics(token).lower()
    synonyms = synonym_table()
    if key in synonyms:
        return synonyms[key]
    return _title(token)


def countries_of(affiliations: list[str]) -> tuple[str, ...]:
    """Distinct countries of a paper's affiliations, first-seen order."""
    seen: dict[str, None] = {}
    for aff in affiliations:
        country = country_of(aff)
        if country:
            seen.setdefault(country, None)
    return tuple(seen)
