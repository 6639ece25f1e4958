"""Parsers for effect tables, bibliographies, trees, and the effect/record join."""

from maenrich.ingest.bibtex import (
    BibtexError,
    EmptyEntry,
    MissingAuthors,
    UnbalancedBraces,
    parse_bibtex,
)
from maenrich.ingest.countries import countries_of, country_of
from maenrich.ingest.dataset import (
    BadNumeric,
    ColumnMapping,
    DuplicateEffectKey,
    InvalidMapping,
    MissingColumn,
    NonPositiveVariance,
    parse_dataset,
    serialize_dataset,
)
from maenrich.ingest.link import AmbiguousMatch, LinkedCorpus, link_records
from maenrich.ingest.newick import DuplicateTip, MissingBranchLength, ParseError, parse_newick
from maenrich.ingest.records import BibRecord, EffectRecord, normalize_doi, reference_key
from maenrich.ingest.ris import RecordWithoutTerminator, parse_ris


def parse_bibliography(text: str, filename: str = "", refs_field: str | None = None) -> list[BibRecord]:
    """Dispatch on file extension (``.ris`` vs anything else) or content."""
    is_ris = filename.lower().endswith(".ris") or text.lstrip("﻿ \n\r\t").startswith("TY  -")
    if is_ris:
        return parse_ris(text)
    if refs_field:
        return parse_bibtex(text, refs_field=refs_field)
    return parse_bibtex(text)


__all__ = [
    "AmbiguousMatch",
    "BadNumeric",
    "BibRecord",
    "BibtexError",
    "ColumnMapping",
    "DuplicateEffectKey",
    "DuplicateTip",
    "EffectRecord",
    "EmptyEntry",
    "InvalidMapping",
    "LinkedCorpus",
    "MissingAuthors",
    "MissingBranchLength",
    "MissingColumn",
    "NonPositiveVariance",
    "ParseError",
    "RecordWithoutTerminator",
    "UnbalancedBraces",
    "countries_of",
    "country_of",
    "link_records",
    "normalize_doi",
    "parse_bibliography",
    "parse_bibtex",
    "parse_dataset",
    "parse_newick",
    "parse_ris",
    "reference_key",
    "serialize_dataset",
]
