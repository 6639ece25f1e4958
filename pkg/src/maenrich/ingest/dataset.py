"""Effect-size tables: column mapping config and CSV parsing."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from maenrich.errors import InputError
from maenrich.ingest.records import EffectRecord, normalize_doi

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class MissingColumn(InputError):
    def __init__(self, name: str):
        super().__init__(f"missing column {name!r}")
        self.name = name


class BadNumeric(InputError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}: column {column!r} is not a finite number: {value!r}")
        self.row = row
        self.column = column


class NonPositiveVariance(InputError):
    def __init__(self, row: int, value: float):
        super().__init__(f"row {row}: sampling variance must be > 0, got {value}")
        self.row = row


class DuplicateEffectKey(InputError):
    def __init__(self, key: str):
        super().__init__(f"duplicate effect key {key!r}")
        self.key = key


class InvalidMapping(InputError):
    pass


@dataclass(frozen=True)
class ColumnMapping:
    """Which CSV columns hold which effect-record fields."""

    study_id: str
    yi: str
    vi: str
    effect_id: str | None = None
    moderators: tuple[str, ...] = ()
    species: str | None = None
    year: str | None = None
    doi: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "moderators", tuple(self.moderators))
        if not self.yi or not self.vi:
            raise InvalidMapping("yi and vi columns must be named")
        if self.yi == self.vi:
            raise InvalidMapping(f"yi and vi both map to column {self.yi!r}")
        if len(set(self.moderators)) != len(self.moderators):
            raise InvalidMapping("duplicate moderator columns")

    @classmethod
    def from_toml(cls, text: str) -> "ColumnMapping":
        """Build from a TOML document with a ``[columns]`` table.

        Other top-level tables are kept in ``extra`` for the CLI.
        """
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise InvalidMapping(f"mapping config is not valid TOML: {exc}") from None
        cols = doc.get("columns")
        if not isinstance(cols, dict):
            raise InvalidMapping("mapping config needs a [columns] table")
        known = {"study_id", "yi", "vi", "effect_id", "moderators", "species", "year", "doi"}
        unknown = set(cols) - known
        if unknown:
            raise InvalidMapping(f"unknown keys in [columns]: {sorted(unknown)}")
        for required in ("study_id", "yi", "vi"):
            if required not in cols:
                raise InvalidMapping(f"[columns] lacks {required!r}")
        extra = {k: v for k, v in doc.items() if k != "columns"}
        return cls(**cols, extra=extra)

    def mapped_columns(self) -> list[str]:
        cols = [self.study_id]
        if self.effect_id:
            cols.append(self.effect_id)
        cols += [self.yi, self.vi]
        cols += list(self.moderators)
        cols += [c for c in (self.species, self.year, self.doi) if c]
        return cols


def _number(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise BadNumeric(row, column, text) from None
    if not math.isfinite(value):
        raise BadNumeric(row, column, text)
    return value


def _year(text: str, row: int, column: str) -> int | None:
    text = text.strip()
    if not text:
        return None
    try:
        return int(text)
    except ValueError:
        value = _number(text, row, column)
        if value != int(value):
            raise BadNumeric(row, column, text) from None
        return int(value)


def parse_dataset(csv_text: str, mapping: ColumnMapping) -> list[EffectRecord]:
    """Parse an effect table.

    Row numbers in errors count the header as row 1, so the first data
    row is row 2 (what a spreadsheet shows). Without an ``effect_id``
    column, effect keys are ``<study>.<n>`` with ``n`` counting that
    study's rows from 1.
    """
    reader = csv.DictReader(io.StringIO(csv_text.lstrip("﻿")))
    header = reader.fieldnames or []
    for col in mapping.mapped_columns():
        if col not in header:
            raise MissingColumn(col)

    records: list[EffectRecord] = []
    seen: set[str] = set()
    per_study: dict[str, int] = {}
    for i, row in enumerate(reader):
        rownum = i + 2
        study = (row[mapping.study_id] or "").strip()
        yi = _number(row[mapping.yi] or "", rownum, mapping.yi)
        vi = _number(row[mapping.vi] or "", rownum, mapping.vi)
        if vi <= 0:
            raise NonPositiveVariance(rownum, vi)
        if mapping.effect_id:
            key = (row[mapping.effect_id] or "").strip()
        else:
            per_study[study] = per_study.get(study, 0) + 1
            key = f"{study}.{per_study[study]}"
        if key in seen:
            raise DuplicateEffectKey(key)
        seen.add(key)
        mods = {}
        for m in mapping.moderators:
            cell = (row[m] or "").strip()
            mods[m] = cell or None
        species = ((row[mapping.species] or "").strip() or None) if mapping.species else None
        year = _year(row[mapping.year] or "", rownum, mapping.year) if mapping.year else None
        doi = normalize_doi(row[mapping.doi]) if mapping.doi else None
        records.append(
            EffectRecord(
                study_key=study,
                effect_key=key,
                yi=yi,
                vi=vi,
                moderators=mods,
                species=species,
                year=year,
                doi=doi,
            )
        )
    return records


def serialize_dataset(records: list[EffectRecord], mapping: ColumnMapping) -> str:
    """Inverse of :func:`parse_dataset` for the mapped columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(mapping.mapped_columns())
    for r in records:
        row = [r.study_key]
        if mapping.effect_id:
            row.append(r.effect_key)
        row += [repr(r.yi), repr(r.vi)]
        row += [r.moderators.get(m) or "" for m in mapping.moderators]
        if mapping.species:
            row.append(r.species or "")
        if mapping.year:
            row.append("" if r.year is None else str(r.year))
        if mapping.doi:
            row.append(r.doi or "")
        writer.writerow(row)
    return buf.getvalue()
