"""Join effect rows to bibliographic records."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from maenrich.errors import InputError
from maenrich.ingest.records import BibRecord, EffectRecord


class AmbiguousMatch(InputError):
    def __init__(self, study_key: str):
        super().__init__(f"study {study_key!r} matches more than one bibliographic record")
        self.study_key = study_key


def record_ids(records: list[BibRecord]) -> list[str]:
    """Unique display id per record: DOI, else citation key, else position."""
    ids = []
    used: set[str] = set()
    for i, rec in enumerate(records):
        base = rec.doi or rec.key or f"record{i + 1}"
        rid = base
        n = 2
        while rid in used:
            rid = f"{base}#{n}"
            n += 1
        used.add(rid)
        ids.append(rid)
    return ids


@dataclass
class LinkedCorpus:
    effects: list[EffectRecord]
    records: list[BibRecord]
    record_ids: list[str]
    links: dict[str, int] = field(default_factory=dict)  # effect_key -> record index
    unmatched_effects: list[str] = field(default_factory=list)
    unmatched_records: list[str] = field(default_factory=list)

    def record_for(self, effect: EffectRecord) -> BibRecord | None:
        idx = self.links.get(effect.effect_key)
        return None if idx is None else self.records[idx]

    def record_id_for(self, effect: EffectRecord) -> str | None:
        idx = self.links.get(effect.effect_key)
        return None if idx is None else self.record_ids[idx]

    def match_set(self) -> set[tuple[str, str]]:
        return {(ek, self.record_ids[i]) for ek, i in self.links.items()}

    def to_dict(self) -> dict:
        return {
            "effects": [e.to_dict() for e in self.effects],
            "records": [dict(r.to_dict(), id=rid) for r, rid in zip(self.records, self.record_ids)],
            "links": {ek: self.record_ids[i] for ek, i in sorted(self.links.items())},
            "unmatched_effects": list(self.unmatched_effects),
            "unmatched_records": list(self.unmatched_records),
        }


def link_records(effects: list[EffectRecord], bib_records: list[BibRecord]) -> LinkedCorpus:
    """Associate each effect with at most one record.

    DOI match first, then exact study_key == citation key. A lookup hitting
    two or more records raises :class:`AmbiguousMatch`.
    """
    by_doi: dict[str, list[int]] = defaultdict(list)
    by_key: dict[str, list[int]] = defaultdict(list)
    for i, rec in enumerate(bib_records):
        if rec.doi:
            by_doi[rec.doi].append(i)
        if rec.key:
            by_key[rec.key].append(i)

    links: dict[str, int] = {}
    unmatched = []
    for eff in effects:
        hits = by_doi.get(eff.doi, []) if eff.doi else []
        if not hits:
            hits = by_key.get(eff.study_key, [])
        if len(hits) > 1:
            raise AmbiguousMatch(eff.study_key)
        if hits:
            links[eff.effect_key] = hits[0]
        else:
            unmatched.append(eff.effect_key)

    ids = record_ids(bib_records)
    used = set(links.values())
    return LinkedCorpus(
        effects=list(effects),
        records=list(bib_records),
        record_ids=ids,
        links=links,
        unmatched_effects=sorted(unmatched),
        unmatched_records=sorted(ids[i] for i in range(len(bib_records)) if i not in used),
    )
