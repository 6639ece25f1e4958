"""Test doubles: recorded HTTP transport, manual clock, synthetic corpora."""

from __future__ import annotations

import json
import random
from datetime import datetime, timedelta, timezone
from pathlib import Path

import httpx

from maenrich.altclient import API_ROOT

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"
FIXED_NOW = datetime(2024, 3, 1, 12, 0, 0, tzinfo=timezone.utc)


def recorded_responses() -> dict:
    return json.loads((DATA / "altmetric_recorded.json").read_text())


class RecordedTransport(httpx.BaseTransport):
    """Replays recorded bodies; an optional script of statuses is served first."""

    def __init__(self, responses: dict | None = None, script: list[int] | None = None):
        self.responses = recorded_responses() if responses is None else responses
        self.script = list(script or [])
        self.calls: list[str] = []

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        doi = str(request.url.path).split("/v1/doi/", 1)[1]
        self.calls.append(doi)
        if self.script:
            return httpx.Response(self.script.pop(0), request=request)
        rec = self.responses.get(doi)
        if rec is None or rec["status"] == 404:
            return httpx.Response(404, text="Not Found", request=request)
        return httpx.Response(rec["status"], json=rec["body"], request=request)


class ExplodingTransport(httpx.BaseTransport):
    """Fails the test if any request is attempted."""

    def __init__(self):
        self.calls = 0

    def handle_request(self, request):
        self.calls += 1
        raise AssertionError(f"network used: {request.url}")


class ManualClock:
    """Time moves only when ``sleep`` is called or ``advance`` is used."""

    def __init__(self, start: float = 1000.0):
        self.t = start
        self.sleeps: list[float] = []

    def monotonic(self) -> float:
        return self.t

    def sleep(self, seconds: float) -> None:
        self.sleeps.append(seconds)
        self.t += seconds

    def advance(self, seconds: float) -> None:
        self.t += seconds

    def now(self) -> datetime:
        return FIXED_NOW + timedelta(seconds=self.t - 1000.0)


def api_url(doi: str) -> str:
    return API_ROOT + doi


# -- synthetic corpora ------------------------------------------------------

SURNAMES = ["Adams", "Brown", "Cruz", "Dubois", "Eriksen", "Fischer", "Gupta", "Hansen", "Ivanova", "Jones",
            "Kim", "Lopez", "Moreau", "Nakamura", "Olsen", "Petrov", "Quinn", "Rossi", "Schmidt", "Tan",
            "Usman", "Vogel", "Wang", "Xu", "Yilmaz", "Zhang"]
COUNTRIES = ["United States", "United Kingdom", "Germany", "France", "Japan", "China", "Brazil", "Australia",
             "Canada", "India", "Spain", "Italy", "Norway", "Kenya", "Chile", "Mexico"]


def random_author(rng: random.Random) -> str:
    return f"{rng.choice(SURNAMES)}, {rng.choice('ABCDEFGHJKLMNPRSTW')}."


def random_bib_records(rng: random.Random, n_papers: int, max_authors: int = 6, n_refs: int = 30):
    """Random BibRecords with authors, countries and references."""
    from maenrich.ingest.records import BibRecord

    out = []
    for p in range(n_papers):
        authors = tuple(dict.fromkeys(random_author(rng) for _ in range(rng.randint(1, max_authors))))
        countries = tuple(dict.fromkeys(rng.choice(COUNTRIES) for _ in range(rng.randint(0, 3))))
        refs = tuple(sorted({f"10.9999/ref.{rng.randrange(n_refs)}" for _ in range(rng.randint(0, 8))}))
        out.append(BibRecord(title=f"Paper {p}", authors=authors, key=f"p{p}", doi=f"10.5555/paper.{p}",
                             countries=countries, references=refs, year=2000 + rng.randrange(20)))
    return out


def write_synthetic_corpus(root: Path, n_effects: int = 500, n_studies: int = 100, seed: int = 7) -> dict:
    """Effects table, mapping, BibTeX, tree and altmetric cache for end-to-end runs."""
    from maenrich.altclient import AltmetricCache

    rng = random.Random(seed)
    root.mkdir(parents=True, exist_ok=True)
    species = [f"Species_{i:03d}" for i in range(60)]
    classes = ["Aves", "Mammalia", "Amphibia", "Actinopterygii"]
    interventions = ["warming", "drought", "nutrient", "predator", "habitat"]
    outcomes = ["growth", "survival", "reproduction", "behaviour"]
    lines = ["study,es_id,yi,vi,intervention,outcome,population,species,class,year,doi"]
    for i in range(n_effects):
        s = i % n_studies
        sp = rng.choice(species)
        cls = classes[int(sp[-3:]) % len(classes)]
        pop = rng.choice(["adult", "juvenile", ""])
        yi = round(rng.gauss(0.25, 0.4), 4)
        vi = round(rng.uniform(0.01, 0.1), 4)
        lines.append(f"st{s:03d},st{s:03d}.{i},{yi},{vi},{rng.choice(interventions)},{rng.choice(outcomes)},"
                     f"{pop},{sp},{cls},{2000 + s % 20},10.5555/study.{s}")
    (root / "effects.csv").write_text("\n".join(lines) + "\n")
    (root / "mapping.toml").write_text(
        '[columns]\nstudy_id = "study"\neffect_id = "es_id"\nyi = "yi"\nvi = "vi"\n'
        'moderators = ["intervention", "outcome", "population", "class"]\n'
        'species = "species"\nyear = "year"\ndoi = "doi"\n\n'
        '[run]\nx = "intervention"\ny = "outcome"\nshape = "population"\n'
        'columns = ["intervention", "outcome", "population"]\ngroup = "class"\n')
    entries = []
    for s in range(n_studies):
        authors = " and ".join(dict.fromkeys(random_author(rng) for _ in range(rng.randint(1, 5))))
        affs = "; ".join(f"Institute {rng.randrange(50)}, City, {rng.choice(COUNTRIES)}"
                         for _ in range(rng.randint(1, 3)))
        refs = "; ".join(sorted({f"10.9999/ref.{rng.randrange(150)}" for _ in range(rng.randint(1, 10))}))
        entries.append(f"@article{{st{s:03d},\n  author = {{{authors}}},\n  title = {{Study {s}}},\n"
                       f"  journal = {{Journal {s % 9}}},\n  year = {{{2000 + s % 20}}},\n"
                       f"  doi = {{10.5555/study.{s}}},\n  affiliations = {{{affs}}},\n"
                       f"  cited-references = {{{refs}}}\n}}\n")
    (root / "refs.bib").write_text("\n".join(entries))
    (root / "tree.nwk").write_text(random_newick(rng, species) + "\n")
    cache = AltmetricCache(root / "cache")
    for s in range(n_studies):
        doi = f"10.5555/study.{s}"
        if s % 10 == 9:
            cache.put(doi, 404, None, "2024-03-01T12:00:00+00:00")
        else:
            body = {"doi": doi, "score": round(rng.expovariate(1 / 150), 2),
                    "cited_by_policies_count": rng.randrange(4)}
            cache.put(doi, 200, body, "2024-03-01T12:00:00+00:00")
    return {k: root / k for k in ("effects.csv", "mapping.toml", "refs.bib", "tree.nwk", "cache")}


def random_newick(rng: random.Random, labels: list[str]) -> str:
    """Random binary tree over ``labels`` by repeated random joins."""
    nodes = [f"{lab}:{rng.uniform(0.1, 5):.3f}" for lab in labels]
    while len(nodes) > 1:
        a = nodes.pop(rng.randrange(len(nodes)))
        b = nodes.pop(rng.randrange(len(nodes)))
        nodes.append(f"({a},{b}):{rng.uniform(0.1, 5):.3f}")
    return nodes[0].rsplit(":", 1)[0] + ";"


def random_tree(rng: random.Random, n_tips: int, max_children: int = 3):
    """Random tree with named internal nodes.

    Returns ``(newick, parents, lengths, tips)`` where ``parents`` and
    ``lengths`` are plain dicts over node names, for path-walking oracles.
    """
    tips = [f"T{i}" for i in range(n_tips)]
    pending = [(t, t) for t in tips]  # (name, newick text)
    parents: dict[str, str | None] = {}
    lengths: dict[str, float] = {}
    counter = 0
    while len(pending) > 1:
        k = rng.randint(2, min(max_children, len(pending)))
        kids = [pending.pop(rng.randrange(len(pending))) for _ in range(k)]
        name = f"N{counter}"
        counter += 1
        parts = []
        for kid, text in kids:
            lengths[kid] = round(rng.uniform(0.01, 3), 6)
            parents[kid] = name
            parts.append(f"{text}:{lengths[kid]!r}")
        pending.append((name, f"({','.join(parts)}){name}"))
    root, text = pending[0]
    parents[root] = None
    lengths[root] = 0.0
    return text + ";", parents, lengths, tips
