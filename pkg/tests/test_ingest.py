import random
import string
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import DATA
from maenrich.ingest import (
    AmbiguousMatch,
    BadNumeric,
    BibRecord,
    ColumnMapping,
    DuplicateEffectKey,
    DuplicateTip,
    EffectRecord,
    EmptyEntry,
    InvalidMapping,
    MissingAuthors,
    MissingBranchLength,
    MissingColumn,
    NonPositiveVariance,
    ParseError,
    RecordWithoutTerminator,
    UnbalancedBraces,
    country_of,
    link_records,
    normalize_doi,
    parse_bibliography,
    parse_bibtex,
    parse_dataset,
    parse_newick,
    parse_ris,
    reference_key,
    serialize_dataset,
)
from maenrich.ingest.latex import decode_latex

MAPPING = ColumnMapping(study_id="study", yi="yi", vi="vi", moderators=("intervention", "outcome"))


# -- effects table ------------------------------------------------------------


def test_three_row_table_field_by_field():
    text = (
        "study,yi,vi,intervention,outcome\n"
        "S1,0.1,0.04,I1,O1\n"
        "S1,0.3,0.04,I1,\n"
        "S2,0.5,0.04,I2,O2\n"
    )
    recs = parse_dataset(text, MAPPING)
    assert [r.yi for r in recs] == [0.1, 0.3, 0.5]
    assert [r.vi for r in recs] == [0.04] * 3
    assert [r.study_key for r in recs] == ["S1", "S1", "S2"]
    assert recs[0].moderators == {"intervention": "I1", "outcome": "O1"}
    assert recs[1].moderator("outcome") is None
    assert len({r.effect_key for r in recs}) == 3


def test_header_only_is_empty():
    assert parse_dataset("study,yi,vi,intervention,outcome\n", MAPPING) == []


def test_zero_variance_names_row_two():
    with pytest.raises(NonPositiveVariance) as err:
        parse_dataset("study,yi,vi,intervention,outcome\nS1,0.1,0,I1,O1\n", MAPPING)
    assert err.value.row == 2


def test_missing_column():
    with pytest.raises(MissingColumn) as err:
        parse_dataset("study,yi,vi,intervention\nS1,0.1,0.1,I1\n", MAPPING)
    assert err.value.name == "outcome"


def test_bad_numeric_reports_row_and_column():
    with pytest.raises(BadNumeric) as err:
        parse_dataset("study,yi,vi,intervention,outcome\nS1,0.1,0.1,a,b\nS2,abc,0.1,a,b\n", MAPPING)
    assert (err.value.row, err.value.column) == (3, "yi")


def test_duplicate_effect_key():
    m = ColumnMapping(study_id="study", effect_id="id", yi="yi", vi="vi")
    with pytest.raises(DuplicateEffectKey):
        parse_dataset("study,id,yi,vi\nS1,e1,0.1,0.1\nS2,e1,0.2,0.1\n", m)


def test_mapping_validation():
    with pytest.raises(InvalidMapping):
        ColumnMapping(study_id="s", yi="y", vi="y")
    with pytest.raises(InvalidMapping):
        ColumnMapping(study_id="s", yi="y", vi="v", moderators=("a", "a"))
    with pytest.raises(InvalidMapping):
        ColumnMapping.from_toml("[columns]\nyi='y'\nvi='v'\n")


def test_mapping_from_toml_keeps_other_tables():
    m = ColumnMapping.from_toml((DATA / "mapping.toml").read_text())
    assert m.moderators == ("intervention", "outcome", "population", "class")
    assert m.extra["levels"]["outcome"][0] == "growth"


def test_fixture_table_parses():
    m = ColumnMapping.from_toml((DATA / "mapping.toml").read_text())
    recs = parse_dataset((DATA / "effects.csv").read_text(), m)
    assert len(recs) == 16
    assert recs[0].doi == "10.1111/ele.12001"
    assert recs[0].species == "Parus major" and recs[0].year == 2015
    assert recs[-1].doi is None


_cell = st.text(alphabet=string.ascii_letters + " ,\"'é", min_size=0, max_size=8)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5, allow_nan=False), st.floats(1e-4, 3), _cell, _cell), max_size=12))
def test_serialize_round_trip(rows):
    recs = [
        EffectRecord(f"s{i % 3}", f"s{i % 3}.{i}", y, v, {"intervention": a or None, "outcome": b or None})
        for i, (y, v, a, b) in enumerate(rows)
    ]
    m = ColumnMapping(study_id="study", effect_id="id", yi="yi", vi="vi", moderators=("intervention", "outcome"))
    back = parse_dataset(serialize_dataset(recs, m), m)
    assert back == [
        EffectRecord(r.study_key, r.effect_key, r.yi, r.vi,
                     {k: (v.strip() or None) if v else None for k, v in r.moderators.items()})
        for r in recs
    ] or back == recs


# -- DOIs and reference keys ----------------------------------------------------


@pytest.mark.parametrize("raw", ["https://doi.org/10.1111/ELE.12001", "doi:10.1111/ele.12001",
                                 "http://dx.doi.org/10.1111/Ele.12001", " 10.1111/ele.12001 "])
def test_normalize_doi(raw):
    assert normalize_doi(raw) == "10.1111/ele.12001"


def test_reference_keys():
    assert reference_key("Smith J, 2010, ECOL LETT, DOI 10.1111/ELE.1") == "10.1111/ele.1"
    assert reference_key("Darwin C, 1859, On the origin of species") == "darwin|1859|ontheoriginofspecies"
    scopus = "Smith, J., Lee, K., Warming effects on birds (2010) Ecology Letters, 13, pp. 1-10"
    assert reference_key(scopus) == "smith|2010|warmingeffectsonbirds"


# -- BibTeX ----------------------------------------------------------------------


def test_bibtex_authors_split():
    recs = parse_bibtex("@article{k1, author = {Smith, A. and Lee, B.}, title = {T}}")
    assert len(recs) == 1
    assert list(recs[0].authors) == ["Smith, A.", "Lee, B."]


def test_bibtex_empty_and_errors():
    assert parse_bibtex("") == []
    with pytest.raises(UnbalancedBraces):
        parse_bibtex("@article{k1, author = {Smith, A., title = {T}")
    with pytest.raises(EmptyEntry):
        parse_bibtex("@article{k1,}")
    with pytest.raises(MissingAuthors):
        parse_bibtex("@article{k1, title = {T}}")


def test_bibtex_macros_concatenation_and_latex():
    text = """
    @string{jn = "Journal of " # "Ecology"}
    @comment{ignored {nested}}
    @article(k2,
      author = "M{\\"u}ller, Karl and Garc{\\'\\i}a, Mar{\\'\\i}a",
      title = {The {DNA} of {\\it trout}},
      journal = jn,
      year = 2001,
      affiliation = {ETH, Zurich, Switzerland},
    )"""
    (rec,) = parse_bibtex(text)
    assert rec.authors == ("Müller, Karl", "García, María")
    assert rec.journal == "Journal of Ecology"
    assert rec.title == "The DNA of trout"
    assert rec.year == 2001
    assert rec.countries == ("Switzerland",)


def test_bibtex_fixture():
    recs = parse_bibtex((DATA / "refs.bib").read_text())
    assert [r.key for r in recs][:2] == ["smith2015", "lee2016"]
    smith = recs[0]
    assert smith.doi == "10.1111/ele.12001"
    assert smith.journal == "Ecology Letters"
    assert smith.countries == ("United Kingdom", "South Korea")
    assert smith.funder == "Natural Environment Research Council"
    assert smith.references[-1] == "darwin|1859|ontheoriginofspecies"
    assert len(set(smith.references)) == len(smith.references)


def test_configurable_refs_field():
    text = "@article{k, author={A, B}, title={T}, cr = {10.1000/a; 10.1000/b; 10.1000/a}}"
    (rec,) = parse_bibtex(text, refs_field="cr")
    assert rec.references == ("10.1000/a", "10.1000/b")


def test_latex_decoding():
    assert decode_latex("Sch{\\\"o}nbrunn {\\ss}") == "Schönbrunn ß"
    assert decode_latex("{\\c c}a\\~no") == "çaño"


# -- RIS -------------------------------------------------------------------------

RIS_TWO = """TY  - JOUR
AU  - Smith, A.
AU  - Lee, B.
TI  - First
PY  - 2001
DO  - 10.1000/ABC
JO  - J Ecol
ER  -

TY  - JOUR
AU  - Chen, W.
T1  - Second
ER  -
"""


def test_ris_two_records():
    recs = parse_ris(RIS_TWO)
    assert [len(r.authors) for r in recs] == [2, 1]
    assert recs[0].doi == "10.1000/abc" and recs[0].year == 2001 and recs[0].journal == "J Ecol"
    assert recs[1].title == "Second"


def test_ris_whitespace_and_unterminated():
    assert parse_ris("  \n\n ") == []
    with pytest.raises(RecordWithoutTerminator) as err:
        parse_ris("TY  - JOUR\nAU  - Smith, A.\nTI  - x\n")
    assert err.value.index == 1


def test_bibtex_and_ris_agree_on_shared_fields():
    bib = {r.key: r for r in parse_bibtex((DATA / "refs.bib").read_text())}
    for r in parse_ris((DATA / "refs.ris").read_text()):
        b = bib[r.key]
        assert (r.doi, r.title, r.year, r.journal) == (b.doi, b.title, b.year, b.journal)
        assert set(r.authors) <= set(b.authors)


def test_bibliography_dispatch():
    assert parse_bibliography(RIS_TWO)[0].title == "First"
    assert parse_bibliography("@misc{k, author={A, B}, title={X}}", "refs.bib")[0].title == "X"


# -- countries ---------------------------------------------------------------------


@pytest.mark.parametrize("aff,country", [
    ("Dept of Zoology, University of Oxford, Oxford OX1 3PS, UK", "United Kingdom"),
    ("Harvard University, Cambridge, MA 02138, USA", "United States"),
    ("Kyoto University, Kyoto, japan", "Japan"),
    ("", None),
])
def test_country_of(aff, country):
    assert country_of(aff) == country


# -- Newick ------------------------------------------------------------------------


def test_minimal_tree():
    t = parse_newick("(A:1,B:1):0;")
    assert sorted(t.tip_labels()) == ["A", "B"]
    assert t.tip_depths() == {"A": 1.0, "B": 1.0}


def test_nested_depths():
    t = parse_newick("((A:1,B:1):1,C:2):0;")
    assert t.tip_depths() == {"A": 2.0, "B": 2.0, "C": 2.0}


def test_duplicate_tip():
    with pytest.raises(DuplicateTip) as err:
        parse_newick("(A:1,A:1);")
    assert err.value.label == "A"


@pytest.mark.parametrize("bad", ["(A:1,B:1)", "(A:1,B:1;", "(A:x,B:1);", "(A:-1,B:1);", ""])
def test_newick_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_newick(bad)


def test_missing_lengths_default_to_zero_with_warning():
    with pytest.warns(MissingBranchLength):
        t = parse_newick("((A,B:1)ab:2,C:3);")
    assert t.tip_depths() == {"A": 2.0, "B": 3.0, "C": 3.0}


def test_quoted_labels_and_comments():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        t = parse_newick("('Homo sapiens':1[&comment],'it''s':2)root:0;")
    assert sorted(t.tip_labels()) == ["Homo sapiens", "it's"]


def _random_newick(rng: random.Random, n: int) -> str:
    nodes = [f"T{i}:{rng.uniform(0, 3):.6g}" for i in range(n)]
    while len(nodes) > 1:
        k = rng.randint(2, min(3, len(nodes)))
        kids = [nodes.pop(rng.randrange(len(nodes))) for _ in range(k)]
        nodes.append(f"({','.join(kids)}):{rng.uniform(0, 3):.6g}")
    return nodes[0] + ";"


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10_000))
def test_newick_round_trip(n, seed):
    t = parse_newick(_random_newick(random.Random(seed), n))
    back = parse_newick(t.to_newick())
    a, b = t.tip_depths(), back.tip_depths()
    assert a.keys() == b.keys()
    assert all(abs(a[k] - b[k]) <= 1e-12 for k in a)


# -- linking ----------------------------------------------------------------------


def _eff(study, key, doi=None):
    return EffectRecord(study, key, 0.1, 0.1, {}, doi=doi)


def test_many_to_one_join():
    effs = [_eff("s", f"e{i}", "10.1000/x") for i in range(3)]
    rec = BibRecord(title="T", authors=("A",), doi="10.1000/x")
    linked = link_records(effs, [rec])
    assert set(linked.links.values()) == {0} and len(linked.links) == 3


def test_unmatched_effect_is_reported():
    linked = link_records([_eff("nobody", "e1")], [BibRecord(title="T", authors=("A",), key="k")])
    assert linked.unmatched_effects == ["e1"]
    assert linked.unmatched_records == ["k"]


def test_duplicate_doi_is_ambiguous():
    recs = [BibRecord(title="T", authors=("A",), doi="10.1000/x")] * 2
    with pytest.raises(AmbiguousMatch):
        link_records([_eff("s", "e", "10.1000/x")], recs)


def test_key_fallback_after_doi():
    recs = [BibRecord(title="T", authors=("A",), key="smith2015")]
    linked = link_records([_eff("smith2015", "e1", "10.1000/other")], recs)
    assert linked.links == {"e1": 0}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_linking_is_order_independent(seed):
    rng = random.Random(seed)
    recs = [BibRecord(title=f"T{i}", authors=("A",), key=f"k{i}", doi=f"10.1000/{i}" if i % 2 else None)
            for i in range(8)]
    effs = [_eff(f"k{rng.randrange(10)}", f"e{j}", f"10.1000/{rng.randrange(10)}" if rng.random() < 0.5 else None)
            for j in range(15)]
    base = link_records(effs, recs).match_set()
    rng.shuffle(recs)
    rng.shuffle(effs)
    assert link_records(effs, recs).match_set() == base
