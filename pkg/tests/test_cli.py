import json
import shutil

import httpx
import pytest

from helpers import DATA
from maenrich.cli import SUBCOMMANDS, run

THREE_ROWS = "study,yi,vi,intervention,outcome\nS1,0.1,0.04,I1,O1\nS1,0.3,0.04,I1,O1\nS2,0.5,0.04,I1,O2\n"
MAPPING = '[columns]\nstudy_id = "study"\nyi = "yi"\nvi = "vi"\nmoderators = ["intervention", "outcome"]\n'

FIXTURE_FLAGS = ["--data", str(DATA / "effects.csv"), "--config", str(DATA / "mapping.toml"),
                 "--bib", str(DATA / "refs.bib"), "--tree", str(DATA / "tree.nwk"),
                 "--cache", str(DATA / "altcache"), "--aliases", str(DATA / "aliases.toml")]


@pytest.fixture
def no_network(monkeypatch):
    def boom(*a, **k):
        raise AssertionError("network client constructed")

    monkeypatch.setattr(httpx.Client, "__init__", boom)


def test_map_on_three_rows(tmp_path, capsys):
    (tmp_path / "d.csv").write_text(THREE_ROWS)
    (tmp_path / "m.toml").write_text(MAPPING)
    out = tmp_path / "out"
    code = run(["map", "--data", str(tmp_path / "d.csv"), "--config", str(tmp_path / "m.toml"),
                "--x", "intervention", "--y", "outcome", "--out", str(out)])
    assert code == 0
    cells = json.loads((out / "cells.json").read_text())["cells"]
    assert [(c["x"], c["y"], c["n_studies"], c["n_effects"]) for c in cells] == [("I1", "O1", 1, 2), ("I1", "O2", 1, 1)]
    assert (out / "gap_map.svg").read_text().startswith("<svg")
    printed = capsys.readouterr().out.strip().splitlines()
    assert len(printed) == 2 and all(line.startswith("wrote ") for line in printed)


def test_unknown_subcommand_is_usage_error(capsys):
    assert run(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err
    assert run([]) == 1
    assert run(["map", "--rho", "lots"]) == 1


def test_every_subcommand_has_help(capsys):
    for name in SUBCOMMANDS:
        assert run([name, "--help"]) == 0
    assert "--allow-missing" in capsys.readouterr().out


def test_alt_fetch_cache_only_empty_cache(tmp_path, capsys, no_network):
    (tmp_path / "cache").mkdir()
    (tmp_path / "dois.txt").write_text("10.1111/ele.12001\n10.1002/ecy.2101\n")
    code = run(["alt-fetch", "--cache-only", "--cache", str(tmp_path / "cache"),
                "--dois", str(tmp_path / "dois.txt"), "--out", str(tmp_path / "out")])
    assert code == 4
    err = capsys.readouterr().err
    assert err.count("CacheMiss") == 2 and "10.1111/ele.12001" in err


def test_input_errors_exit_two(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("study,yi,vi,intervention,outcome\nS1,0.1,0,I1,O1\n")
    (tmp_path / "m.toml").write_text(MAPPING)
    code = run(["pool", "--data", str(tmp_path / "d.csv"), "--config", str(tmp_path / "m.toml"),
                "--out", str(tmp_path / "out")])
    assert code == 2
    assert "row 2" in capsys.readouterr().err
    assert run(["pool", "--data", str(tmp_path / "nope.csv"), "--config", str(tmp_path / "m.toml")]) == 2
    assert run(["pool", "--config", str(tmp_path / "m.toml"), "--rho", "1.5",
                "--data", str(tmp_path / "d.csv")]) == 2


def test_numerical_error_exits_three(tmp_path):
    (tmp_path / "d.csv").write_text("study,yi,vi,intervention,outcome\nS1,0.1,0.04,a,b\n")
    (tmp_path / "m.toml").write_text(MAPPING)
    code = run(["loco", "--data", str(tmp_path / "d.csv"), "--config", str(tmp_path / "m.toml"),
                "--out", str(tmp_path / "out")])
    assert code == 3


def test_config_run_table_and_flag_override(tmp_path):
    out = tmp_path / "out"
    assert run(["map", *FIXTURE_FLAGS, "--out", str(out)]) == 0
    doc = json.loads((out / "cells.json").read_text())
    assert (doc["x_column"], doc["y_column"], doc["shape_column"]) == ("intervention", "outcome", "population")
    assert doc["levels"]["y"][:3] == ["growth", "survival", "reproduction"]
    assert run(["map", *FIXTURE_FLAGS, "--y", "class", "--out", str(out)]) == 0
    assert json.loads((out / "cells.json").read_text())["y_column"] == "class"


def test_offline_subcommands_never_touch_network(tmp_path, no_network):
    out = str(tmp_path / "out")
    for cmd in ["map", "sankey", "phylo", "biblio-authors", "biblio-countries", "pool", "loco", "cumulative"]:
        assert run([cmd, *FIXTURE_FLAGS, "--out", out]) == 0, cmd
    assert run(["alt-plot", "--allow-missing", *FIXTURE_FLAGS, "--out", out]) == 0
    assert run(["report", *FIXTURE_FLAGS, "--out", out]) == 0


def test_alt_plot_without_allow_missing_fails_on_untracked(tmp_path):
    assert run(["alt-plot", *FIXTURE_FLAGS, "--out", str(tmp_path)]) == 2


def test_report_single_equals_assembled(tmp_path):
    one, many = tmp_path / "one", tmp_path / "many"
    assert run(["report", *FIXTURE_FLAGS, "--out", str(one)]) == 0
    for cmd in ["map", "sankey", "biblio-authors", "biblio-countries", "phylo", "pool", "cumulative", "loco"]:
        assert run([cmd, *FIXTURE_FLAGS, "--out", str(many)]) == 0, cmd
    assert run(["alt-plot", "--allow-missing", *FIXTURE_FLAGS, "--out", str(many)]) == 0
    assert run(["report", "--assemble", *FIXTURE_FLAGS, "--out", str(many)]) == 0
    assert (one / "report.html").read_bytes() == (many / "report.html").read_bytes()
    for name in ["gap_map.svg", "network.svg", "chord.svg", "tree.svg", "orchard.svg", "pool.json"]:
        assert (one / name).read_bytes() == (many / name).read_bytes(), name


def test_live_fetch_through_recorded_cache_copy(tmp_path, no_network):
    shutil.copytree(DATA / "altcache", tmp_path / "cache")
    code = run(["alt-fetch", "--cache-only", *FIXTURE_FLAGS, "--cache", str(tmp_path / "cache"),
                "--out", str(tmp_path / "out")])
    doc = json.loads((tmp_path / "out" / "altmetrics.json").read_text())
    assert code == 0 and doc["network_calls"] == 0
    assert {r["status"] for r in doc["records"]} == {"Tracked", "NotTracked"}
