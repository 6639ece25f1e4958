"""``maenrich`` command line.

Exit codes: 0 success, 1 usage, 2 input or parse error, 3 numerical
failure, 4 network failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path
from typing import Sequence

from maenrich import __version__
from maenrich.altclient import CACHE_ONLY, LIVE
from maenrich.errors import InputError, MaenrichError
from maenrich.meta import MissingYear, SingleCluster
from maenrich.pipeline import (
    FIGURE_FILES,
    Inputs,
    Outputs,
    RunConfig,
    alt_fetch,
    alt_plot,
    assemble_report,
    authors_step,
    countries_step,
    cumulative_step,
    loco_step,
    map_step,
    phylo_step,
    pool_step,
    report_steps,
    sankey_step,
)
from maenrich.serialize import atomic_write, dumps

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_USAGE = 0, 1

SUBCOMMANDS = {
    "map": "evidence gap map (cells.json, gap_map.svg)",
    "sankey": "moderator flows (sankey.json, sankey.svg)",
    "phylo": "species effects on the tree (phylo.json, tree.svg)",
    "biblio-authors": "co-authorship network (authors_graph.json, network.svg)",
    "biblio-countries": "country coupling and tabulations (countries_graph.json, chord.svg, tabulations.json)",
    "alt-fetch": "retrieve altmetric records into the cache (altmetrics.json)",
    "alt-plot": "orchard plot with altmetric bubbles from the cache (orchard.svg)",
    "pool": "pooled estimates (pool.json)",
    "loco": "leave-one-cluster-out sensitivity (loco.json)",
    "cumulative": "cumulative pooling by year (cumulative.json)",
    "report": "run every configured step and write report.html",
}

PATH_KEYS = ("data", "config", "bib", "tree", "cache", "aliases", "dois", "out")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _common_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    io = p.add_argument_group("inputs and outputs")
    io.add_argument("--data", type=Path, help="effects table (CSV)")
    io.add_argument("--config", type=Path, help="TOML with a [columns] mapping and optional [run] defaults")
    io.add_argument("--bib", type=Path, help="bibliography (BibTeX or RIS)")
    io.add_argument("--tree", type=Path, help="Newick tree")
    io.add_argument("--cache", type=Path, help="altmetric cache directory")
    io.add_argument("--aliases", type=Path, help="TOML file with an [aliases] table mapping author names to canonical keys")
    io.add_argument("--dois", type=Path, help="file with one DOI per line (alt-fetch)")
    io.add_argument("--out", type=Path, help="output directory (default: out)")
    a = p.add_argument_group("analysis")
    a.add_argument("--x", help="moderator on the gap-map x axis")
    a.add_argument("--y", help="moderator on the gap-map y axis")
    a.add_argument("--shape", help="moderator mapped to glyph shape")
    a.add_argument("--columns", help="comma-separated moderator order for the Sankey diagram")
    a.add_argument("--group", help="moderator used for tree colours, orchard panels and subgroup pooling")
    a.add_argument("--rho", type=float, help="assumed within-study correlation (default 0.5)")
    a.add_argument("--tau2", choices=("DL", "REML"), help="heterogeneity estimator (default REML)")
    a.add_argument("--cluster-by", dest="cluster_by",
                   help="study | author-cluster | moderator:<column> (default study)")
    a.add_argument("--counting", choices=("full", "fractional"), help="country coupling counting")
    a.add_argument("--refs-field", dest="refs_field", help="BibTeX field holding cited references")
    a.add_argument("--seed", type=int, help="seed for layout and jitter (default 42)")
    a.add_argument("--threshold", type=float, help="altmetric score above which bubbles are grey (default 400)")
    mode = a.add_mutually_exclusive_group()
    mode.add_argument("--live", dest="alt_mode", action="store_const", const=LIVE,
                      help="query the altmetric service")
    mode.add_argument("--cache-only", dest="alt_mode", action="store_const", const=CACHE_ONLY,
                      help="read only from the cache (default)")
    a.add_argument("--rate", type=float, help="max altmetric requests per second (default 1)")
    f = p.add_argument_group("figures")
    f.add_argument("--size-by", dest="size_by", choices=("studies", "effects"), help="gap-map bubble size")
    f.add_argument("--width", type=float, help="figure width in px")
    f.add_argument("--height", type=float, help="figure height in px")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="maenrich", description="Enrich a meta-analytic dataset with evidence maps, "
                     "bibliometric networks and altmetrics.")
    parser.add_argument("--version", action="version", version=f"maenrich {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    common = _common_options()
    for name, help_text in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=help_text, parents=[common], description=help_text)
        if name == "alt-plot":
            sp.add_argument("--allow-missing", action="store_true",
                            help="draw effects without a cached score as hollow rings")
        if name == "report":
            sp.add_argument("--assemble", action="store_true",
                            help="build from outputs already present in --out instead of recomputing")
    return parser


def _config_defaults(config_path: Path | None) -> dict:
    """The ``[run]`` table of the config; relative paths resolve against its folder."""
    if config_path is None or not config_path.is_file():
        return {}
    try:
        doc = tomllib.loads(config_path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{config_path}: invalid TOML: {exc}") from None
    run = dict(doc.get("run", {}))
    known = {f.name for f in fields(RunConfig)} | {"columns"}
    unknown = set(run) - known
    if unknown:
        raise InputError(f"{config_path}: unknown keys in [run]: {sorted(unknown)}")
    for key in PATH_KEYS:
        if key in run:
            p = Path(run[key])
            run[key] = p if p.is_absolute() else config_path.parent / p
    if "columns" in run:
        run["sankey_columns"] = list(run.pop("columns"))
    return run


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Flags override the config's ``[run]`` table, which overrides defaults."""
    merged = _config_defaults(args.config)
    for f in fields(RunConfig):
        if f.name == "sankey_columns":
            if args.columns:
                merged["sankey_columns"] = [c.strip() for c in args.columns.split(",") if c.strip()]
            continue
        value = getattr(args, f.name, None)
        if value is not None:
            merged[f.name] = value
    cfg = RunConfig(**merged)
    for key in PATH_KEYS:
        v = getattr(cfg, key)
        if v is not None:
            setattr(cfg, key, Path(v))
    cfg.validate()
    return cfg


def _write(cfg: RunConfig, out: Outputs) -> None:
    for name, text in out.files.items():
        atomic_write(cfg.out / name, text)
    for line in out.summaries:
        print(f"wrote {cfg.out / line}")
    for line in out.errors:
        print(line, file=sys.stderr)


def _report(inp: Inputs, args: argparse.Namespace) -> Outputs:
    cfg = inp.cfg
    if args.assemble:
        files = {}
        for name in list(FIGURE_FILES.values()) + ["pool.json", "cumulative.json", "loco.json", "tabulations.json"]:
            p = cfg.out / name
            if p.is_file():
                files[name] = p.read_text(encoding="utf-8")
        out = Outputs()
        out.add("report.html", assemble_report(inp, files), f"assembled from {len(files)} prior outputs")
        return out
    out = Outputs()
    for name, step in report_steps(inp):
        try:
            out.merge(step())
        except (MissingYear, SingleCluster) as exc:
            out.errors.append(f"{name} skipped: {exc}")
    if cfg.bib is not None and cfg.data is not None:
        linked = inp.linked
        out.add("corpus.json", dumps(linked.to_dict()),
                f"{len(linked.links)} effects linked, {len(linked.unmatched_effects)} unmatched")
    n_fig = sum(1 for fn in FIGURE_FILES.values() if fn in out.files)
    out.add("report.html", assemble_report(inp, out.files), f"{n_fig} figures")
    return out


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.command is None:
        print(parser.format_help(), file=sys.stderr)
        return EXIT_USAGE

    try:
        cfg = resolve_config(args)
        inp = Inputs(cfg)
        cmd = args.command
        if cmd == "report":
            out = _report(inp, args)
        elif cmd == "alt-plot":
            out = alt_plot(inp, allow_missing=args.allow_missing)
        else:
            step = {
                "map": map_step,
                "sankey": sankey_step,
                "phylo": phylo_step,
                "biblio-authors": authors_step,
                "biblio-countries": countries_step,
                "alt-fetch": alt_fetch,
                "pool": pool_step,
                "loco": loco_step,
                "cumulative": cumulative_step,
            }[cmd]
            out = step(inp)
        _write(cfg, out)
        return out.exit_code
    except MaenrichError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InputError.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
