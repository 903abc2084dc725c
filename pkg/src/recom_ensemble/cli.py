"""Command-line entry point.

Every subcommand reads its settings from an optional JSON manifest; command
line flags override manifest values. Exit codes: 0 ok, 1 usage, 2 data
error, 3 infeasible (disconnected graph or retry exhaustion).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import (
    METRICS,
    PERCENTILE_CONVENTION,
    QUARTILE_CONVENTION,
    CoMembership,
    percentile_of,
    ranked_share_boxstats,
    ranked_shares,
    split_distribution,
    split_outcome,
)
from .graph import (
    GraphDataError,
    apply_cleaning,
    load_cleaning_script,
    load_graph,
    save_graph,
    validate_graph,
    zero_fill,
)
from .io import EnsembleWriter, read_ensemble, read_plan_csv, write_csv, write_plan_csv
from .metrics import (
    EFFICIENCY_GAP_CONVENTION,
    MEAN_MEDIAN_CONVENTION,
    PARTISAN_BIAS_CONVENTION,
    district_tally,
    reallocate_independents,
    seat_outcome,
    seats_votes_curve,
    weighted_share_histogram,
)
from .partition import LegalityConfig, county_splits, is_contiguous, population_deviation
from .recom import RNG_ALGORITHM, ChainConfig, InfeasibleError, make_rng, run_chain, seed_plan

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3

DEFAULTS = {
    "districts": 2,
    "steps": 1000,
    "epsilon": 0.02,
    "seed": 0,
    "thinning": 1,
    "max_tree_retries": 100,
    "max_pair_retries": 100,
    "metrics": ["efficiency_gap", "mean_median", "partisan_bias"],
    "bins": 20,
    "out_dir": ".",
}
PATH_KEYS = ("graph", "clean_script", "initial_plan", "enacted", "ensemble", "out_dir")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="JSON manifest; flags override its values")
    common.add_argument("--graph", help="graph JSON file")
    common.add_argument("--seed", type=int)
    common.add_argument("--epsilon", type=float, help="fractional population tolerance")
    common.add_argument("--steps", type=int)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--contest", dest="contests", action="append", help="repeatable")
    common.add_argument("--anchor", help="node id for the co-membership heat map")
    common.add_argument("--enacted", help="enacted plan CSV")
    common.add_argument("--districts", "-k", type=int, help="number of districts")

    parser = _Parser(prog="recom-ensemble", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("validate", parents=[common], help="check graph integrity and connectivity")

    p = sub.add_parser("clean", parents=[common], help="apply a cleaning script")
    p.add_argument("--clean-script", dest="clean_script")
    p.add_argument("--output", help="cleaned graph path (default OUT_DIR/graph_clean.json)")

    sub.add_parser("seed-plan", parents=[common], help="draw a legal starting plan")

    p = sub.add_parser("run-chain", parents=[common], help="generate a ReCom ensemble")
    p.add_argument("--initial-plan", dest="initial_plan")
    p.add_argument("--thinning", type=int)
    p.add_argument("--max-tree-retries", dest="max_tree_retries", type=int)
    p.add_argument("--max-pair-retries", dest="max_pair_retries", type=int)

    for name, text in (("score", "score every plan"), ("report", "ensemble summaries")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--ensemble", help="ensemble JSONL (default OUT_DIR/ensemble.jsonl)")
        p.add_argument("--metrics", type=lambda s: s.split(","), help="comma separated")
        p.add_argument("--filter", choices=["split-outcome"])
        p.add_argument("--reallocate-I", dest="reallocate_I", choices=["D", "R"])
        p.add_argument("--bins", type=int)
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge defaults, manifest and flags, in increasing priority."""
    manifest: dict = {}
    raw = None
    if args.manifest:
        path = Path(args.manifest)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise GraphDataError(f"cannot read manifest {path}: {exc}") from None
        manifest = dict(raw)
        base = path.parent
        for key in PATH_KEYS:
            if manifest.get(key):
                manifest[key] = str(base / manifest[key])
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "manifest")}
    settings = {**DEFAULTS, **manifest, **flags}
    # Output locations do not change results, so they stay out of the hash.
    hashed = {
        "manifest": raw,
        "flags": {k: v for k, v in flags.items() if k not in ("out_dir", "output")},
    }
    blob = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    settings["manifest_sha256"] = hashlib.sha256(blob.encode()).hexdigest()
    return settings


def _require(settings: dict, key: str):
    if not settings.get(key):
        raise UsageError(f"missing required setting {key!r} (flag or manifest)")
    return settings[key]


def _out_dir(settings: dict) -> Path:
    out = Path(settings["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _header(settings: dict, command: str) -> list[str]:
    return [
        f"recom-ensemble {__version__} {command}",
        f"manifest_sha256={settings['manifest_sha256']}",
        f"seed={settings['seed']} epsilon={settings['epsilon']} steps={settings['steps']} "
        f"rng={RNG_ALGORITHM}",
    ]


def _load_graph(settings: dict):
    g = load_graph(_require(settings, "graph"))
    return g


def _contests(settings: dict, g) -> list[str]:
    contests = settings.get("contests") or g.contests()
    for c in contests:
        if c not in g.contests():
            raise UsageError(f"unknown contest {c!r}; graph has {g.contests()}")
    return list(contests)


def _tallies(settings: dict, g, contest: str):
    t = zero_fill(g.tallies(contest), g)
    if settings.get("reallocate_I"):
        t = reallocate_independents(t, settings["reallocate_I"])
    return t


def _metrics(settings: dict) -> list[str]:
    metrics = settings["metrics"]
    for m in metrics:
        if m not in METRICS:
            raise UsageError(f"unknown metric {m!r}; choose from {sorted(METRICS)}")
    return list(metrics)


def _ensemble(settings: dict, g):
    """Return a callable that streams the ensemble's plans afresh on each call."""
    path = settings.get("ensemble") or Path(settings["out_dir"]) / "ensemble.jsonl"
    if not Path(path).exists():
        raise GraphDataError(f"ensemble file {path} not found")
    return lambda: (a for _, a in read_ensemble(path, g))


def _safe_metric(name: str, dt) -> float:
    try:
        return METRICS[name](dt)
    except ValueError:
        return float("nan")


def cmd_validate(settings: dict) -> int:
    g = _load_graph(settings)
    report = validate_graph(g)
    print(json.dumps(report.to_dict(), indent=2))
    if not report.connected:
        print(f"graph is disconnected ({len(report.components)} components)", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_clean(settings: dict) -> int:
    g = _load_graph(settings)
    g = apply_cleaning(g, load_cleaning_script(_require(settings, "clean_script")))
    out = settings.get("output") or _out_dir(settings) / "graph_clean.json"
    save_graph(g, out)
    print(f"wrote {out} ({len(g)} nodes, {len(g.edges)} edges)", file=sys.stderr)
    return EXIT_OK


def cmd_seed_plan(settings: dict) -> int:
    g = _load_graph(settings)
    rng = make_rng(settings["seed"])
    a = seed_plan(g, settings["districts"], settings["epsilon"], rng)
    out = _out_dir(settings) / "seed_plan.csv"
    write_plan_csv(out, a, _header(settings, "seed-plan"))
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def cmd_run_chain(settings: dict) -> int:
    g = _load_graph(settings)
    cfg = ChainConfig(
        steps=settings["steps"],
        epsilon=settings["epsilon"],
        seed=settings["seed"],
        max_tree_retries=settings["max_tree_retries"],
        max_pair_retries=settings["max_pair_retries"],
        thinning=settings["thinning"],
    )
    rng = make_rng(cfg.seed)
    if settings.get("initial_plan"):
        a0 = read_plan_csv(settings["initial_plan"], g)
    else:
        a0 = seed_plan(g, settings["districts"], cfg.epsilon, rng)
    out = _out_dir(settings)
    with EnsembleWriter(out / "ensemble.jsonl") as sink:
        summary = run_chain(g, a0, cfg, sink, rng=rng)
    summary.extra.update(
        {"epsilon": cfg.epsilon, "thinning": cfg.thinning, "manifest_sha256": settings["manifest_sha256"]}
    )
    text = json.dumps(summary.to_dict(), indent=2, sort_keys=True)
    (out / "run_summary.json").write_text(text + "\n", encoding="utf-8")
    print(text, file=sys.stderr)
    return EXIT_OK


def cmd_score(settings: dict) -> int:
    g = _load_graph(settings)
    contests = _contests(settings, g)
    metrics = _metrics(settings)
    ensemble = _ensemble(settings, g)
    rows = []
    for contest in contests:
        t = _tallies(settings, g, contest)
        for i, a in enumerate(ensemble()):
            dt = district_tally(g, a, t)
            if settings.get("filter") == "split-outcome" and not split_outcome(seat_outcome(dt)):
                continue
            for m in metrics:
                rows.append((i, m, contest, _safe_metric(m, dt)))
    rows.sort(key=lambda r: (r[0], metrics.index(r[1]), contests.index(r[2])))
    header = _header(settings, "score") + [
        f"filter={settings.get('filter') or 'none'} reallocate_I={settings.get('reallocate_I') or 'none'}",
        f"efficiency_gap: {EFFICIENCY_GAP_CONVENTION}",
        f"mean_median: {MEAN_MEDIAN_CONVENTION}",
        f"partisan_bias: {PARTISAN_BIAS_CONVENTION}",
    ]
    out = _out_dir(settings) / "scores.csv"
    write_csv(out, ["plan_index", "metric", "contest", "value"], rows, header)
    print(f"wrote {out} ({len(rows)} rows)", file=sys.stderr)
    return EXIT_OK


def cmd_report(settings: dict) -> int:
    g = _load_graph(settings)
    contests = _contests(settings, g)
    metrics = _metrics(settings)
    ensemble = _ensemble(settings, g)
    n_plans = sum(1 for _ in ensemble())
    if not n_plans:
        raise GraphDataError("ensemble is empty")
    out = _out_dir(settings)
    header = _header(settings, "report")
    bins = settings["bins"]
    enacted = read_plan_csv(settings["enacted"], g) if settings.get("enacted") else None
    summary: dict = {
        "manifest_sha256": settings["manifest_sha256"],
        "seed": settings["seed"],
        "plans": n_plans,
        "percentile_convention": PERCENTILE_CONVENTION,
        "quartile_convention": QUARTILE_CONVENTION,
    }

    if settings.get("anchor"):
        acc = CoMembership(g, settings["anchor"])
        for a in ensemble():
            acc.add(a)
        freq = acc.result().freq
        write_csv(
            out / "heatmap.csv",
            ["node_id", "frequency"],
            freq.items(),
            header + [f"anchor={settings['anchor']}"],
        )

    if all(n.county is not None for n in g.nodes):
        dist = split_distribution(ensemble(), g)
        rows = [("split_counties", v, c) for v, c in sorted(dist.split_counties.items())]
        rows += [("total_splits", v, c) for v, c in sorted(dist.total_splits.items())]
        write_csv(out / "splits.csv", ["measure", "value", "count"], rows, header)
    else:
        print("skipping county splits: some nodes have no county tag", file=sys.stderr)

    if enacted is not None:
        dev = population_deviation(g, enacted)
        contiguous = all(is_contiguous(g, enacted).values())
        legal = contiguous and dev <= LegalityConfig(settings["epsilon"]).epsilon
        if not legal:
            print(
                f"warning: enacted plan is not legal at epsilon={settings['epsilon']} "
                f"(deviation {dev:.6g}, contiguous={contiguous})",
                file=sys.stderr,
            )
        summary["enacted"] = {"population_deviation": dev, "contiguous": contiguous, "legal": legal}
        if all(n.county is not None for n in g.nodes):
            rep = county_splits(g, enacted)
            summary["enacted"]["county_splits"] = {
                "split_counties": rep.split_counties,
                "total_splits": rep.total_splits,
            }

    percentiles: dict = {}
    for contest in contests:
        t = _tallies(settings, g, contest)
        tallies = [district_tally(g, a, t) for a in ensemble()]
        boxes = ranked_share_boxstats(ensemble(), g, t)
        write_csv(
            out / f"boxstats_{contest}.csv",
            ["rank", "min", "q1", "median", "q3", "max"],
            [(b.rank, b.min, b.q1, b.median, b.q3, b.max) for b in boxes],
            header + [f"contest={contest}", QUARTILE_CONVENTION],
        )
        outcomes: dict = {}
        for dt in tallies:
            label = seat_outcome(dt).label()
            outcomes[label] = outcomes.get(label, 0) + 1
        write_csv(
            out / f"outcomes_{contest}.csv",
            ["outcome", "count"],
            sorted(outcomes.items()),
            header + [f"contest={contest}"],
        )
        hist = weighted_share_histogram(g, t, bins)
        rows = [(hist.edges[i], hist.edges[i + 1], w) for i, w in enumerate(hist.weights)]
        write_csv(
            out / f"share_histogram_{contest}.csv",
            ["bin_left", "bin_right", "population"],
            rows,
            header + [f"contest={contest}", f"no_vote_population={hist.no_vote}"],
        )
        if settings.get("filter") == "split-outcome":
            scored = [dt for dt in tallies if split_outcome(seat_outcome(dt))]
        else:
            scored = tallies
        for m in metrics:
            values = [_safe_metric(m, dt) for dt in scored]
            finite = [v for v in values if v == v]
            if finite:
                counts, edges = np.histogram(finite, bins=bins)
                write_csv(
                    out / f"histogram_{m}_{contest}.csv",
                    ["bin_left", "bin_right", "count"],
                    [(float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)],
                    header + [f"contest={contest} metric={m}"],
                )
            if enacted is not None and finite:
                value = _safe_metric(m, district_tally(g, enacted, t))
                percentiles.setdefault(contest, {})[m] = {
                    "value": value,
                    "percentile": percentile_of(finite, value),
                }
        if enacted is not None:
            enacted_tally = district_tally(g, enacted, t)
            summary.setdefault("enacted_ranked_shares", {})[contest] = ranked_shares(enacted_tally)
            try:
                curve = seats_votes_curve(enacted_tally, resolution=101)
            except ValueError:
                curve = None
            if curve is not None:
                write_csv(
                    out / f"seats_votes_{contest}.csv",
                    ["vote_share", "seat_share"],
                    curve.points,
                    header
                    + [
                        f"contest={contest} plan=enacted grid=101 evenly spaced shares in [0, 1]",
                        "breakpoints=" + " ".join(repr(b) for b in curve.breakpoints),
                    ],
                )
    if enacted is not None:
        summary["percentiles"] = percentiles
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote report files to {out}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "clean": cmd_clean,
    "seed-plan": cmd_seed_plan,
    "run-chain": cmd_run_chain,
    "score": cmd_score,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = resolve_settings(args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return COMMANDS[args.command](settings)
    except UsageError as exc:
        print(f"recom-ensemble: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"recom-ensemble: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (GraphDataError, OSError, ValueError) as exc:
        print(f"recom-ensemble: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
