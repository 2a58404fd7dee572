#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MentionNet Command Line Interface

Builds and analyzes @-mention networks from tweet corpora: corpus statistics,
graph construction, degree analysis, communities, tagging rings, synthetic
corpora with planted truth, and the full reproducible pipeline run.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

import argparse
import json
import logging
import multiprocessing
import sys
from pathlib import Path

# Ensure package is importable when run as script
if __name__ == "__main__" and __package__ is None:
    sys.path.insert(0, str(Path(__file__).resolve().parent))

from src.config import (  # noqa: E402
    APP_NAME,
    APP_VERSION,
    ConfigError,
    CorpusError,
    MentionNetError,
    StageError,
    load_config_file,
)
from src.communities import (  # noqa: E402
    community_summary,
    detect_tag_rings,
    find_communities,
    rings_to_json,
    write_communities_csv,
)
from src.corpus import FORMATS, corpus_stats  # noqa: E402
from src.exporter import dumps_json, write_json  # noqa: E402
from src.graphstats import (  # noqa: E402
    KINDS,
    TAIL_METHODS,
    degree_sequence,
    render_communities,
    render_degree_plot,
    render_matrix,
    tail_exponent,
    write_ccdf_csv,
    write_degree_csv,
)
from src.ingest_worker import ingest_files_parallel  # noqa: E402
from src.mention_miner import write_users_csv  # noqa: E402
from src.netbuild import (  # noqa: E402
    N2_RANKS,
    ORDERINGS,
    build_graph,
    filter_edges,
    read_edges_csv,
    to_adjacency,
    write_adjacency_csv,
    write_edges_csv,
)
from src.pipeline import COMMUNITY_GRAPHS, RunConfig, read_manifest, run_batch, run_pipeline  # noqa: E402
from src.synthgen import CommunitySpec, PlantedSpec, RingSpec, generate  # noqa: E402

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

# argparse dest -> RunConfig field
_RUN_FLAGS = {
    "input": "inputs",
    "format": "fmt",
    "date_from": "date_from",
    "date_to": "date_to",
    "n1": "n1",
    "n2": "n2",
    "n2_rank": "n2_rank",
    "include_self_loops": "include_self_loops",
    "strip_rt": "strip_rt",
    "min_weight": "min_weight",
    "seed": "seed",
    "resolution": "resolution",
    "communities_on": "communities_on",
    "ring_size": "ring_size",
    "ring_jaccard": "ring_jaccard",
    "ring_min_weight": "ring_min_weight",
    "ring_min_sources": "ring_min_sources",
    "ring_min_density": "ring_min_density",
    "degree_kind": "degree_kind",
    "tail_method": "tail_method",
    "ordering": "matrix_ordering",
    "out": "out",
    "label": "label",
    "threads": "threads",
}


class CLIParser(argparse.ArgumentParser):
    """Usage errors exit with code 1 instead of argparse's 2 (2 is reserved for data errors)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def setup_logging(verbose: bool = False, log_file=None) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(level)
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root.addHandler(stream)
    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
        root.addHandler(file_handler)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """INI [Run] values first, then any flag given on the command line."""
    base = RunConfig()
    if getattr(args, "config", None):
        base = RunConfig.from_dict(load_config_file(args.config))
    overrides = {field: getattr(args, dest, None) for dest, field in _RUN_FLAGS.items()}
    if getattr(args, "unweighted", False):
        overrides["weighted"] = False
    if getattr(args, "xlsx", False):
        overrides["xlsx"] = True
    cfg = base.merged(overrides)
    cfg.validate()
    return cfg


def _load_corpus(cfg: RunConfig):
    if not cfg.inputs:
        raise ConfigError("no input files given (--input)")
    for path in cfg.inputs:
        if not Path(path).is_file():
            raise CorpusError(f"input file not found: {path}")
    return ingest_files_parallel([Path(p) for p in cfg.inputs], fmt=cfg.fmt, date_range=cfg.date_range(),
                                 threads=cfg.threads, strip_rt=cfg.strip_rt)


def _load_graph(args: argparse.Namespace, cfg: RunConfig):
    """(complete graph, filtered graph or None) from --edges or the corpus inputs."""
    if getattr(args, "edges", None):
        graph = read_edges_csv(args.edges, weighted=cfg.weighted)
    else:
        _, mined = _load_corpus(cfg)
        graph = build_graph(mined, cfg.build_config())
    filtered = None
    if getattr(args, "min_weight", None) is not None and graph.weighted:
        filtered = filter_edges(graph, cfg.min_weight)
    return graph, filtered


def cmd_ingest_stats(args: argparse.Namespace) -> int:
    """Print (and optionally save) corpus statistics and the ingest report."""
    cfg = build_run_config(args)
    corpus, _ = _load_corpus(cfg)
    payload = {"stats": corpus_stats(corpus, cfg.label).to_dict(), "ingest": corpus.report.to_dict()}
    if args.out:
        path = write_json(Path(args.out) / "stats.json", payload)
        print(f"Stats: {path}")
    else:
        sys.stdout.write(dumps_json(payload))
    return EXIT_OK


def cmd_build(args: argparse.Namespace) -> int:
    """Build the mention graph and write users.csv, edges.csv and edges_filtered.csv."""
    cfg = build_run_config(args)
    out = Path(cfg.out)
    _, mined = _load_corpus(cfg)
    write_users_csv(mined.table, out / "users.csv")
    graph = build_graph(mined, cfg.build_config())
    write_edges_csv(graph, out / "edges.csv")
    print(f"Graph: {graph.number_of_nodes()} node(s), {graph.number_of_edges()} edge(s) -> {out / 'edges.csv'}")
    if args.min_weight is not None:
        filtered = filter_edges(graph, cfg.min_weight)
        write_edges_csv(filtered, out / "edges_filtered.csv")
        print(f"Filtered (weight > {cfg.min_weight}): {filtered.number_of_edges()} edge(s)")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    """Degree distribution, CCDF, tail exponent and the adjacency heatmap."""
    cfg = build_run_config(args)
    out = Path(cfg.out)
    graph, filtered = _load_graph(args, cfg)
    dist = degree_sequence(graph, cfg.degree_kind, weighted=args.strength and graph.weighted)
    write_degree_csv(dist, out / "degree.csv")
    write_ccdf_csv(dist, out / "ccdf.csv")
    tail = tail_exponent(dist, xmin=args.xmin, method=cfg.tail_method)
    write_json(out / "tail.json", {"distribution": dist.label, **tail.to_dict()})
    render_degree_plot(dist, log_log=True, out=out / "degree.svg", tail=tail, title=f"{cfg.label} {dist.label}".strip())
    reliability = "" if tail.reliable else " (unreliable)"
    print(f"Tail exponent {tail.exponent:.3f}{reliability}, xmin {tail.xmin}, {tail.n_tail} point(s)")

    matrix_graph = filtered if filtered is not None else graph
    if matrix_graph.number_of_nodes() == 0:
        logging.warning("Matrix skipped: the filtered graph is empty")
        return EXIT_OK
    ordering = "by_out_strength" if cfg.matrix_ordering == "by_community" else cfg.matrix_ordering
    adj = to_adjacency(matrix_graph, ordering=ordering)
    write_adjacency_csv(adj, out / "adjacency.csv")
    render_matrix(adj, log_scale=not args.linear, out=out / "matrix.svg", title=cfg.label or None)
    print(f"Matrix: {adj.size}x{adj.size} -> {out / 'matrix.svg'}")
    return EXIT_OK


def cmd_communities(args: argparse.Namespace) -> int:
    """Louvain communities and per-community summary."""
    cfg = build_run_config(args)
    out = Path(cfg.out)
    graph, filtered = _load_graph(args, cfg)
    target = filtered if cfg.communities_on == "filtered" and filtered is not None else graph
    assignment = find_communities(target, seed=cfg.seed, resolution=cfg.resolution)
    write_communities_csv(assignment, target, out / "communities.csv")
    summary = community_summary(assignment, target)
    summary["graph"] = "filtered" if target is filtered else "complete"
    write_json(out / "community_summary.json", summary)
    render_communities(target, assignment, out=out / "communities.svg", seed=cfg.seed,
                       title=f"{cfg.label} communities".strip())
    print(f"{assignment.n_communities} communities, modularity {assignment.modularity:.4f}")
    return EXIT_OK


def cmd_rings(args: argparse.Namespace) -> int:
    """Tagging-ring detection on the complete weighted graph."""
    cfg = build_run_config(args)
    out = Path(cfg.out)
    graph, _ = _load_graph(args, cfg)
    thresholds = {
        "min_ring_size": cfg.ring_size,
        "min_weight": cfg.ring_min_weight,
        "min_jaccard": cfg.ring_jaccard,
        "min_sources": cfg.ring_min_sources,
        "min_density": cfg.ring_min_density,
    }
    rings = detect_tag_rings(graph, **thresholds)
    write_json(out / "rings.json", rings_to_json(rings, graph, thresholds))
    print(f"{len(rings)} tagging ring(s)")
    for r in rings:
        print(f"  {len(r.targets)} target(s), {len(r.sources)} source(s), density {r.density:.2f}, "
              f"weight {r.total_weight}: {' '.join(graph.handle(u) for u in r.targets)}")
    return EXIT_OK


def _parse_pair(value: str, kinds):
    try:
        a, b = value.split(":", 1)
        return kinds[0](a), kinds[1](b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected SIZE:VALUE, got {value!r}")


def cmd_synth(args: argparse.Namespace) -> int:
    """Generate a synthetic corpus with planted ground truth."""
    if args.spec:
        spec = PlantedSpec.from_json(args.spec)
        if args.seed is not None:
            spec.seed = args.seed
    else:
        spec = PlantedSpec(
            n_users=args.users,
            n_tweets=args.tweets,
            activity_zipf_s=args.zipf_s,
            mention_rate=args.mention_rate,
            communities=[CommunitySpec(*_parse_pair(c, (int, float))) for c in args.community or []],
            rings=[RingSpec(*_parse_pair(r, (int, int))) for r in args.ring or []],
            noise_edge_prob=args.noise,
            seed=args.seed or 0,
        )
    corpus_path, truth_path = generate(spec, args.out)
    print(f"Corpus: {corpus_path}")
    print(f"Truth: {truth_path}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    """Full pipeline for one corpus, or one run per label from a manifest."""
    cfg = build_run_config(args)
    if args.manifest:
        batch = run_batch(read_manifest(args.manifest), cfg)
        for label, row in batch["runs"].items():
            if row["status"] == "ok":
                print(f"{label}: {row['tweets']} tweet(s), {row['communities']} communities, {row['rings']} ring(s)")
            else:
                print(f"{label}: FAILED at {row['stage']}: {row['cause']}", file=sys.stderr)
        return EXIT_DATA if batch["failed"] else EXIT_OK
    result = run_pipeline(cfg)
    s = result.summary
    print(f"Run complete: {len(result.artifacts)} artifact(s) in {result.out_dir}")
    print(json.dumps({
        "tweets": s["corpus"]["tweet_count"],
        "edges": s["graph"]["edges"],
        "filtered_edges": s["filtered_graph"]["edges"] if s["filtered_graph"] else None,
        "communities": s["communities"]["count"] if s["communities"] else None,
        "rings": s["rings"]["count"] if s["rings"] else None,
        "tail_exponent": s["tail"]["exponent"],
    }, sort_keys=True))
    return EXIT_OK


def exit_code_for(error: BaseException) -> int:
    """Map an exception (or a failed stage's cause) to the CLI exit code."""
    if isinstance(error, StageError):
        return exit_code_for(error.cause)
    if isinstance(error, ConfigError):
        return EXIT_USAGE
    if isinstance(error, MentionNetError):
        return EXIT_DATA
    return EXIT_INTERNAL


def _add_common(p):
    p.add_argument("--config", help="config.ini with [Settings] and [Run] sections")
    p.add_argument("--log-file", help="Also write log messages to this file")
    p.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    p.add_argument("--threads", type=int, help="Worker processes for ingestion (default: 1)")


def _add_corpus(p, required=False):
    p.add_argument("--input", "-i", nargs="+", required=required, help="Corpus file(s), concatenated in order")
    p.add_argument("--format", choices=FORMATS, help="Input format (default: jsonl)")
    p.add_argument("--from", dest="date_from", help="First day or instant to keep (UTC)")
    p.add_argument("--to", dest="date_to", help="Last day or instant to keep (UTC, a bare date is inclusive)")
    p.add_argument("--strip-rt", action="store_true", default=None, help="Ignore a leading 'RT @user:' marker")
    p.add_argument("--label", help="Corpus label (e.g. country)")


def _add_build(p):
    p.add_argument("--n1", type=int, help="Top posters used as edge sources (default: 2000)")
    p.add_argument("--n2", type=int, help="Top targets used as edge destinations (default: 200)")
    p.add_argument("--n2-rank", choices=N2_RANKS, help="Rank N2 targets by mentions (default) or posts")
    p.add_argument("--unweighted", action="store_true", help="All edge weights 1")
    p.add_argument("--include-self-loops", action="store_true", default=None, help="Keep self-mentions as edges")
    p.add_argument("--min-weight", type=int, help="Keep only edges with weight strictly above this")


def _add_graph_source(p):
    _add_corpus(p)
    _add_build(p)
    p.add_argument("--edges", help="Analyze an existing edges.csv instead of a corpus")


def _add_rings(p):
    p.add_argument("--ring-size", type=int, help="Minimum targets per ring (default: 5)")
    p.add_argument("--ring-jaccard", type=float, help="Minimum source-set Jaccard to link targets (default: 0.5)")
    p.add_argument("--ring-min-weight", type=int, help="Minimum edge weight counted as persistent (default: 5)")
    p.add_argument("--ring-min-sources", type=int, help="Minimum persistent sources per target (default: 2)")
    p.add_argument("--ring-min-density", type=float, help="Minimum source->target edge density (default: 0.5)")


def main(argv=None):
    multiprocessing.freeze_support()
    parser = CLIParser(prog="mentionnet", description=f"{APP_NAME} CLI for tweet mention network analysis.")
    parser.add_argument("--version", action="version", version=APP_VERSION)
    sub = parser.add_subparsers(dest="command", help="Command")

    # ingest-stats
    p_stats = sub.add_parser("ingest-stats", help="Corpus statistics (tweets, unique users, date span).")
    _add_common(p_stats)
    _add_corpus(p_stats, required=True)
    p_stats.add_argument("--out", "-o", help="Write stats.json here instead of printing")
    p_stats.set_defaults(func=cmd_ingest_stats)

    # build
    p_build = sub.add_parser("build", help="Build the mention graph and write edge lists.")
    _add_common(p_build)
    _add_corpus(p_build, required=True)
    _add_build(p_build)
    p_build.add_argument("--out", "-o", help="Output directory")
    p_build.set_defaults(func=cmd_build)

    # analyze
    p_analyze = sub.add_parser("analyze", help="Degree distribution, tail exponent and adjacency heatmap.")
    _add_common(p_analyze)
    _add_graph_source(p_analyze)
    p_analyze.add_argument("--degree-kind", choices=KINDS, help="in, out or total (default)")
    p_analyze.add_argument("--strength", action="store_true", help="Weighted degree (strength)")
    p_analyze.add_argument("--tail-method", choices=TAIL_METHODS, help="ls (default) or hill")
    p_analyze.add_argument("--xmin", type=int, help="Tail start (default: 10th percentile degree)")
    p_analyze.add_argument("--ordering", choices=ORDERINGS, help="Matrix row/column order")
    p_analyze.add_argument("--linear", action="store_true", help="Linear instead of log color scale")
    p_analyze.add_argument("--out", "-o", help="Output directory")
    p_analyze.set_defaults(func=cmd_analyze)

    # communities
    p_comm = sub.add_parser("communities", help="Louvain community detection.")
    _add_common(p_comm)
    _add_graph_source(p_comm)
    p_comm.add_argument("--seed", type=int, help="Random seed (default: 0)")
    p_comm.add_argument("--resolution", type=float, help="Modularity resolution (default: 1.0)")
    p_comm.add_argument("--communities-on", choices=COMMUNITY_GRAPHS, help="Graph to partition (default: complete)")
    p_comm.add_argument("--out", "-o", help="Output directory")
    p_comm.set_defaults(func=cmd_communities)

    # rings
    p_rings = sub.add_parser("rings", help="Detect coordinated tagging rings.")
    _add_common(p_rings)
    _add_graph_source(p_rings)
    _add_rings(p_rings)
    p_rings.add_argument("--out", "-o", help="Output directory")
    p_rings.set_defaults(func=cmd_rings)

    # synth
    p_synth = sub.add_parser("synth", help="Generate a synthetic corpus with planted truth.")
    _add_common(p_synth)
    p_synth.add_argument("--spec", help="PlantedSpec JSON file (replaces the generator flags except --seed)")
    p_synth.add_argument("--users", type=int, default=1000, help="Number of users")
    p_synth.add_argument("--tweets", type=int, default=10000, help="Number of tweets")
    p_synth.add_argument("--zipf-s", type=float, default=1.2, help="Author activity Zipf exponent")
    p_synth.add_argument("--mention-rate", type=float, default=1.0, help="Expected mentions per tweet")
    p_synth.add_argument("--community", action="append", help="Planted community SIZE:INTERNAL_PROB (repeatable)")
    p_synth.add_argument("--ring", action="append", help="Planted ring SIZE:MENTIONS_PER_PAIR (repeatable)")
    p_synth.add_argument("--noise", type=float, default=0.0, help="Noise mention probability per ordered pair")
    p_synth.add_argument("--seed", type=int, help="Random seed (default: 0)")
    p_synth.add_argument("--out", "-o", default=".", help="Output directory")
    p_synth.set_defaults(func=cmd_synth)

    # run
    p_run = sub.add_parser("run", help="Full pipeline: ingest, build, filter, stats, communities, rings.")
    _add_common(p_run)
    _add_corpus(p_run)
    _add_build(p_run)
    _add_rings(p_run)
    p_run.add_argument("--manifest", help="CSV (label,path) or JSON manifest for one run per label")
    p_run.add_argument("--seed", type=int, help="Random seed (default: 0)")
    p_run.add_argument("--resolution", type=float, help="Modularity resolution (default: 1.0)")
    p_run.add_argument("--communities-on", choices=COMMUNITY_GRAPHS, help="Graph to partition (default: complete)")
    p_run.add_argument("--degree-kind", choices=KINDS, help="in, out or total (default)")
    p_run.add_argument("--tail-method", choices=TAIL_METHODS, help="ls (default) or hill")
    p_run.add_argument("--ordering", choices=ORDERINGS, help="Matrix row/column order")
    p_run.add_argument("--xlsx", action="store_true", help="Also write report.xlsx")
    p_run.add_argument("--out", "-o", help="Output directory")
    p_run.set_defaults(func=cmd_run)

    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_OK
    setup_logging(args.verbose, args.log_file)
    if args.command == "run" and not args.input and not args.manifest and not args.config:
        parser.error("run needs --input, --manifest or a --config with inputs")
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except MentionNetError as e:
        print(f"Error: {e}", file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        logging.exception("Internal error")
        print(f"Internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
