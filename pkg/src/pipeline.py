"""
Pipeline Module

RunConfig and the staged run: ingest -> mine -> build -> filter -> stats ->
communities -> rings, writing every artifact, config.json, summary.json and the
provenance log into one output directory. A failing stage leaves a FAILED marker
beside the partial outputs. Also runs per-label batches from a manifest.
"""

import csv
import json
import logging
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional

from .communities import (
    community_summary,
    detect_tag_rings,
    find_communities,
    rings_to_json,
    write_communities_csv,
)
from .config import (
    ConfigError,
    CorpusError,
    EmptyCorpusError,
    MatrixTooLargeError,
    MentionNetError,
    StageError,
)
from .corpus import FORMATS, corpus_stats
from .exporter import export_workbook, format_float, write_json
from .graphstats import (
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
from .ingest_worker import ingest_files_parallel
from .mention_miner import write_users_csv
from .netbuild import (
    N2_RANKS,
    ORDERINGS,
    BuildConfig,
    build_graph,
    filter_edges,
    to_adjacency,
    write_adjacency_csv,
    write_edges_csv,
)
from .provenance import ACTION_RUN_COMPLETE, ACTION_RUN_FAILED, ProvenanceLog
from .run_report import build_run_summary, export_summary
from .utils import parse_range_bound

CONFIG_FILENAME = "config.json"
SUMMARY_FILENAME = "summary.json"
FAILED_FILENAME = "FAILED"
BATCH_SUMMARY_FILENAME = "batch_summary.json"

STAGES = ("ingest", "mine", "build", "filter", "stats", "communities", "rings", "report")
COMMUNITY_GRAPHS = ("complete", "filtered")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class RunConfig:
    inputs: List[str] = field(default_factory=list)
    fmt: str = "jsonl"
    date_from: Optional[str] = None
    date_to: Optional[str] = None
    n1: int = 2000
    n2: int = 200
    weighted: bool = True
    n2_rank: str = "mentions"
    include_self_loops: bool = False
    strip_rt: bool = False
    min_weight: int = 200
    seed: int = 0
    resolution: float = 1.0
    communities_on: str = "complete"
    ring_size: int = 5
    ring_jaccard: float = 0.5
    ring_min_weight: int = 5
    ring_min_sources: int = 2
    ring_min_density: float = 0.5
    degree_kind: str = "total"
    degree_weighted: bool = False
    tail_method: str = "ls"
    matrix_ordering: str = "by_out_strength"
    log_scale: bool = True
    out: str = "out"
    label: str = ""
    threads: int = 1
    xlsx: bool = False

    def validate(self) -> None:
        if self.fmt not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.fmt!r}")
        if self.n2_rank not in N2_RANKS:
            raise ConfigError(f"n2_rank must be one of {N2_RANKS}, got {self.n2_rank!r}")
        if self.communities_on not in COMMUNITY_GRAPHS:
            raise ConfigError(f"communities_on must be one of {COMMUNITY_GRAPHS}")
        if self.degree_kind not in KINDS:
            raise ConfigError(f"degree_kind must be one of {KINDS}")
        if self.tail_method not in TAIL_METHODS:
            raise ConfigError(f"tail_method must be one of {TAIL_METHODS}")
        if self.matrix_ordering not in ORDERINGS:
            raise ConfigError(f"matrix_ordering must be one of {ORDERINGS}")
        if self.min_weight < 0:
            raise ConfigError("min_weight must be >= 0")
        if self.resolution <= 0:
            raise ConfigError("resolution must be > 0")
        if not 0.0 < self.ring_jaccard <= 1.0:
            raise ConfigError("ring_jaccard must be in (0, 1]")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        self.build_config()
        self.date_range()

    def build_config(self) -> BuildConfig:
        return BuildConfig(n1=self.n1, n2=self.n2, weighted=self.weighted,
                           include_self_loops=self.include_self_loops, n2_rank=self.n2_rank)

    def date_range(self):
        try:
            lo = parse_range_bound(self.date_from) if self.date_from else None
            hi = parse_range_bound(self.date_to, end_of_day=True) if self.date_to else None
        except ValueError as e:
            raise ConfigError(f"invalid date bound: {e}") from e
        if lo is not None and hi is not None and lo > hi:
            raise ConfigError(f"--from {self.date_from} is after --to {self.date_to}")
        return (lo, hi) if (lo or hi) else None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        """Build from a dict of typed values or INI strings; unknown keys are rejected."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = key.replace("-", "_")
            if name == "format":
                name = "fmt"
            if name not in known:
                raise ConfigError(f"unknown run setting: {key!r}")
            kwargs[name] = _coerce(name, known[name].default, value)
        return cls(**kwargs)

    def merged(self, overrides: dict) -> "RunConfig":
        """Copy with non-None overrides applied (CLI flags over INI values)."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        if not changes:
            return replace(self)
        parsed = RunConfig.from_dict(changes)
        return replace(self, **{name: getattr(parsed, name) for name in _names(changes)})


def _names(changes: dict) -> List[str]:
    out = []
    for key in changes:
        name = key.replace("-", "_")
        out.append("fmt" if name == "format" else name)
    return out


def _coerce(name: str, default, value):
    if not isinstance(value, str):
        return value
    raw = value.strip()
    if name == "inputs":
        return [p.strip() for p in raw.split(",") if p.strip()]
    if isinstance(default, bool):
        if raw.lower() in _TRUE:
            return True
        if raw.lower() in _FALSE:
            return False
        raise ConfigError(f"{name}: expected a boolean, got {value!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as e:
        raise ConfigError(f"{name}: invalid number {value!r}") from e
    if default is None:
        return raw or None
    return raw


@dataclass
class RunResult:
    out_dir: Path
    summary: dict
    artifacts: List[str]
    summary_sha256: str = ""


class _Run:
    """Mutable state of one pipeline run."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out_dir = Path(config.out)
        self.provenance = ProvenanceLog(self.out_dir)
        self.artifacts: List[str] = []
        self.notes: List[str] = []
        self.stage = None

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def record(self, path: Path) -> None:
        self.provenance.log_artifact(path, self.stage)
        self.artifacts.append(Path(path).relative_to(self.out_dir).as_posix())

    def note(self, message: str) -> None:
        logging.warning(message)
        self.notes.append(message)

    @contextmanager
    def stage_scope(self, name: str):
        self.stage = name
        logging.info(f"[{self.config.label or 'run'}] stage {name}")
        try:
            yield
        except StageError:
            raise
        except MentionNetError as e:
            raise StageError(name, e) from e
        except Exception as e:
            logging.exception(f"Unexpected error in stage {name}")
            raise StageError(name, e) from e
        self.provenance.log_stage(name)


def _write_failed_marker(out_dir: Path, error: StageError) -> None:
    marker = out_dir / FAILED_FILENAME
    marker.write_text(f"stage: {error.stage}\ncause: {error.cause}\n", encoding="utf-8", newline="")


def run_pipeline(config: RunConfig) -> RunResult:
    """
    Execute every stage in order and write the run directory.

    Raises:
        ConfigError: invalid configuration (before anything is written)
        StageError: a stage failed; partial outputs and a FAILED marker remain
    """
    config.validate()
    if not config.inputs:
        raise ConfigError("no input files given")
    run = _Run(config)
    run.out_dir.mkdir(parents=True, exist_ok=True)
    stale = run.path(FAILED_FILENAME)
    if stale.exists():
        stale.unlink()
    run.provenance.reset()
    write_json(run.path(CONFIG_FILENAME), config.to_dict())
    run.stage = "config"
    run.record(run.path(CONFIG_FILENAME))

    try:
        return _execute(run)
    except StageError as e:
        logging.error(f"Run failed: {e}")
        _write_failed_marker(run.out_dir, e)
        run.provenance.append(ACTION_RUN_FAILED, item=e.stage, details={"cause": str(e.cause)})
        raise


def _execute(run: _Run) -> RunResult:
    cfg = run.config
    label = cfg.label

    with run.stage_scope("ingest"):
        for path in cfg.inputs:
            if not Path(path).is_file():
                raise CorpusError(f"input file not found: {path}")
            run.provenance.log_input(Path(path))
        corpus, mined = ingest_files_parallel(
            [Path(p) for p in cfg.inputs], fmt=cfg.fmt, date_range=cfg.date_range(),
            threads=cfg.threads, strip_rt=cfg.strip_rt,
        )
        if len(corpus) == 0:
            raise EmptyCorpusError(
                f"no records in {', '.join(cfg.inputs)} "
                f"({corpus.report.total_lines} line(s), {corpus.report.out_of_range} out of range)"
            )
        stats = corpus_stats(corpus, label)
        run.record(write_json(run.path("stats.json"), {"stats": stats.to_dict(), "ingest": corpus.report.to_dict()}))

    with run.stage_scope("mine"):
        users_csv = run.path("users.csv")
        write_users_csv(mined.table, users_csv)
        run.record(users_csv)

    with run.stage_scope("build"):
        graph = build_graph(mined, cfg.build_config())
        write_edges_csv(graph, run.path("edges.csv"))
        run.record(run.path("edges.csv"))

    filtered = None
    with run.stage_scope("filter"):
        if cfg.weighted:
            filtered = filter_edges(graph, cfg.min_weight)
            write_edges_csv(filtered, run.path("edges_filtered.csv"))
            run.record(run.path("edges_filtered.csv"))
        else:
            run.note("unweighted build: weight filter skipped")

    with run.stage_scope("stats"):
        dist = degree_sequence(graph, cfg.degree_kind, weighted=cfg.degree_weighted and cfg.weighted)
        write_degree_csv(dist, run.path("degree.csv"))
        run.record(run.path("degree.csv"))
        write_ccdf_csv(dist, run.path("ccdf.csv"))
        run.record(run.path("ccdf.csv"))
        tail = tail_exponent(dist, method=cfg.tail_method)
        if not tail.reliable:
            run.note(f"tail estimate unreliable: {tail.n_tail} tail point(s)")
        run.record(write_json(run.path("tail.json"), {"distribution": dist.label, **tail.to_dict()}))
        if dist.max_degree() > 0:
            run.record(render_degree_plot(dist, log_log=True, out=run.path("degree.svg"), tail=tail,
                                          title=f"{label} {dist.label}".strip()))
        else:
            run.note(f"degree.svg skipped: every {dist.label} is 0")
        if cfg.matrix_ordering != "by_community":
            _write_matrix(run, filtered if filtered is not None else graph, None)

    with run.stage_scope("communities"):
        target = graph
        if cfg.communities_on == "filtered":
            if filtered is None:
                run.note("communities_on=filtered needs a weighted build; using the complete graph")
            else:
                target = filtered
        assignment = None
        if target.number_of_nodes() == 0:
            run.note("community detection skipped: graph has no nodes")
        else:
            assignment = find_communities(target, seed=cfg.seed, resolution=cfg.resolution)
            write_communities_csv(assignment, target, run.path("communities.csv"))
            run.record(run.path("communities.csv"))
            summary = community_summary(assignment, target)
            summary["graph"] = "filtered" if target is filtered else "complete"
            run.record(write_json(run.path("community_summary.json"), summary))
            run.record(render_communities(target, assignment, out=run.path("communities.svg"), seed=cfg.seed,
                                          title=f"{label} communities".strip()))
        if cfg.matrix_ordering == "by_community":
            # filtered nodes are a subset of the complete graph's, so either assignment covers them
            _write_matrix(run, filtered if filtered is not None else graph, assignment)

    rings = None
    with run.stage_scope("rings"):
        if cfg.weighted:
            thresholds = {
                "min_ring_size": cfg.ring_size,
                "min_weight": cfg.ring_min_weight,
                "min_jaccard": cfg.ring_jaccard,
                "min_sources": cfg.ring_min_sources,
                "min_density": cfg.ring_min_density,
            }
            rings = detect_tag_rings(graph, **thresholds)
            run.record(write_json(run.path("rings.json"), rings_to_json(rings, graph, thresholds)))
        else:
            run.note("unweighted build: ring detection skipped")

    with run.stage_scope("report"):
        if cfg.xlsx:
            run.record(_export_xlsx(run, graph, filtered, assignment, rings, stats, tail))
        summary = build_run_summary(
            label=label,
            stats=stats,
            ingest_report=corpus.report,
            mined=mined,
            graph=graph,
            filtered=filtered,
            min_weight=cfg.min_weight if cfg.weighted else None,
            tail=tail,
            assignment=assignment,
            communities_on=cfg.communities_on,
            rings=rings,
            artifacts=run.artifacts + [SUMMARY_FILENAME],
            notes=run.notes,
        )
        digest = export_summary(summary, run.path(SUMMARY_FILENAME), run.provenance, stage="report")

    run.provenance.append(ACTION_RUN_COMPLETE, item=label or None, details={"artifacts": len(run.artifacts) + 1})
    logging.info(f"Run complete: {len(run.artifacts) + 1} artifact(s) in {run.out_dir}")
    return RunResult(out_dir=run.out_dir, summary=summary, artifacts=sorted(run.artifacts + [SUMMARY_FILENAME]),
                     summary_sha256=digest)


def _write_matrix(run: _Run, graph, assignment) -> None:
    cfg = run.config
    if graph.number_of_edges() == 0:
        run.note("matrix.svg skipped: the matrix graph has no edges")
        return
    ordering = cfg.matrix_ordering
    if ordering == "by_community" and assignment is None:
        run.note("no community assignment for the matrix graph; ordering by out-strength")
        ordering = "by_out_strength"
    try:
        adj = to_adjacency(graph, ordering=ordering, assignment=assignment)
    except MatrixTooLargeError as e:
        run.note(f"matrix skipped: {e}")
        return
    write_adjacency_csv(adj, run.path("adjacency.csv"))
    run.record(run.path("adjacency.csv"))
    title = f"{cfg.label} weight > {cfg.min_weight}" if cfg.weighted else f"{cfg.label} unweighted"
    run.record(render_matrix(adj, log_scale=cfg.log_scale, out=run.path("matrix.svg"), title=title.strip()))


def _export_xlsx(run: _Run, graph, filtered, assignment, rings, stats, tail) -> Path:
    sheets = {
        "Summary": (["key", "value"], [
            ["label", run.config.label],
            ["tweets", stats.tweet_count],
            ["unique_authors", stats.unique_authors],
            ["nodes", graph.number_of_nodes()],
            ["edges", graph.number_of_edges()],
            ["filtered_edges", filtered.number_of_edges() if filtered is not None else ""],
            ["communities", assignment.n_communities if assignment is not None else ""],
            ["rings", len(rings) if rings is not None else ""],
            ["tail_exponent", format_float(tail.exponent)],
        ]),
        "Users": (["handle", "id", "posts", "mentions", "sources"], graph.table.to_rows() if graph.table else []),
        "Edges": (["src", "dst", "weight"], sorted(
            (graph.handle(u), graph.handle(v), w) for u, v, w in graph.edges())),
    }
    if assignment is not None:
        sheets["Communities"] = (["handle", "community"], sorted(
            (graph.handle(uid), cid) for uid, cid in assignment.membership.items()))
    if rings is not None:
        sheets["Rings"] = (["ring", "targets", "sources", "density", "total_weight"], [
            [i, " ".join(graph.handle(u) for u in r.targets), " ".join(graph.handle(u) for u in r.sources),
             format_float(r.density), r.total_weight]
            for i, r in enumerate(rings)
        ])
    return export_workbook(run.path("report.xlsx"), sheets)


# --- Batch mode ---

def read_manifest(path) -> Dict[str, List[str]]:
    """
    label -> input files, in manifest order. CSV needs a 'label,path' header (a label
    may repeat); JSON maps label to a path or a list of paths. Relative paths are
    taken from the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read manifest {path}: {e}") from e
    entries: Dict[str, List[str]] = {}
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"manifest {path.name} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("JSON manifest must map label to path(s)")
        for label, value in data.items():
            entries[label] = [value] if isinstance(value, str) else list(value)
    else:
        reader = csv.DictReader(text.splitlines())
        if not reader.fieldnames or {"label", "path"} - set(reader.fieldnames):
            raise ConfigError("CSV manifest needs a 'label,path' header")
        for row in reader:
            if row["label"] and row["path"]:
                entries.setdefault(row["label"].strip(), []).append(row["path"].strip())
    if not entries:
        raise ConfigError(f"manifest {path.name} lists no inputs")
    return {label: [str(p if Path(p).is_absolute() else base / p) for p in paths]
            for label, paths in entries.items()}


def run_batch(manifest: Dict[str, List[str]], base: RunConfig) -> dict:
    """
    One run per label under base.out/<label>; failures are recorded and the batch
    continues. Writes batch_summary.json (community count per label).
    """
    out_root = Path(base.out)
    rows = {}
    for label, inputs in manifest.items():
        cfg = replace(base, inputs=inputs, label=label, out=str(out_root / label))
        try:
            result = run_pipeline(cfg)
        except StageError as e:
            rows[label] = {"status": "failed", "stage": e.stage, "cause": str(e.cause)}
            continue
        s = result.summary
        rows[label] = {
            "status": "ok",
            "tweets": s["corpus"]["tweet_count"],
            "unique_authors": s["corpus"]["unique_authors"],
            "communities": s["communities"]["count"] if s["communities"] else None,
            "modularity": s["communities"]["modularity"] if s["communities"] else None,
            "rings": s["rings"]["count"] if s["rings"] else None,
        }
    batch = {"runs": rows, "failed": sorted(k for k, v in rows.items() if v["status"] != "ok")}
    write_json(out_root / BATCH_SUMMARY_FILENAME, batch)
    logging.info(f"Batch complete: {len(rows) - len(batch['failed'])} of {len(rows)} run(s) succeeded")
    return batch
