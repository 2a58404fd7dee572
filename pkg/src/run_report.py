"""
Run Summary Report

Builds the summary.json payload of a pipeline run (corpus statistics, ingest
accounting, graph sizes before and after filtering, tail exponent, community
and ring counts) and exports it with a content hash recorded in the run's
provenance log.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import List, Optional

from .config import APP_NAME, APP_VERSION
from .exporter import dumps_json, format_float
from .provenance import ProvenanceLog

_HASH_KEY = "_summary_sha256"


def _graph_block(graph) -> Optional[dict]:
    if graph is None:
        return None
    return {
        "nodes": graph.number_of_nodes(),
        "edges": graph.number_of_edges(),
        "total_weight": graph.total_weight(),
        "roles": graph.role_counts(),
    }


def build_run_summary(
    label: str,
    stats=None,
    ingest_report=None,
    mined=None,
    graph=None,
    filtered=None,
    min_weight: Optional[int] = None,
    tail=None,
    assignment=None,
    communities_on: Optional[str] = None,
    rings: Optional[list] = None,
    artifacts: Optional[List[str]] = None,
    notes: Optional[List[str]] = None,
) -> dict:
    """Build a structured summary dict; sections whose stage did not run are None."""
    summary = {
        "generator": APP_NAME,
        "version": APP_VERSION,
        "label": label,
        "corpus": stats.to_dict() if stats is not None else None,
        "ingest": ingest_report.to_dict() if ingest_report is not None else None,
        "mentions": None,
        "graph": _graph_block(graph),
        "filtered_graph": _graph_block(filtered),
        "min_weight": min_weight,
        "tail": tail.to_dict() if tail is not None else None,
        "communities": None,
        "rings": None,
        "artifacts": sorted(artifacts or []),
        "notes": list(notes or []),
    }
    if mined is not None:
        summary["mentions"] = {
            "events": mined.n_events,
            "users": len(mined.table),
            "self_mentions": mined.self_mentions,
        }
    if assignment is not None:
        summary["communities"] = {
            "count": assignment.n_communities,
            "modularity": format_float(assignment.modularity),
            "graph": communities_on,
            "seed": assignment.seed,
            "resolution": assignment.resolution,
        }
    if rings is not None:
        summary["rings"] = {
            "count": len(rings),
            "largest": max((len(r.targets) for r in rings), default=0),
        }
    return summary


def export_summary(summary: dict, output_path: Path, provenance: Optional[ProvenanceLog] = None,
                   stage: str = "report") -> str:
    """
    Write summary.json with an embedded SHA-256 of its content and record the file in
    the provenance log.

    Returns the SHA-256 hash of the summary content (hex).
    """
    output_path = Path(output_path)
    payload = {k: v for k, v in summary.items() if k != _HASH_KEY}
    content_hash = hashlib.sha256(dumps_json(payload).encode("utf-8")).hexdigest()
    payload[_HASH_KEY] = content_hash
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(dumps_json(payload), encoding="utf-8", newline="")
    if provenance is not None:
        provenance.log_artifact(output_path, stage)
    logging.info(f"Summary written to {output_path}")
    return content_hash


def verify_summary_hash(summary_path: Path) -> bool:
    """Recompute the embedded content hash of a summary.json."""
    summary_path = Path(summary_path)
    if not summary_path.exists():
        return False
    try:
        data = json.loads(summary_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        logging.warning(f"Could not read summary {summary_path}: {e}")
        return False
    recorded = data.pop(_HASH_KEY, None)
    return recorded == hashlib.sha256(dumps_json(data).encode("utf-8")).hexdigest()
