"""
Ingest Worker Module

Contains process_chunk_worker() - a top-level, picklable function that parses
one chunk of raw input records and extracts their mentions, returning plain data.

This module must not hold any state shared with the parent process so it can be
used with multiprocessing.ProcessPoolExecutor (spawn start method included).
Chunks are merged in submission order, so the result is identical to the
sequential ingest path.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from itertools import islice
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

from .config import MentionNetConfig, ConfigError
from .corpus import (
    FORMATS,
    Corpus,
    IngestReport,
    RawRecord,
    check_malformed,
    iter_parsed,
    iter_raw_records,
    open_lines,
    validate_date_range,
)
from .mention_miner import MiningResult, extract_mentions, mine, strip_retweet_prefix


def build_ingest_config(date_range, strip_rt: bool) -> dict:
    """
    Snapshot ingest settings into a plain picklable dict.
    Call this in the parent process BEFORE submitting to ProcessPoolExecutor.
    """
    return {
        "date_range": date_range,
        "strip_rt": strip_rt,
        "max_error_samples": MentionNetConfig.MAX_ERROR_SAMPLES,
    }


def _apply_ingest_config(cfg: dict) -> None:
    """Apply a config snapshot to MentionNetConfig in the worker process."""
    MentionNetConfig.MAX_ERROR_SAMPLES = cfg["max_error_samples"]


def _worker_init(cfg: dict) -> None:
    """Initializer for ProcessPoolExecutor worker processes; runs once per process."""
    _apply_ingest_config(cfg)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s [worker] %(message)s")


def process_chunk_worker(raw_records: List[RawRecord], source_name: str, cfg: dict) -> tuple:
    """
    Validate one chunk of records and extract mentions for every kept record.

    Args:
        raw_records: consecutive RawRecords of one input file
        source_name: file name used in error messages
        cfg: snapshot from build_ingest_config()

    Returns:
        (records, mention lists aligned with records, IngestReport)
    """
    report = IngestReport()
    records = list(iter_parsed(raw_records, cfg["date_range"], report, source_name=source_name))
    strip_rt = cfg["strip_rt"]
    mentions = [
        extract_mentions(strip_retweet_prefix(r.text) if strip_rt else r.text)
        for r in records
    ]
    return records, mentions, report


def iter_chunks(paths: Sequence[Path], chunk_lines: int,
                fmt: str = "jsonl") -> Iterator[Tuple[List[RawRecord], str]]:
    """
    Yield (raw_records, source_name) per chunk of at most chunk_lines records,
    files in order. Chunks end on record boundaries, so a CSV row spanning several
    lines is never split.
    """
    for path in paths:
        path = Path(path)
        raw = iter_raw_records(open_lines(path), fmt)
        while True:
            chunk = list(islice(raw, chunk_lines))
            if not chunk:
                break
            yield chunk, path.name


def ingest_files_parallel(paths: Sequence[Path], fmt: str = "jsonl", date_range=None,
                          threads: int = 1, strip_rt: bool = False,
                          max_malformed_ratio: Optional[float] = None,
                          chunk_lines: Optional[int] = None) -> Tuple[Corpus, MiningResult]:
    """
    Chunked ingest and mention extraction across worker processes, followed by mining
    over the ordered merge. threads <= 1 runs the same chunk code in-process.

    Raises:
        ConfigError: bad format or inverted date range
        CorpusError: unreadable input or malformed ratio above the threshold
    """
    if fmt not in FORMATS:
        raise ConfigError(f"unknown input format: {fmt!r}")
    date_range = validate_date_range(date_range)
    chunk_lines = chunk_lines or MentionNetConfig.INGEST_CHUNK_LINES
    threads = max(1, min(threads, MentionNetConfig.MAX_WORKER_THREADS))
    cfg = build_ingest_config(date_range, strip_rt)

    records, mentions = [], []
    report = IngestReport()

    def absorb(result):
        nonlocal report
        part_records, part_mentions, part_report = result
        records.extend(part_records)
        mentions.extend(part_mentions)
        report = report.merge(part_report)

    if threads == 1:
        for chunk, name in iter_chunks(paths, chunk_lines, fmt):
            absorb(process_chunk_worker(chunk, name, cfg))
    else:
        logging.info(f"Ingesting {len(paths)} file(s) with {threads} worker process(es)")
        with ProcessPoolExecutor(max_workers=threads, initializer=_worker_init, initargs=(cfg,)) as executor:
            # map() yields results in submission order
            chunks = iter_chunks(paths, chunk_lines, fmt)
            for result in executor.map(_run_chunk, ((c, n, cfg) for c, n in chunks)):
                absorb(result)

    check_malformed(report, max_malformed_ratio)
    corpus = Corpus(records=records, report=report)
    logging.info(f"Ingested {len(records)} record(s) from {len(paths)} file(s)")
    return corpus, mine(corpus, strip_rt=strip_rt, mentions=mentions)


def _run_chunk(args) -> tuple:
    return process_chunk_worker(*args)
