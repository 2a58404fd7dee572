"""
Corpus Module

Ingests tweet corpora (line-delimited JSON or CSV with header) into an ordered,
immutable record sequence and reports dataset statistics (tweets, unique users,
date span) per corpus label.
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from .config import (
    MentionNetConfig,
    ConfigError,
    CorpusError,
    CorpusAbortError,
    RecordParseError,
)
from .mention_miner import normalize_author
from .utils import parse_timestamp, fmt_utc

FORMATS = ("jsonl", "csv")
CSV_COLUMNS = ("id", "user", "text", "created_at")
_REQUIRED = CSV_COLUMNS


@dataclass(frozen=True, slots=True)
class TweetRecord:
    id: str
    author: str
    text: str
    created_at: datetime


@dataclass(frozen=True, slots=True)
class RawRecord:
    """
    One input record before field validation: a JSONL line (text), a CSV row that
    may span several physical lines (row), or the reason it could not be read
    (error). line_no is the record's first physical line.
    """
    line_no: int
    text: str = ""
    row: Optional[Tuple[str, ...]] = None
    error: str = ""


@dataclass
class IngestReport:
    """Line accounting for one ingestion run."""
    total_lines: int = 0
    parsed: int = 0
    skipped: int = 0
    out_of_range: int = 0
    errors: List[str] = field(default_factory=list)

    @property
    def malformed_ratio(self) -> float:
        seen = self.parsed + self.skipped
        return self.skipped / seen if seen else 0.0

    def note_error(self, message: str) -> None:
        self.skipped += 1
        if len(self.errors) < MentionNetConfig.MAX_ERROR_SAMPLES:
            self.errors.append(message)

    def merge(self, other: "IngestReport") -> "IngestReport":
        room = max(0, MentionNetConfig.MAX_ERROR_SAMPLES - len(self.errors))
        return IngestReport(
            total_lines=self.total_lines + other.total_lines,
            parsed=self.parsed + other.parsed,
            skipped=self.skipped + other.skipped,
            out_of_range=self.out_of_range + other.out_of_range,
            errors=self.errors + other.errors[:room],
        )

    def to_dict(self) -> dict:
        return {
            "total_lines": self.total_lines,
            "parsed": self.parsed,
            "skipped": self.skipped,
            "out_of_range": self.out_of_range,
            "malformed_ratio": round(self.malformed_ratio, 6),
            "errors": list(self.errors),
        }


@dataclass
class Corpus:
    records: List[TweetRecord] = field(default_factory=list)
    report: IngestReport = field(default_factory=IngestReport)

    def __len__(self):
        return len(self.records)

    def __iter__(self) -> Iterator[TweetRecord]:
        return iter(self.records)


@dataclass(frozen=True)
class CorpusStats:
    tweet_count: int
    unique_authors: int
    date_min: Optional[datetime]
    date_max: Optional[datetime]
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "tweet_count": self.tweet_count,
            "unique_authors": self.unique_authors,
            "date_min": fmt_utc(self.date_min),
            "date_max": fmt_utc(self.date_max),
        }


class StatsAccumulator:
    """
    Partial corpus statistics. merge() is commutative and associative, so stats
    computed over any chunking of the corpus are identical.
    """

    def __init__(self):
        self.tweet_count = 0
        self.authors = set()
        self.date_min = None
        self.date_max = None

    def add(self, record: TweetRecord) -> None:
        self.tweet_count += 1
        self.authors.add(normalize_author(record.author))
        ts = record.created_at
        if self.date_min is None or ts < self.date_min:
            self.date_min = ts
        if self.date_max is None or ts > self.date_max:
            self.date_max = ts

    def merge(self, other: "StatsAccumulator") -> "StatsAccumulator":
        out = StatsAccumulator()
        out.tweet_count = self.tweet_count + other.tweet_count
        out.authors = self.authors | other.authors
        mins = [d for d in (self.date_min, other.date_min) if d is not None]
        maxs = [d for d in (self.date_max, other.date_max) if d is not None]
        out.date_min = min(mins) if mins else None
        out.date_max = max(maxs) if maxs else None
        return out

    def result(self, label: str = "") -> CorpusStats:
        return CorpusStats(
            tweet_count=self.tweet_count,
            unique_authors=len(self.authors),
            date_min=self.date_min,
            date_max=self.date_max,
            label=label,
        )


def _fields_from_json(line: str, line_no) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise RecordParseError(f"malformed JSON ({e.msg})", line_no) from e
    if not isinstance(obj, dict):
        raise RecordParseError("record is not a JSON object", line_no)
    return obj


def _fields_from_csv(line: str, line_no) -> dict:
    try:
        row = next(csv.reader([line]))
    except (csv.Error, StopIteration) as e:
        raise RecordParseError(f"malformed CSV ({e})", line_no) from e
    # trailing optional 'place' column is ignored
    return dict(zip(CSV_COLUMNS, row))


def parse_record(line: str, fmt: str = "jsonl", line_no: Optional[int] = None) -> TweetRecord:
    """
    Parse one input line into a normalized TweetRecord.

    Raises:
        RecordParseError: malformed syntax, missing required field, or invalid timestamp
    """
    if fmt == "jsonl":
        obj = _fields_from_json(line, line_no)
    elif fmt == "csv":
        obj = _fields_from_csv(line, line_no)
    else:
        raise ConfigError(f"unknown input format: {fmt!r} (expected one of {', '.join(FORMATS)})")
    return _record_from_fields(obj, line_no)


def parse_raw(raw: RawRecord) -> TweetRecord:
    """Validate one RawRecord into a TweetRecord; raises RecordParseError."""
    if raw.error:
        raise RecordParseError(raw.error, raw.line_no)
    if raw.row is not None:
        # trailing optional 'place' column is ignored
        return _record_from_fields(dict(zip(CSV_COLUMNS, raw.row)), raw.line_no)
    return _record_from_fields(_fields_from_json(raw.text, raw.line_no), raw.line_no)


def _record_from_fields(obj: dict, line_no) -> TweetRecord:
    for key in _REQUIRED:
        if obj.get(key) is None:
            raise RecordParseError(f'missing field "{key}"', line_no)

    tweet_id = obj["id"]
    if isinstance(tweet_id, bool) or not isinstance(tweet_id, (str, int)):
        raise RecordParseError('field "id" must be a string', line_no)
    tweet_id = str(tweet_id).strip()
    if not tweet_id:
        raise RecordParseError('empty field "id"', line_no)

    author = obj["user"]
    if not isinstance(author, str):
        raise RecordParseError('field "user" must be a string', line_no)
    author = author.strip().lstrip("@")
    if not author:
        raise RecordParseError('empty field "user"', line_no)

    text = obj["text"]
    if not isinstance(text, str):
        raise RecordParseError('field "text" must be a string', line_no)

    raw_ts = obj["created_at"]
    if not isinstance(raw_ts, str):
        raise RecordParseError('field "created_at" must be a string', line_no)
    try:
        created_at = parse_timestamp(raw_ts)
    except ValueError as e:
        raise RecordParseError(f"invalid timestamp {raw_ts!r}", line_no) from e

    return TweetRecord(id=tweet_id, author=author, text=text, created_at=created_at)


def validate_date_range(date_range: Optional[Tuple[Optional[datetime], Optional[datetime]]]):
    if not date_range:
        return None
    lo, hi = date_range
    if lo is not None and hi is not None and lo > hi:
        raise ConfigError(f"date range start {fmt_utc(lo)} is after end {fmt_utc(hi)}")
    if lo is None and hi is None:
        return None
    return lo, hi


def in_range(ts: datetime, date_range) -> bool:
    """Closed interval test; either bound may be None."""
    if date_range is None:
        return True
    lo, hi = date_range
    if lo is not None and ts < lo:
        return False
    if hi is not None and ts > hi:
        return False
    return True


def is_csv_header(row: Sequence[str]) -> bool:
    return [c.strip().lower() for c in row[:len(CSV_COLUMNS)]] == list(CSV_COLUMNS)


def _decoded(lines: Iterable) -> Iterator[Tuple[int, str, str]]:
    """(line_no, text, error) per physical line; bytes are decoded one line at a time."""
    for line_no, line in enumerate(lines, start=1):
        if isinstance(line, str):
            yield line_no, line, ""
            continue
        try:
            yield line_no, line.decode("utf-8"), ""
        except UnicodeDecodeError as e:
            yield line_no, line.decode("utf-8", errors="replace"), f"invalid UTF-8 at byte {e.start}"


def _jsonl_records(lines: Iterable) -> Iterator[RawRecord]:
    for line_no, text, error in _decoded(lines):
        if error:
            yield RawRecord(line_no, error=error)
            continue
        text = text.rstrip("\r\n")
        if text.strip():
            yield RawRecord(line_no, text=text)


def _csv_records(lines: Iterable) -> Iterator[RawRecord]:
    bad_lines = {}

    def feed():
        for line_no, text, error in _decoded(lines):
            if error:
                bad_lines[line_no] = error
            yield text

    reader = csv.reader(feed())
    start = 1
    expect_header = True
    while True:
        try:
            row = next(reader)
            error = ""
        except StopIteration:
            return
        except csv.Error as e:
            row, error = None, f"malformed CSV ({e})"
        end = reader.line_num
        line_no, start = start, end + 1
        # a quoted field may carry newlines, so one row can cover several lines
        undecodable = [bad_lines.pop(n) for n in range(line_no, end + 1) if n in bad_lines]
        error = error or (undecodable[0] if undecodable else "")
        if error:
            yield RawRecord(line_no, error=error)
            continue
        if not any(c.strip() for c in row):
            continue
        if expect_header:
            expect_header = False
            if is_csv_header(row):
                continue
        yield RawRecord(line_no, row=tuple(row))


def iter_raw_records(lines: Iterable, fmt: str = "jsonl") -> Iterator[RawRecord]:
    """
    Split one file's lines (str, or bytes decoded per line) into RawRecords. Blank
    lines are dropped, and so is a CSV header as the first non-blank row.
    """
    if fmt == "jsonl":
        return _jsonl_records(lines)
    if fmt == "csv":
        return _csv_records(lines)
    raise ConfigError(f"unknown input format: {fmt!r} (expected one of {', '.join(FORMATS)})")


def iter_parsed(raw_records: Iterable[RawRecord], date_range, report: IngestReport,
                source_name: str = "") -> Iterator[TweetRecord]:
    """
    Validate records lazily, updating report as a side effect. Malformed records
    are counted and skipped.
    """
    where = f"{source_name}:" if source_name else ""
    for raw in raw_records:
        report.total_lines += 1
        try:
            record = parse_raw(raw)
        except RecordParseError as e:
            report.note_error(f"{where}{e}")
            continue
        report.parsed += 1
        if not in_range(record.created_at, date_range):
            report.out_of_range += 1
            continue
        yield record


def check_malformed(report: IngestReport, max_ratio: Optional[float] = None) -> None:
    limit = MentionNetConfig.MAX_MALFORMED_RATIO if max_ratio is None else max_ratio
    if report.skipped:
        logging.warning(f"Skipped {report.skipped} malformed line(s) of {report.total_lines}")
    if report.malformed_ratio > limit:
        summary = "; ".join(report.errors[:5])
        raise CorpusAbortError(
            f"{report.skipped} of {report.total_lines} lines malformed "
            f"({report.malformed_ratio:.1%} > {limit:.1%}); first errors: {summary}",
            report=report,
        )


def ingest(source: Iterable, fmt: str = "jsonl", date_range=None,
           max_malformed_ratio: Optional[float] = None, source_name: str = "") -> Corpus:
    """
    Ingest one line stream into a Corpus, preserving source order.

    Raises:
        ConfigError: bad format or inverted date range
        CorpusAbortError: malformed ratio above the threshold
    """
    if fmt not in FORMATS:
        raise ConfigError(f"unknown input format: {fmt!r}")
    date_range = validate_date_range(date_range)
    report = IngestReport()
    records = list(iter_parsed(iter_raw_records(source, fmt), date_range, report, source_name=source_name))
    check_malformed(report, max_malformed_ratio)
    return Corpus(records=records, report=report)


def open_lines(path: Path) -> Iterator[bytes]:
    """Yield the raw byte lines of a file; OSError surfaces as CorpusError."""
    path = Path(path)
    try:
        with path.open("rb") as f:
            yield from f
    except OSError as e:
        raise CorpusError(f"cannot read {path}: {e}") from e


def read_corpus(paths: Sequence[Path], fmt: str = "jsonl", date_range=None,
                max_malformed_ratio: Optional[float] = None) -> Corpus:
    """Ingest several files in order as one corpus."""
    if fmt not in FORMATS:
        raise ConfigError(f"unknown input format: {fmt!r}")
    date_range = validate_date_range(date_range)
    report = IngestReport()
    records = []
    for path in paths:
        path = Path(path)
        logging.info(f"Ingesting {path}")
        part = IngestReport()
        records.extend(iter_parsed(iter_raw_records(open_lines(path), fmt), date_range, part,
                                   source_name=path.name))
        report = report.merge(part)
    check_malformed(report, max_malformed_ratio)
    logging.info(f"Ingested {len(records)} record(s) from {len(paths)} file(s)")
    return Corpus(records=records, report=report)


def filter_by_date(corpus: Corpus, date_range) -> Corpus:
    """Re-apply a date window to an existing corpus (idempotent)."""
    date_range = validate_date_range(date_range)
    kept = [r for r in corpus.records if in_range(r.created_at, date_range)]
    report = IngestReport(
        total_lines=corpus.report.total_lines,
        parsed=corpus.report.parsed,
        skipped=corpus.report.skipped,
        out_of_range=corpus.report.out_of_range + (len(corpus.records) - len(kept)),
        errors=list(corpus.report.errors),
    )
    return Corpus(records=kept, report=report)


def corpus_stats(corpus: Iterable[TweetRecord], label: str = "") -> CorpusStats:
    """Tweet count, unique normalized authors and date span of a corpus."""
    acc = StatsAccumulator()
    for record in corpus:
        acc.add(record)
    return acc.result(label)
