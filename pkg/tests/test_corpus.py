import json
import tempfile
import unittest
from datetime import datetime, timezone
from pathlib import Path

from src.config import ConfigError, CorpusAbortError, CorpusError, RecordParseError
from src.corpus import (
    Corpus,
    StatsAccumulator,
    TweetRecord,
    corpus_stats,
    filter_by_date,
    ingest,
    parse_record,
    read_corpus,
)
from src.utils import parse_range_bound


def _line(tweet_id, user, text, ts="2020-03-08T00:00:00Z"):
    return json.dumps({"id": tweet_id, "user": user, "text": text, "created_at": ts})


def _record(tweet_id, user, ts="2020-03-08T00:00:00Z"):
    return TweetRecord(id=tweet_id, author=user, text="", created_at=datetime.fromisoformat(ts.replace("Z", "+00:00")))


class TestParseRecord(unittest.TestCase):
    def test_jsonl_field_mapping(self):
        r = parse_record('{"id":"1","user":"Ana","text":"hola @Luis","created_at":"2020-03-08T00:00:00Z"}')
        self.assertEqual(r.id, "1")
        self.assertEqual(r.author, "Ana")
        self.assertEqual(r.text, "hola @Luis")
        self.assertEqual(r.created_at, datetime(2020, 3, 8, tzinfo=timezone.utc))

    def test_missing_user(self):
        with self.assertRaises(RecordParseError) as ctx:
            parse_record('{"id":"2","text":"x"}', "jsonl", line_no=7)
        self.assertIn('missing field "user"', str(ctx.exception))
        self.assertEqual(ctx.exception.line_no, 7)
        self.assertTrue(str(ctx.exception).startswith("line 7:"))

    def test_csv_strips_at(self):
        r = parse_record('3,@Bea,"hi @Ana",2020-04-01T10:00:00Z', "csv")
        self.assertEqual(r.author, "Bea")
        self.assertEqual(r.text, "hi @Ana")

    def test_optional_place_ignored(self):
        r = parse_record(json.dumps({"id": "4", "user": "x", "text": "", "created_at": "2020-03-08T00:00:00Z",
                                     "place": "Lima"}))
        self.assertEqual(r.text, "")

    def test_numeric_id_accepted(self):
        self.assertEqual(parse_record(_line(12, "ana", "t")).id, "12")

    def test_invalid_inputs(self):
        bad = [
            "{not json",
            "[1, 2]",
            _line("1", "ana", "t", ts="not a date"),
            _line("", "ana", "t"),
            _line("1", "  ", "t"),
            json.dumps({"id": "1", "user": "ana", "text": 5, "created_at": "2020-03-08T00:00:00Z"}),
        ]
        for line in bad:
            with self.assertRaises(RecordParseError, msg=line):
                parse_record(line)

    def test_unknown_format(self):
        with self.assertRaises(ConfigError):
            parse_record("x", "xml")


class TestIngest(unittest.TestCase):
    def test_order_preserved(self):
        lines = [_line(str(i), f"u{i}", "t") for i in (3, 1, 2)]
        corpus = ingest(lines)
        self.assertEqual([r.id for r in corpus], ["3", "1", "2"])
        self.assertEqual(corpus.report.parsed, 3)

    def test_closed_date_range(self):
        lines = [
            _line("1", "a", "t", "2020-03-07T23:59:59Z"),
            _line("2", "a", "t", "2020-03-08T00:00:00Z"),
            _line("3", "a", "t", "2020-07-12T00:00:00Z"),
        ]
        rng = (parse_range_bound("2020-03-08"), parse_range_bound("2020-07-11", end_of_day=True))
        corpus = ingest(lines, date_range=rng)
        self.assertEqual([r.id for r in corpus], ["2"])
        self.assertEqual(corpus.report.out_of_range, 2)

    def test_last_day_included(self):
        rng = (None, parse_range_bound("2020-07-11", end_of_day=True))
        corpus = ingest([_line("1", "a", "t", "2020-07-11T23:30:00Z")], date_range=rng)
        self.assertEqual(len(corpus), 1)

    def test_inverted_range(self):
        rng = (parse_range_bound("2020-07-11"), parse_range_bound("2020-03-08"))
        with self.assertRaises(ConfigError):
            ingest([], date_range=rng)

    def test_one_malformed_in_ten(self):
        lines = [_line(str(i), "a", "t") for i in range(9)]
        lines.insert(4, "{broken")
        corpus = ingest(lines)
        self.assertEqual(len(corpus), 9)
        self.assertEqual(corpus.report.skipped, 1)
        self.assertEqual(len(corpus.report.errors), 1)
        self.assertIn("line 5", corpus.report.errors[0])

    def test_malformed_ratio_aborts(self):
        lines = [_line(str(i), "a", "t") for i in range(8)] + ["{broken", "also broken"]
        with self.assertRaises(CorpusAbortError) as ctx:
            ingest(lines)
        self.assertEqual(ctx.exception.report.skipped, 2)

    def test_threshold_is_configurable(self):
        lines = [_line(str(i), "a", "t") for i in range(8)] + ["{broken", "also broken"]
        corpus = ingest(lines, max_malformed_ratio=0.5)
        self.assertEqual(len(corpus), 8)

    def test_blank_lines_ignored(self):
        corpus = ingest(["", _line("1", "a", "t"), "   \n", _line("2", "a", "t")])
        self.assertEqual(len(corpus), 2)
        self.assertEqual(corpus.report.skipped, 0)

    def test_csv_header_skipped(self):
        lines = ["\n", "id,user,text,created_at\n", '1,ana,"@bea hi",2020-03-08T00:00:00Z\n']
        corpus = ingest(lines, fmt="csv")
        self.assertEqual(len(corpus), 1)
        self.assertEqual(corpus.report.skipped, 0)

    def test_csv_quoted_newline_is_one_record(self):
        lines = ["id,user,text,created_at\n", '1,ana,"hola\n', '@bea",2020-03-08T00:00:00Z\n',
                 "2,bea,@ana,2020-03-09T00:00:00Z\n"]
        corpus = ingest(lines, fmt="csv")
        self.assertEqual([r.text for r in corpus], ["hola\n@bea", "@ana"])
        self.assertEqual(corpus.report.skipped, 0)

    def test_csv_error_reports_first_line_of_record(self):
        lines = ["id,user,text,created_at\n", '1,ana,"a\n', 'b",2020-03-08T00:00:00Z\n', '2,bea,"x\n', 'y",never\n']
        corpus = ingest(lines, fmt="csv", max_malformed_ratio=1.0)
        self.assertEqual(len(corpus), 1)
        self.assertIn("line 4", corpus.report.errors[0])

    def test_filter_idempotent(self):
        lines = [_line(str(d), "a", "t", f"2020-03-{d:02d}T12:00:00Z") for d in range(1, 20)]
        rng = (parse_range_bound("2020-03-05"), parse_range_bound("2020-03-10", end_of_day=True))
        once = filter_by_date(ingest(lines), rng)
        twice = filter_by_date(once, rng)
        self.assertEqual([r.id for r in once], [r.id for r in twice])
        self.assertEqual(len(once), 6)


class TestReadCorpus(unittest.TestCase):
    def test_files_concatenated_in_order(self):
        with tempfile.TemporaryDirectory() as tmp:
            a = Path(tmp) / "a.jsonl"
            b = Path(tmp) / "b.jsonl"
            a.write_text(_line("1", "ana", "x") + "\n" + _line("2", "bea", "y") + "\n", encoding="utf-8")
            b.write_text(_line("3", "luis", "z") + "\n", encoding="utf-8")
            corpus = read_corpus([b, a])
        self.assertEqual([r.id for r in corpus], ["3", "1", "2"])
        self.assertEqual(corpus.report.total_lines, 3)

    def test_invalid_utf8_costs_one_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "latin1.jsonl"
            lines = [_line(str(i), "ana", "hola").encode("utf-8") for i in range(99)]
            lines.insert(42, b'{"id":"x","user":"jos\xe9","text":"t","created_at":"2020-03-08T00:00:00Z"}')
            path.write_bytes(b"\n".join(lines) + b"\n")
            corpus = read_corpus([path])
        self.assertEqual(len(corpus), 99)
        self.assertEqual(corpus.report.skipped, 1)
        self.assertIn("latin1.jsonl:line 43", corpus.report.errors[0])
        self.assertIn("UTF-8", corpus.report.errors[0])

    def test_invalid_utf8_inside_csv_record(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "t.csv"
            path.write_bytes(b'id,user,text,created_at\n1,ana,"caf\xe9\n@bea",2020-03-08T00:00:00Z\n'
                             b"2,bea,@ana,2020-03-09T00:00:00Z\n")
            corpus = read_corpus([path], fmt="csv", max_malformed_ratio=1.0)
        self.assertEqual([r.id for r in corpus], ["2"])
        self.assertIn("line 2", corpus.report.errors[0])

    def test_unreadable_source(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CorpusError):
                read_corpus([Path(tmp) / "missing.jsonl"])


class TestCorpusStats(unittest.TestCase):
    def test_empty(self):
        stats = corpus_stats(Corpus())
        self.assertEqual((stats.tweet_count, stats.unique_authors), (0, 0))
        self.assertIsNone(stats.date_min)

    def test_three_tweets_two_authors(self):
        records = [_record("1", "ana"), _record("2", "Ana"), _record("3", "@luis")]
        stats = corpus_stats(records, label="peru")
        self.assertEqual((stats.tweet_count, stats.unique_authors), (3, 2))
        self.assertEqual(stats.to_dict()["label"], "peru")

    def test_date_span(self):
        records = [_record("1", "a", "2020-05-01T00:00:00Z"), _record("2", "b", "2020-03-08T00:00:00Z")]
        stats = corpus_stats(records)
        self.assertLessEqual(stats.date_min, stats.date_max)
        self.assertEqual(stats.to_dict()["date_min"], "2020-03-08T00:00:00Z")

    def test_concat_additivity(self):
        a = [_record("1", "ana"), _record("2", "bea")]
        b = [_record("3", "ana"), _record("4", "carla"), _record("5", "dan")]
        sa, sb, sab = corpus_stats(a), corpus_stats(b), corpus_stats(a + b)
        self.assertEqual(sab.tweet_count, sa.tweet_count + sb.tweet_count)
        self.assertGreaterEqual(sab.unique_authors, max(sa.unique_authors, sb.unique_authors))

    def test_accumulator_merge_independent_of_chunking(self):
        records = [_record(str(i), f"u{i % 7}", f"2020-03-{(i % 28) + 1:02d}T00:00:00Z") for i in range(50)]
        whole = corpus_stats(records)
        for size in (1, 3, 17, 50):
            acc = StatsAccumulator()
            for start in range(0, len(records), size):
                part = StatsAccumulator()
                for r in records[start:start + size]:
                    part.add(r)
                acc = part.merge(acc)
            self.assertEqual(acc.result(), whole)


if __name__ == '__main__':
    unittest.main()
