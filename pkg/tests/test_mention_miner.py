import csv
import random
import re
import tempfile
import unittest
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path

from src.config import ConfigError
from src.corpus import TweetRecord
from src.mention_miner import (
    AUTHOR,
    MENTIONED,
    UserTable,
    author_post_counts,
    extract_mentions,
    mention_frequencies,
    mine,
    normalize_handle,
    strip_retweet_prefix,
    top_n,
    write_users_csv,
)
from src.synthgen import PlantedSpec, plant

_TS = datetime(2020, 3, 8, tzinfo=timezone.utc)


def _tweets(*pairs):
    return [TweetRecord(id=str(i), author=a, text=t, created_at=_TS) for i, (a, t) in enumerate(pairs)]


def _scan_oracle(text):
    """Independent character scan of the mention grammar."""
    word = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")
    out = []
    i = 0
    while i < len(text):
        if text[i] == "@" and (i == 0 or text[i - 1] not in word):
            j = i + 1
            while j < len(text) and text[j] in word:
                j += 1
            if 1 <= j - i - 1 <= 15:
                out.append(text[i + 1:j].lower())
            i = j
        else:
            i += 1
    return out


class TestExtractMentions(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(extract_mentions("Hola @Minsa_Peru y @PCM!"), ["minsa_peru", "pcm"])
        self.assertEqual(extract_mentions("mail me a@b.com"), [])
        self.assertEqual(extract_mentions("@ana @ana gracias"), ["ana", "ana"])

    def test_no_mentions(self):
        self.assertEqual(extract_mentions("sin menciones"), [])
        self.assertEqual(extract_mentions("@ alone"), [])

    def test_long_handle_rejected(self):
        self.assertEqual(extract_mentions("@abcdefghijklmnop"), [])
        self.assertEqual(extract_mentions("@abcdefghijklmno"), ["abcdefghijklmno"])

    def test_grammar_properties(self):
        for h in extract_mentions("@A @Bb_1 x@y @ÜML @c.d @e-f (@G)"):
            self.assertLessEqual(len(h), 15)
            self.assertEqual(h, h.lower())
            self.assertTrue(re.fullmatch(r"[a-z0-9_]{1,15}", h))

    def test_against_scan_oracle(self):
        rng = random.Random(7)
        alphabet = "ab_Z9 @.,!é\n"
        for _ in range(200):
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
            self.assertEqual(extract_mentions(text), _scan_oracle(text), text)


class TestNormalization(unittest.TestCase):
    def test_idempotent(self):
        for raw in ("@Ana", "ANA", "ana", " @Minsa_Peru "):
            once = normalize_handle(raw)
            self.assertEqual(normalize_handle(once), once)
            self.assertNotIn("@", once)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            normalize_handle("@")
        with self.assertRaises(ValueError):
            normalize_handle("has space")

    def test_strip_retweet_prefix(self):
        self.assertEqual(strip_retweet_prefix("RT @ana: hola @bea"), "hola @bea")
        self.assertEqual(strip_retweet_prefix("hola @bea"), "hola @bea")
        self.assertEqual(strip_retweet_prefix("RTX @ana"), "RTX @ana")


class TestFrequencyTables(unittest.TestCase):
    def test_author_post_counts(self):
        table = UserTable()
        counts = author_post_counts(_tweets(("ana", ""), ("Ana", ""), ("luis", "")), table)
        self.assertEqual({table.handle_of(k): v for k, v in counts.items()}, {"ana": 2, "luis": 1})

    def test_empty(self):
        table = UserTable()
        self.assertEqual(author_post_counts([], table), Counter())
        self.assertEqual(mention_frequencies([], table), Counter())

    def test_mention_frequencies(self):
        table = UserTable()
        freq = mention_frequencies(_tweets(("x", "@ana hi"), ("y", "@ana @bea")), table)
        self.assertEqual({table.handle_of(k): v for k, v in freq.items()}, {"ana": 2, "bea": 1})

    def test_strip_rt_changes_counts(self):
        corpus = _tweets(("x", "RT @ana: @bea"))
        self.assertEqual(mine(corpus).n_events, 2)
        self.assertEqual(mine(corpus, strip_rt=True).n_events, 1)


class TestTopN(unittest.TestCase):
    def _table(self, handles):
        table = UserTable()
        for h in handles:
            table.intern(h)
        return table

    def test_tie_break_by_handle(self):
        table = self._table(["a", "b", "c"])
        self.assertEqual([table.handle_of(u) for u in top_n({0: 3, 1: 5, 2: 3}, 2, table)], ["b", "a"])

    def test_truncation(self):
        table = self._table(["a"])
        self.assertEqual(top_n({0: 1}, 10, table), [0])

    def test_invalid_n(self):
        with self.assertRaises(ConfigError):
            top_n({}, 0, UserTable())

    def test_against_full_sort(self):
        rng = random.Random(3)
        handles = [f"h{rng.randrange(10**6):06d}_{i}" for i in range(500)]
        table = self._table(handles)
        freq = {uid: rng.randint(1, 20) for uid in range(500)}
        expected = sorted(freq, key=lambda u: (-freq[u], table.handle_of(u)))[:50]
        self.assertEqual(top_n(freq, 50, table), expected)
        shuffled = dict(sorted(freq.items(), key=lambda kv: rng.random()))
        self.assertEqual(top_n(shuffled, 50, table), expected)


class TestMine(unittest.TestCase):
    def test_events_and_table(self):
        result = mine(_tweets(("ana", "@Bea @bea"), ("bea", "@ana"), ("luis", "@luis yo")))
        table = result.table
        self.assertEqual(table.handles, ["ana", "bea", "luis"])
        self.assertEqual(result.n_events, 4)
        self.assertEqual(result.self_mentions, 1)
        self.assertEqual(sum(table.post_counts), 3)
        self.assertEqual(sum(result.mention_counts().values()), result.n_events)
        self.assertEqual(table.sources[table.id_of("ana")], AUTHOR | MENTIONED)
        events = list(result.events())
        self.assertEqual([(e.author, e.target) for e in events], [(0, 1), (0, 1), (1, 0), (2, 2)])
        self.assertTrue(events[-1].is_self)
        self.assertEqual(events[2].tweet_id, "1")

    def test_deterministic(self):
        corpus = _tweets(("ana", "@bea @carla"), ("bea", "@ana"), ("carla", ""))
        a, b = mine(corpus), mine(corpus)
        self.assertEqual(a.table.to_rows(), b.table.to_rows())
        self.assertEqual(a.authors.tolist(), b.authors.tolist())

    def test_matches_planted_truth(self):
        synth = plant(PlantedSpec(n_users=100, n_tweets=1000, mention_rate=1.5, seed=11))
        result = mine(synth.records)
        table = result.table
        posts = {table.handle_of(u): c for u, c in result.post_counts().items()}
        planted_posts = {h: c for h, c in zip(synth.truth.handles, synth.truth.post_counts) if c}
        self.assertEqual(posts, planted_posts)
        mentions = {table.handle_of(u): c for u, c in result.mention_counts().items()}
        self.assertEqual(mentions, dict(synth.truth.mention_counts()))

    def test_users_csv(self):
        result = mine(_tweets(("Ana", "@bea")))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "users.csv"
            write_users_csv(result.table, path)
            with path.open(encoding="utf-8", newline="") as f:
                rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["handle", "id", "posts", "mentions", "sources"])
        self.assertEqual(rows[1], ["ana", "0", "1", "0", "author"])
        self.assertEqual(rows[2], ["bea", "1", "0", "1", "mentioned"])
        self.assertEqual(result.table.sources[1], MENTIONED)


if __name__ == '__main__':
    unittest.main()
