"""
Mention Miner Module

Extracts @-mention events from tweet text, normalizes handles, and builds the
per-user post and mention frequency tables used for top-N selection.
"""

import heapq
import logging
from array import array
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

import numpy as np

from .config import MENTION_RE, HANDLE_RE, RT_PREFIX_RE, ConfigError
from .exporter import write_csv

# Source flags for UserTable entries
AUTHOR = 1
MENTIONED = 2

_SOURCE_NAMES = {0: "", AUTHOR: "author", MENTIONED: "mentioned", AUTHOR | MENTIONED: "author+mentioned"}


def normalize_handle(handle: str) -> str:
    """Lowercase a handle and drop a leading '@'. Raises ValueError outside the handle grammar."""
    s = handle.strip().lstrip("@").lower()
    if not HANDLE_RE.match(s):
        raise ValueError(f"not a valid handle: {handle!r}")
    return s


def normalize_author(author: str) -> str:
    """Author identity: trimmed, '@'-stripped, lowercased. Does not enforce the handle grammar."""
    return author.strip().lstrip("@").lower()


def extract_mentions(text: str) -> List[str]:
    """All mentioned handles in order, lowercased; repeated mentions are kept."""
    if "@" not in text:
        return []
    return [h.lower() for h in MENTION_RE.findall(text)]


def strip_retweet_prefix(text: str) -> str:
    """Remove a leading 'RT @handle:' marker."""
    if not text.startswith(("RT", " ", "\t")):
        return text
    return RT_PREFIX_RE.sub("", text, count=1)


class UserTable:
    """Bidirectional handle <-> dense id map with per-user post and mention counts."""

    def __init__(self):
        self._ids: Dict[str, int] = {}
        self.handles: List[str] = []
        self.post_counts: List[int] = []
        self.mention_counts: List[int] = []
        self.sources: List[int] = []

    def intern(self, handle: str, source: int = 0) -> int:
        uid = self._ids.get(handle)
        if uid is None:
            uid = len(self.handles)
            self._ids[handle] = uid
            self.handles.append(handle)
            self.post_counts.append(0)
            self.mention_counts.append(0)
            self.sources.append(source)
        elif source:
            self.sources[uid] |= source
        return uid

    def id_of(self, handle: str) -> Optional[int]:
        return self._ids.get(handle)

    def handle_of(self, uid: int) -> str:
        return self.handles[uid]

    def source_label(self, uid: int) -> str:
        return _SOURCE_NAMES[self.sources[uid]]

    def __len__(self):
        return len(self.handles)

    def __contains__(self, handle):
        return handle in self._ids

    def __iter__(self):
        return iter(range(len(self.handles)))

    def to_rows(self) -> List[list]:
        return [
            [self.handles[i], i, self.post_counts[i], self.mention_counts[i], self.source_label(i)]
            for i in range(len(self.handles))
        ]


@dataclass(frozen=True)
class MentionEvent:
    author: int
    target: int
    tweet_id: str
    is_self: bool = False


@dataclass
class MiningResult:
    """Columnar mention events over a UserTable."""
    table: UserTable
    authors: np.ndarray
    targets: np.ndarray
    tweet_index: np.ndarray
    tweet_authors: np.ndarray
    tweet_ids: Sequence[str]

    @property
    def n_events(self) -> int:
        return int(self.authors.size)

    @property
    def n_tweets(self) -> int:
        return int(self.tweet_authors.size)

    @property
    def self_mentions(self) -> int:
        return int(np.count_nonzero(self.authors == self.targets))

    def events(self) -> Iterator[MentionEvent]:
        for a, t, k in zip(self.authors.tolist(), self.targets.tolist(), self.tweet_index.tolist()):
            yield MentionEvent(author=a, target=t, tweet_id=self.tweet_ids[k], is_self=a == t)

    def post_counts(self) -> Counter:
        return Counter({i: c for i, c in enumerate(self.table.post_counts) if c})

    def mention_counts(self) -> Counter:
        return Counter({i: c for i, c in enumerate(self.table.mention_counts) if c})


def mine(corpus: Iterable, strip_rt: bool = False,
         mentions: Optional[Sequence[List[str]]] = None) -> MiningResult:
    """
    Single pass over the corpus: intern authors and mentioned users (first-seen order),
    count posts and mentions, and record every mention occurrence as an event.

    Args:
        corpus: iterable of TweetRecord
        strip_rt: drop a leading 'RT @user:' before extraction
        mentions: pre-extracted handle lists aligned with the corpus (parallel ingest path)
    """
    table = UserTable()
    ev_authors = array("q")
    ev_targets = array("q")
    ev_tweet = array("q")
    tw_authors = array("q")
    tweet_ids = []
    post_counts = table.post_counts
    mention_counts = table.mention_counts

    for k, record in enumerate(corpus):
        a = table.intern(normalize_author(record.author), AUTHOR)
        post_counts[a] += 1
        tw_authors.append(a)
        tweet_ids.append(record.id)
        if mentions is not None:
            handles = mentions[k]
        else:
            text = strip_retweet_prefix(record.text) if strip_rt else record.text
            handles = extract_mentions(text)
        for h in handles:
            t = table.intern(h, MENTIONED)
            mention_counts[t] += 1
            ev_authors.append(a)
            ev_targets.append(t)
            ev_tweet.append(k)

    result = MiningResult(
        table=table,
        authors=np.frombuffer(ev_authors, dtype=np.int64) if ev_authors else np.zeros(0, dtype=np.int64),
        targets=np.frombuffer(ev_targets, dtype=np.int64) if ev_targets else np.zeros(0, dtype=np.int64),
        tweet_index=np.frombuffer(ev_tweet, dtype=np.int64) if ev_tweet else np.zeros(0, dtype=np.int64),
        tweet_authors=np.frombuffer(tw_authors, dtype=np.int64) if tw_authors else np.zeros(0, dtype=np.int64),
        tweet_ids=tweet_ids,
    )
    logging.info(
        f"Mined {result.n_events} mention event(s) from {result.n_tweets} tweet(s); "
        f"{len(table)} user(s), {result.self_mentions} self-mention(s)"
    )
    return result


def author_post_counts(corpus: Iterable, table: UserTable) -> Counter:
    """Posts per normalized author id. Unknown authors are added to the table."""
    counts = Counter()
    for record in corpus:
        counts[table.intern(normalize_author(record.author), AUTHOR)] += 1
    return counts


def mention_frequencies(corpus: Iterable, table: UserTable, strip_rt: bool = False) -> Counter:
    """Times each user id is mentioned across all tweet texts."""
    counts = Counter()
    for record in corpus:
        text = strip_retweet_prefix(record.text) if strip_rt else record.text
        for h in extract_mentions(text):
            counts[table.intern(h, MENTIONED)] += 1
    return counts


def top_n(freq: Dict[int, int], n: int, table: UserTable) -> List[int]:
    """
    The n ids with the highest counts, descending; ties ascending by handle.
    """
    if n < 1:
        raise ConfigError(f"top-N size must be >= 1, got {n}")
    handle_of = table.handle_of
    best = heapq.nsmallest(n, freq.items(), key=lambda kv: (-kv[1], handle_of(kv[0])))
    return [uid for uid, _ in best]


def write_users_csv(table: UserTable, path) -> None:
    write_csv(path, ["handle", "id", "posts", "mentions", "sources"], table.to_rows())
