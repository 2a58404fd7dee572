"""
Synthetic Corpus Generator

Generates tweet corpora with planted ground truth (Zipf author activity, planted
communities, planted tagging rings, mention noise) as the oracle harness for the
analysis modules, plus small graph-level benchmarks built on networkx generators.
"""

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from .config import MentionNetConfig, InfeasibleSpecError
from .corpus import TweetRecord
from .exporter import write_json
from .netbuild import MentionGraph
from .utils import parse_timestamp, fmt_utc

CORPUS_FILENAME = "synth_corpus.jsonl"
TRUTH_FILENAME = "truth.json"

FILLER_WORDS = (
    "covid", "cuarentena", "salud", "hoy", "casos", "vacuna", "ciudad", "gobierno",
    "hospital", "noticias", "gracias", "todos", "medidas", "contagios", "mascarilla",
    "lima", "quito", "caracas", "bogota", "santiago", "pandemia", "datos", "semana",
)
_CAPITALIZE_PROB = 0.2


@dataclass(frozen=True)
class CommunitySpec:
    size: int
    internal_mention_prob: float


@dataclass(frozen=True)
class RingSpec:
    size: int
    mentions_per_pair: int


@dataclass
class PlantedSpec:
    n_users: int = 1000
    n_tweets: int = 10000
    activity_zipf_s: float = 1.2
    mention_rate: float = 1.0
    communities: List[CommunitySpec] = field(default_factory=list)
    rings: List[RingSpec] = field(default_factory=list)
    noise_edge_prob: float = 0.0
    seed: int = 0
    start: str = MentionNetConfig.SYNTH_START
    end: str = MentionNetConfig.SYNTH_END

    @property
    def ring_tweet_count(self) -> int:
        return sum(r.size * r.mentions_per_pair for r in self.rings)

    def validate(self) -> None:
        """Raises InfeasibleSpecError for parameters that cannot be realized."""
        if self.n_users < 0 or self.n_tweets < 0:
            raise InfeasibleSpecError("n_users and n_tweets must be >= 0")
        if self.n_tweets > 0 and self.n_users < 1:
            raise InfeasibleSpecError("tweets need at least one user")
        planted = sum(c.size for c in self.communities) + sum(r.size for r in self.rings)
        if planted > self.n_users:
            raise InfeasibleSpecError(
                f"community and ring sizes ({planted}) exceed n_users ({self.n_users})"
            )
        for c in self.communities:
            if c.size < 1 or not 0.0 <= c.internal_mention_prob <= 1.0:
                raise InfeasibleSpecError(f"invalid community {c}")
        for r in self.rings:
            if r.size < 2 or r.mentions_per_pair < 1:
                raise InfeasibleSpecError(f"invalid ring {r}: size >= 2 and mentions_per_pair >= 1 required")
        if self.ring_tweet_count > self.n_tweets:
            raise InfeasibleSpecError(
                f"rings need {self.ring_tweet_count} tweets but n_tweets is {self.n_tweets}"
            )
        if not 0.0 <= self.noise_edge_prob <= 1.0:
            raise InfeasibleSpecError("noise_edge_prob must be within [0, 1]")
        if self.mention_rate < 0 or self.activity_zipf_s < 0:
            raise InfeasibleSpecError("mention_rate and activity_zipf_s must be >= 0")
        try:
            if parse_timestamp(self.start) > parse_timestamp(self.end):
                raise InfeasibleSpecError("start is after end")
        except ValueError as e:
            raise InfeasibleSpecError(f"invalid start/end timestamp: {e}") from e

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PlantedSpec":
        data = dict(data)
        data["communities"] = [CommunitySpec(**c) for c in data.get("communities", [])]
        data["rings"] = [RingSpec(**r) for r in data.get("rings", [])]
        try:
            return cls(**data)
        except TypeError as e:
            raise InfeasibleSpecError(f"bad spec fields: {e}") from e

    @classmethod
    def from_json(cls, path) -> "PlantedSpec":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise InfeasibleSpecError(f"cannot read spec {path}: {e}") from e

    def to_json(self, path) -> Path:
        return write_json(path, self.to_dict())


@dataclass
class PlantedTruth:
    handles: List[str]
    community_labels: List[int]
    ring_labels: List[int]
    post_counts: List[int]
    events: Counter = field(default_factory=Counter)
    ring_events: int = 0
    noise_events: int = 0

    @property
    def n_events(self) -> int:
        return sum(self.events.values())

    def ring_members(self) -> List[List[str]]:
        rings: Dict[int, List[str]] = {}
        for handle, label in zip(self.handles, self.ring_labels):
            if label >= 0:
                rings.setdefault(label, []).append(handle)
        return [rings[k] for k in sorted(rings)]

    def community_members(self) -> List[List[str]]:
        groups: Dict[int, List[str]] = {}
        for handle, label in zip(self.handles, self.community_labels):
            if label >= 0:
                groups.setdefault(label, []).append(handle)
        return [groups[k] for k in sorted(groups)]

    def mention_counts(self) -> Counter:
        counts = Counter()
        for (_, t), c in self.events.items():
            counts[t] += c
        return counts

    def to_dict(self, spec: Optional[PlantedSpec] = None) -> dict:
        return {
            "spec": spec.to_dict() if spec is not None else None,
            "users": [
                {"handle": h, "community": c, "ring": r, "posts": p}
                for h, c, r, p in zip(self.handles, self.community_labels, self.ring_labels, self.post_counts)
            ],
            "communities": self.community_members(),
            "rings": self.ring_members(),
            "n_events": self.n_events,
            "ring_events": self.ring_events,
            "noise_events": self.noise_events,
            "events": [[a, t, c] for (a, t), c in sorted(self.events.items())],
        }


@dataclass
class SyntheticCorpus:
    records: List[TweetRecord]
    truth: PlantedTruth
    spec: PlantedSpec


def _handles(n_users: int) -> List[str]:
    width = max(5, len(str(max(n_users - 1, 0))))
    return [f"user{i:0{width}d}" for i in range(n_users)]


def _draw_targets(rng, authors: np.ndarray, community_of: np.ndarray, comm_start: np.ndarray,
                  comm_size: np.ndarray, comm_prob: np.ndarray, cum_weights: np.ndarray,
                  n_users: int) -> np.ndarray:
    """One target per mention slot: in-community with the community's probability, else by popularity."""
    m = authors.size
    targets = np.searchsorted(cum_weights, rng.random(m) * cum_weights[-1], side="right")
    targets = np.minimum(targets, n_users - 1)
    # background draws never hit the author
    clash = targets == authors
    targets[clash] = (targets[clash] + 1) % n_users

    comm = community_of[authors]
    in_comm = comm >= 0
    if in_comm.any():
        idx = np.nonzero(in_comm)[0]
        c = comm[idx]
        eligible = (comm_size[c] > 1) & (rng.random(idx.size) < comm_prob[c])
        idx, c = idx[eligible], c[eligible]
        offset = (rng.random(idx.size) * (comm_size[c] - 1)).astype(np.int64)
        picked = comm_start[c] + offset
        # skip over the author inside its own community
        picked[picked >= authors[idx]] += 1
        targets[idx] = picked
    return targets


def plant(spec: PlantedSpec) -> SyntheticCorpus:
    """Generate the corpus and its ground truth in memory; fully determined by spec.seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_users = spec.n_users
    handles = _handles(n_users)
    community_of = np.full(n_users, -1, dtype=np.int64)
    ring_of = np.full(n_users, -1, dtype=np.int64)

    pos = 0
    comm_start, comm_size, comm_prob = [], [], []
    for ci, c in enumerate(spec.communities):
        community_of[pos:pos + c.size] = ci
        comm_start.append(pos)
        comm_size.append(c.size)
        comm_prob.append(c.internal_mention_prob)
        pos += c.size
    ring_members = []
    for ri, r in enumerate(spec.rings):
        ring_of[pos:pos + r.size] = ri
        ring_members.append(list(range(pos, pos + r.size)))
        pos += r.size

    tweets: List[Tuple[int, List[int]]] = []
    ring_events = 0
    for r, members in zip(spec.rings, ring_members):
        for _ in range(r.mentions_per_pair):
            for u in members:
                tweets.append((u, [v for v in members if v != u]))
                ring_events += len(members) - 1

    n_ordinary = spec.n_tweets - len(tweets)
    if n_ordinary > 0:
        ranks = rng.permutation(n_users) + 1
        weights = ranks.astype(float) ** (-spec.activity_zipf_s)
        cum_weights = np.cumsum(weights)
        authors = np.searchsorted(cum_weights, rng.random(n_ordinary) * cum_weights[-1], side="right")
        authors = np.minimum(authors, n_users - 1)
        k = rng.poisson(spec.mention_rate, size=n_ordinary) if n_users > 1 else np.zeros(n_ordinary, dtype=np.int64)
        slot_authors = np.repeat(authors, k)
        targets = _draw_targets(
            rng, slot_authors, community_of,
            np.array(comm_start, dtype=np.int64), np.array(comm_size, dtype=np.int64),
            np.array(comm_prob, dtype=float), cum_weights, n_users,
        ) if slot_authors.size else np.zeros(0, dtype=np.int64)
        splits = np.split(targets, np.cumsum(k)[:-1])
        for a, ts in zip(authors.tolist(), splits):
            tweets.append((a, ts.tolist()))

    noise_events = 0
    if spec.noise_edge_prob > 0 and n_users > 1 and tweets:
        by_author: Dict[int, List[int]] = {}
        for idx, (a, _) in enumerate(tweets):
            by_author.setdefault(a, []).append(idx)
        for u in range(n_users):
            own = by_author.get(u)
            count = rng.binomial(n_users - 1, spec.noise_edge_prob)
            if not own or count == 0:
                continue
            picks = rng.choice(n_users - 1, size=count, replace=False)
            picks[picks >= u] += 1
            hosts = rng.integers(0, len(own), size=count)
            for v, h in zip(picks.tolist(), hosts.tolist()):
                tweets[own[h]][1].append(v)
            noise_events += count

    order = rng.permutation(len(tweets)) if tweets else np.zeros(0, dtype=np.int64)
    start = parse_timestamp(spec.start)
    span = (parse_timestamp(spec.end) - start).total_seconds()
    step = span / max(len(tweets) - 1, 1)

    records = []
    events = Counter()
    post_counts = [0] * n_users
    for i, t_idx in enumerate(order.tolist()):
        author, targets = tweets[t_idx]
        post_counts[author] += 1
        n_filler = int(rng.integers(1, 6))
        words = [FILLER_WORDS[w] for w in rng.integers(0, len(FILLER_WORDS), size=n_filler).tolist()]
        caps = rng.random(len(targets)) < _CAPITALIZE_PROB
        tags = []
        for v, cap in zip(targets, caps.tolist()):
            tags.append("@" + (handles[v].capitalize() if cap else handles[v]))
            events[(handles[author], handles[v])] += 1
        text = " ".join(words + tags)
        created = start + timedelta(seconds=int(round(i * step)))
        records.append(TweetRecord(id=str(i + 1), author=handles[author], text=text, created_at=created))

    truth = PlantedTruth(
        handles=handles,
        community_labels=community_of.tolist(),
        ring_labels=ring_of.tolist(),
        post_counts=post_counts,
        events=events,
        ring_events=ring_events,
        noise_events=noise_events,
    )
    logging.info(
        f"Planted corpus: {len(records)} tweet(s), {truth.n_events} mention event(s) "
        f"({ring_events} ring, {noise_events} noise), seed {spec.seed}"
    )
    return SyntheticCorpus(records=records, truth=truth, spec=spec)


def record_to_json(record: TweetRecord) -> str:
    return json.dumps(
        {"id": record.id, "user": record.author, "text": record.text, "created_at": fmt_utc(record.created_at)},
        ensure_ascii=False,
    )


def write_corpus(records: Sequence[TweetRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        for record in records:
            f.write(record_to_json(record) + "\n")
    return path


def generate(spec: PlantedSpec, out_dir, corpus_name: str = CORPUS_FILENAME,
             truth_name: str = TRUTH_FILENAME) -> Tuple[Path, Path]:
    """Write the JSONL corpus and truth.json for a spec; returns both paths."""
    synth = plant(spec)
    out_dir = Path(out_dir)
    corpus_path = write_corpus(synth.records, out_dir / corpus_name)
    truth_path = write_json(out_dir / truth_name, synth.truth.to_dict(spec))
    return corpus_path, truth_path


# --- Graph-level benchmarks ---

def planted_partition_graph(sizes: Sequence[int], p_in: float, p_out: float,
                            seed: int = 0) -> Tuple[MentionGraph, Dict[int, int]]:
    """Directed random partition graph (unit weights) and the planted block of each node."""
    g = nx.random_partition_graph(list(sizes), p_in, p_out, seed=seed, directed=True)
    labels = {}
    for block, nodes in enumerate(g.graph["partition"]):
        for uid in nodes:
            labels[uid] = block
    graph = MentionGraph.from_edges(((u, v, 1) for u, v in g.edges()), nodes=g.nodes())
    return graph, labels


def ring_benchmark_graph(ring_sizes: Sequence[int], n_background: int, mentions_per_pair: int = 50,
                         noise_edge_prob: float = 0.1, noise_max_weight: int = 3,
                         seed: int = 0) -> Tuple[MentionGraph, List[Set[int]]]:
    """
    Rings whose members all mention each other mentions_per_pair times, plus
    background users; every ordered pair independently gets a noise edge with
    weight in [1, noise_max_weight] with probability noise_edge_prob.
    """
    rng = np.random.default_rng(seed)
    edges = []
    rings = []
    pos = 0
    for size in ring_sizes:
        members = list(range(pos, pos + size))
        rings.append(set(members))
        edges.extend((u, v, mentions_per_pair) for u in members for v in members if u != v)
        pos += size
    n = pos + n_background
    if noise_edge_prob > 0 and n > 1:
        mask = rng.random((n, n)) < noise_edge_prob
        np.fill_diagonal(mask, False)
        src, dst = np.nonzero(mask)
        weights = rng.integers(1, noise_max_weight + 1, size=src.size)
        edges.extend(zip(src.tolist(), dst.tolist(), weights.tolist()))
    return MentionGraph.from_edges(edges, nodes=range(n)), rings


def configuration_graph(in_degrees: Sequence[int], out_degrees: Sequence[int], seed: int = 0) -> MentionGraph:
    """
    Directed configuration model; parallel stubs collapse into edge weight, so
    in/out strengths equal the drawn sequences exactly.
    """
    multi = nx.directed_configuration_model(list(in_degrees), list(out_degrees), seed=seed)
    return MentionGraph.from_edges(((u, v, 1) for u, v in multi.edges()), nodes=multi.nodes())
