"""
Network Construction Module

Builds the directed mention graph from the top-N1 posters (edge sources) to the
top-N2 mention targets, with weight = number of mention occurrences. Also
provides the unweighted mode, the strict weight-threshold filter and dense
adjacency matrices for rendering.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np

from .config import MentionNetConfig, ConfigError, CorpusError, GraphModeError, MatrixTooLargeError
from .exporter import write_csv
from .mention_miner import MiningResult, UserTable, top_n

ROLE_SOURCE = "source"
ROLE_TARGET = "target"
ROLE_BOTH = "both"

N2_RANKS = ("mentions", "posts")
ORDERINGS = ("by_id", "by_out_strength", "by_community")


@dataclass(frozen=True)
class BuildConfig:
    n1: int = 2000
    n2: int = 200
    weighted: bool = True
    include_self_loops: bool = False
    n2_rank: str = "mentions"

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ConfigError(f"n1 and n2 must be >= 1 (got n1={self.n1}, n2={self.n2})")
        if self.n2_rank not in N2_RANKS:
            raise ConfigError(f"n2_rank must be one of {N2_RANKS}, got {self.n2_rank!r}")


class MentionGraph:
    """
    Directed mention graph over user ids.

    Wraps a networkx.DiGraph with node attributes 'handle' and 'role' and an integer
    edge attribute 'weight' (>= 1). Treated as immutable once built; filter_edges
    returns a new graph.
    """

    def __init__(self, graph: nx.DiGraph, table: Optional[UserTable] = None, weighted: bool = True):
        self.graph = graph
        self.table = table
        self.weighted = weighted

    @classmethod
    def from_edges(cls, edges: Iterable[Tuple[int, int, int]], nodes: Optional[Iterable[int]] = None,
                   handles: Optional[Dict[int, str]] = None, weighted: bool = True) -> "MentionGraph":
        """Build from (src, dst, weight) triples; repeated pairs accumulate weight."""
        weights: Dict[Tuple[int, int], int] = {}
        for u, v, w in edges:
            weights[(u, v)] = weights.get((u, v), 0) + int(w)
        node_set = set(nodes or ())
        for u, v in weights:
            node_set.add(u)
            node_set.add(v)
        g = nx.DiGraph()
        for uid in sorted(node_set):
            g.add_node(uid, handle=(handles or {}).get(uid, str(uid)), role=ROLE_BOTH)
        for (u, v) in sorted(weights):
            g.add_edge(u, v, weight=weights[(u, v)] if weighted else 1)
        return cls(g, table=None, weighted=weighted)

    def handle(self, uid: int) -> str:
        return self.graph.nodes[uid].get("handle", str(uid))

    def nodes(self) -> List[int]:
        return sorted(self.graph.nodes)

    def edges(self) -> List[Tuple[int, int, int]]:
        return sorted((u, v, w) for u, v, w in self.graph.edges(data="weight"))

    def number_of_nodes(self) -> int:
        return self.graph.number_of_nodes()

    def number_of_edges(self) -> int:
        return self.graph.number_of_edges()

    def total_weight(self) -> int:
        return int(sum(w for _, _, w in self.graph.edges(data="weight")))

    def out_strength(self, uid: int) -> int:
        return int(self.graph.out_degree(uid, weight="weight"))

    def in_strength(self, uid: int) -> int:
        return int(self.graph.in_degree(uid, weight="weight"))

    def role_counts(self) -> Dict[str, int]:
        counts = {ROLE_SOURCE: 0, ROLE_TARGET: 0, ROLE_BOTH: 0}
        for _, role in self.graph.nodes(data="role"):
            counts[role] = counts.get(role, 0) + 1
        return counts

    def __len__(self):
        return self.graph.number_of_nodes()


def _role(is_source: bool, is_target: bool) -> str:
    if is_source and is_target:
        return ROLE_BOTH
    return ROLE_SOURCE if is_source else ROLE_TARGET


def select_endpoints(mined: MiningResult, config: BuildConfig) -> Tuple[List[int], List[int]]:
    """Top-N1 posters and top-N2 targets (by mentions or by posts)."""
    table = mined.table
    posts = mined.post_counts()
    target_freq = mined.mention_counts() if config.n2_rank == "mentions" else posts
    if config.n1 > len(posts):
        logging.info(f"N1={config.n1} exceeds the {len(posts)} posting user(s); using all of them")
    if config.n2 > len(target_freq):
        logging.info(f"N2={config.n2} exceeds the {len(target_freq)} ranked target(s); using all of them")
    sources = top_n(posts, config.n1, table) if posts else []
    targets = top_n(target_freq, config.n2, table) if target_freq else []
    return sources, targets


def build_graph(mined: MiningResult, config: BuildConfig) -> MentionGraph:
    """
    Edge (u, v, w) exists iff u is a top-N1 poster, v a top-N2 target and u mentioned v
    at least once; w counts the mention occurrences (1 in unweighted mode).
    Nodes are the union of both selected sets, isolated ones included.
    """
    table = mined.table
    g = nx.DiGraph()
    if mined.n_tweets == 0:
        logging.info("Empty corpus: returning an empty graph")
        return MentionGraph(g, table, config.weighted)

    sources, targets = select_endpoints(mined, config)
    n = len(table)
    src_mask = np.zeros(n, dtype=bool)
    tgt_mask = np.zeros(n, dtype=bool)
    src_mask[sources] = True
    tgt_mask[targets] = True

    for uid in sorted(set(sources) | set(targets)):
        g.add_node(uid, handle=table.handle_of(uid), role=_role(src_mask[uid], tgt_mask[uid]))

    if mined.n_events:
        sel = src_mask[mined.authors] & tgt_mask[mined.targets]
        if not config.include_self_loops:
            sel &= mined.authors != mined.targets
        keys = mined.authors[sel] * n + mined.targets[sel]
        uniq, counts = np.unique(keys, return_counts=True)
        for key, count in zip(uniq.tolist(), counts.tolist()):
            u, v = divmod(key, n)
            g.add_edge(u, v, weight=count if config.weighted else 1)

    graph = MentionGraph(g, table, config.weighted)
    logging.info(
        f"Built {'weighted' if config.weighted else 'unweighted'} graph: "
        f"{graph.number_of_nodes()} node(s), {graph.number_of_edges()} edge(s), "
        f"total weight {graph.total_weight()}"
    )
    return graph


def filter_edges(graph: MentionGraph, min_weight: int) -> MentionGraph:
    """
    Keep edges with weight strictly greater than min_weight. Every node without a
    remaining edge is dropped, including nodes that were isolated before filtering.
    """
    if not graph.weighted:
        raise GraphModeError("weight filtering needs a graph built in weighted mode")
    if min_weight < 0:
        raise ConfigError(f"min_weight must be >= 0, got {min_weight}")
    h = graph.graph.copy()
    h.remove_edges_from([(u, v) for u, v, w in h.edges(data="weight") if w <= min_weight])
    h.remove_nodes_from([uid for uid in sorted(h.nodes) if h.degree(uid) == 0])
    logging.info(
        f"Filtered weight > {min_weight}: {h.number_of_edges()} of {graph.number_of_edges()} edge(s) kept"
    )
    return MentionGraph(h, graph.table, weighted=True)


@dataclass
class AdjacencyMatrix:
    matrix: np.ndarray
    order: List[int]
    index: Dict[int, int]
    handles: List[str]

    @property
    def size(self) -> int:
        return len(self.order)


def node_order(graph: MentionGraph, ordering: str = "by_id", assignment=None) -> List[int]:
    if ordering not in ORDERINGS:
        raise ConfigError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")
    nodes = graph.nodes()
    if ordering == "by_id":
        return nodes
    strength = {uid: graph.out_strength(uid) for uid in nodes}
    if ordering == "by_out_strength":
        return sorted(nodes, key=lambda uid: (-strength[uid], uid))
    if assignment is None:
        raise ConfigError("ordering 'by_community' needs a community assignment")
    membership = assignment.membership
    missing = len(membership)
    return sorted(nodes, key=lambda uid: (membership.get(uid, missing), -strength[uid], uid))


def to_adjacency(graph: MentionGraph, ordering: str = "by_id", assignment=None,
                 cap: Optional[int] = None) -> AdjacencyMatrix:
    """
    Dense weight matrix M[i][j] = weight(order[i] -> order[j]) or 0.

    Raises:
        MatrixTooLargeError: node count above the cap; filter the graph first
    """
    cap = MentionNetConfig.MATRIX_NODE_CAP if cap is None else cap
    n = graph.number_of_nodes()
    if n > cap:
        raise MatrixTooLargeError(
            f"{n} nodes exceed the dense matrix cap of {cap}; filter the graph (min weight) first"
        )
    order = node_order(graph, ordering, assignment)
    index = {uid: i for i, uid in enumerate(order)}
    matrix = np.zeros((n, n), dtype=np.int64)
    for u, v, w in graph.graph.edges(data="weight"):
        matrix[index[u], index[v]] = w
    return AdjacencyMatrix(matrix=matrix, order=order, index=index,
                           handles=[graph.handle(uid) for uid in order])


def write_edges_csv(graph: MentionGraph, path) -> None:
    rows = sorted(
        ((graph.handle(u), graph.handle(v), w) for u, v, w in graph.graph.edges(data="weight")),
        key=lambda r: (r[0], r[1]),
    )
    write_csv(path, ["src", "dst", "weight"], rows)


def write_adjacency_csv(adj: AdjacencyMatrix, path) -> None:
    rows = ([handle] + row for handle, row in zip(adj.handles, adj.matrix.tolist()))
    write_csv(path, [""] + adj.handles, rows)


def read_edges_csv(path, weighted: bool = True) -> MentionGraph:
    """
    Load an edges.csv (src,dst,weight by handle) as a MentionGraph. Ids follow the
    sorted handle order, so the same file always yields the same graph.
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise CorpusError(f"cannot read {path}: {e}") from e
    if not rows or [c.strip().lower() for c in rows[0][:3]] != ["src", "dst", "weight"]:
        raise CorpusError(f"{path.name}: expected a 'src,dst,weight' header")
    triples = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            src, dst, weight = row[0].strip().lower(), row[1].strip().lower(), int(row[2])
        except (IndexError, ValueError) as e:
            raise CorpusError(f"{path.name}: line {line_no}: bad edge row {row!r}") from e
        if weight < 1:
            raise CorpusError(f"{path.name}: line {line_no}: weight must be >= 1")
        triples.append((src, dst, weight))
    names = sorted({h for s, d, _ in triples for h in (s, d)})
    ids = {h: i for i, h in enumerate(names)}
    return MentionGraph.from_edges(
        ((ids[s], ids[d], w) for s, d, w in triples),
        handles={i: h for h, i in ids.items()},
        weighted=weighted,
    )
