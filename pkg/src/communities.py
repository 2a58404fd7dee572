"""
Communities Module

Louvain community detection on the symmetrized mention graph, per-community
summaries, and detection of tagging rings: groups of users persistently mentioned
by a largely shared set of sources, the line patterns visible in adjacency matrices.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Set, Tuple

import networkx as nx
from networkx.utils import UnionFind

from .config import MentionNetConfig, ConfigError, EmptyGraphError, GraphModeError
from .exporter import write_csv, format_float

# Ring detector defaults
DEFAULT_RING_SIZE = 5
DEFAULT_RING_JACCARD = 0.5
DEFAULT_RING_MIN_WEIGHT = 5
DEFAULT_RING_MIN_SOURCES = 2
DEFAULT_RING_MIN_DENSITY = 0.5

_LOUVAIN_THRESHOLD = 1e-7


@dataclass
class CommunityAssignment:
    membership: Dict[int, int]
    modularity: float
    seed: int
    resolution: float = 1.0
    levels: List[float] = field(default_factory=list)

    @property
    def n_communities(self) -> int:
        return len(set(self.membership.values()))

    def communities(self) -> Dict[int, List[int]]:
        groups: Dict[int, List[int]] = {}
        for uid in sorted(self.membership):
            groups.setdefault(self.membership[uid], []).append(uid)
        return dict(sorted(groups.items()))


@dataclass
class TagRing:
    targets: Tuple[int, ...]
    sources: Tuple[int, ...]
    density: float
    total_weight: int

    def to_dict(self, graph=None) -> dict:
        name = graph.handle if graph is not None else str
        return {
            "targets": [name(u) for u in self.targets],
            "sources": [name(u) for u in self.sources],
            "density": format_float(self.density),
            "total_weight": self.total_weight,
        }


def symmetrize(graph) -> nx.Graph:
    """Undirected view for modularity: reciprocal edge weights are summed."""
    und = nx.Graph()
    und.add_nodes_from(graph.nodes())
    for u, v, w in graph.edges():
        if und.has_edge(u, v):
            und[u][v]["weight"] += w
        else:
            und.add_edge(u, v, weight=w)
    return und


def modularity(graph, membership: Dict[int, int], resolution: float = 1.0) -> float:
    """Weighted modularity of a partition of the symmetrized graph."""
    und = graph if isinstance(graph, nx.Graph) and not graph.is_directed() else symmetrize(graph)
    if und.number_of_edges() == 0:
        return 0.0
    groups: Dict[int, Set[int]] = {}
    for uid, cid in membership.items():
        groups.setdefault(cid, set()).add(uid)
    return float(nx.community.modularity(und, list(groups.values()), weight="weight", resolution=resolution))


def _dense_labels(partition) -> Dict[int, int]:
    """Community ids 0..k-1 ordered by each community's smallest node id."""
    ordered = sorted((sorted(block) for block in partition), key=lambda block: block[0])
    return {uid: cid for cid, block in enumerate(ordered) for uid in block}


def find_communities(graph, seed: int = 0, resolution: float = 1.0) -> CommunityAssignment:
    """
    Louvain modularity maximization with seeded node visiting order.

    Raises:
        EmptyGraphError: the graph has no nodes
    """
    if graph.number_of_nodes() == 0:
        raise EmptyGraphError("community detection needs a non-empty graph")
    if resolution <= 0:
        raise ConfigError(f"resolution must be > 0, got {resolution}")
    und = symmetrize(graph)
    if und.number_of_edges() == 0:
        membership = _dense_labels([{uid} for uid in und.nodes])
        return CommunityAssignment(membership=membership, modularity=0.0, seed=seed,
                                   resolution=resolution, levels=[0.0])

    levels = []
    partition = None
    for partition in nx.community.louvain_partitions(
        und, weight="weight", resolution=resolution, threshold=_LOUVAIN_THRESHOLD, seed=seed
    ):
        levels.append(float(nx.community.modularity(und, partition, weight="weight", resolution=resolution)))
    membership = _dense_labels(partition)
    assignment = CommunityAssignment(
        membership=membership,
        modularity=levels[-1],
        seed=seed,
        resolution=resolution,
        levels=levels,
    )
    logging.info(
        f"Louvain: {assignment.n_communities} communities, modularity {assignment.modularity:.4f} "
        f"after {len(levels)} pass(es)"
    )
    return assignment


def community_summary(assignment: CommunityAssignment, graph, top_k: Optional[int] = None) -> dict:
    """
    Per community: size, top members by strength, internal weight share; plus the
    headline community count.
    """
    top_k = MentionNetConfig.TOP_MEMBERS if top_k is None else top_k
    und = symmetrize(graph)
    strength = dict(und.degree(weight="weight"))
    membership = assignment.membership
    internal: Dict[int, int] = {}
    incident: Dict[int, int] = {}
    for u, v, w in und.edges(data="weight"):
        cu, cv = membership[u], membership[v]
        incident[cu] = incident.get(cu, 0) + w
        if cu == cv:
            internal[cu] = internal.get(cu, 0) + w
        else:
            incident[cv] = incident.get(cv, 0) + w

    rows = []
    for cid, members in assignment.communities().items():
        ranked = sorted(members, key=lambda uid: (-strength.get(uid, 0), graph.handle(uid)))
        total = incident.get(cid, 0)
        rows.append({
            "community": cid,
            "size": len(members),
            "top_members": [graph.handle(uid) for uid in ranked[:top_k]],
            "internal_weight": internal.get(cid, 0),
            "internal_weight_share": format_float(internal.get(cid, 0) / total) if total else 0.0,
        })
    return {
        "n_communities": assignment.n_communities,
        "n_nodes": len(membership),
        "modularity": format_float(assignment.modularity),
        "levels": [format_float(m) for m in assignment.levels],
        "seed": assignment.seed,
        "resolution": assignment.resolution,
        "communities": rows,
    }


def _jaccard(a: Set[int], b: Set[int]) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def detect_tag_rings(graph, min_ring_size: int = DEFAULT_RING_SIZE, min_weight: int = DEFAULT_RING_MIN_WEIGHT,
                     min_jaccard: float = DEFAULT_RING_JACCARD, min_sources: int = DEFAULT_RING_MIN_SOURCES,
                     min_density: float = DEFAULT_RING_MIN_DENSITY) -> List[TagRing]:
    """
    Cluster mention targets whose persistent source sets overlap.

    Steps: keep edges with weight >= min_weight; take each target's in-neighbor set
    (targets with fewer than min_sources sources are not candidates); single-linkage
    merge of targets with Jaccard >= min_jaccard; report clusters of at least
    min_ring_size targets whose source->target edge density reaches min_density.
    """
    if not graph.weighted:
        raise GraphModeError("ring detection needs a weighted graph")
    if min_ring_size < 1 or min_sources < 1:
        raise ConfigError("ring size and source count must be >= 1")
    if not 0.0 < min_jaccard <= 1.0:
        raise ConfigError(f"min_jaccard must be in (0, 1], got {min_jaccard}")

    in_sets: Dict[int, Set[int]] = {}
    weights: Dict[Tuple[int, int], int] = {}
    for u, v, w in graph.edges():
        if w >= min_weight:
            in_sets.setdefault(v, set()).add(u)
            weights[(u, v)] = w
    candidates = sorted(t for t, s in in_sets.items() if len(s) >= min_sources)
    if not candidates:
        return []

    by_source: Dict[int, List[int]] = {}
    for t in candidates:
        for s in in_sets[t]:
            by_source.setdefault(s, []).append(t)

    clusters = UnionFind(candidates)
    checked = set()
    for s in sorted(by_source):
        for a, b in combinations(by_source[s], 2):
            if (a, b) in checked:
                continue
            checked.add((a, b))
            if _jaccard(in_sets[a], in_sets[b]) >= min_jaccard:
                clusters.union(a, b)

    rings = []
    for group in clusters.to_sets():
        if len(group) < min_ring_size:
            continue
        targets = sorted(group)
        sources = sorted(set().union(*(in_sets[t] for t in targets)))
        ring_edges = [(s, t) for s in sources for t in targets if (s, t) in weights]
        possible = len(sources) * len(targets) - len(set(sources) & set(targets))
        density = len(ring_edges) / possible if possible else 0.0
        if density < min_density:
            continue
        rings.append(TagRing(
            targets=tuple(targets),
            sources=tuple(sources),
            density=density,
            total_weight=sum(weights[e] for e in ring_edges),
        ))
    rings.sort(key=lambda r: (-r.total_weight, r.targets[0]))
    logging.info(f"Detected {len(rings)} tagging ring(s)")
    return rings


def write_communities_csv(assignment: CommunityAssignment, graph, path) -> None:
    rows = sorted((graph.handle(uid), cid) for uid, cid in assignment.membership.items())
    write_csv(path, ["handle", "community"], rows)


def rings_to_json(rings: List[TagRing], graph, thresholds: dict) -> dict:
    return {
        "n_rings": len(rings),
        "thresholds": thresholds,
        "rings": [r.to_dict(graph) for r in rings],
    }
