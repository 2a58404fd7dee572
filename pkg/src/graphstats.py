"""
Graph Statistics Module

Degree and strength distributions, CCDF, heavy-tail exponent estimation, and
deterministic SVG rendering of adjacency heatmaps, degree plots and community layouts.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import networkx as nx  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.cm import ScalarMappable  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.colors import Normalize, to_hex  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .config import MentionNetConfig, ConfigError, EmptyDistributionError, RenderError  # noqa: E402
from .exporter import write_csv, format_float  # noqa: E402

KINDS = ("in", "out", "total")
TAIL_METHODS = ("ls", "hill")

# Fixed hash salt and no date stamp: identical input renders to identical bytes.
_SVG_RC = {
    "svg.hashsalt": "mentionnet",
    "svg.fonttype": "none",
    "font.size": 9,
}
_SVG_METADATA = {"Date": None}
_LABEL_TICKS_UP_TO = 40


@dataclass
class DegreeDistribution:
    kind: str
    weighted: bool
    histogram: Dict[int, int] = field(default_factory=dict)
    n_nodes: int = 0

    @property
    def label(self) -> str:
        return f"{self.kind}-{'strength' if self.weighted else 'degree'}"

    def total(self) -> int:
        """Sum of degree x count (handshake checks)."""
        return sum(d * c for d, c in self.histogram.items())

    def max_degree(self) -> int:
        return max(self.histogram) if self.histogram else 0

    def to_rows(self) -> List[Tuple[int, int]]:
        return sorted(self.histogram.items())


@dataclass
class TailEstimate:
    exponent: float
    xmin: int
    n_tail: int
    fit_r2: float
    reliable: bool
    method: str = "ls"

    def to_dict(self) -> dict:
        return {
            "exponent": format_float(self.exponent),
            "xmin": self.xmin,
            "n_tail": self.n_tail,
            "r2": format_float(self.fit_r2),
            "reliable": self.reliable,
            "method": self.method,
        }


def degree_sequence(graph, kind: str = "total", weighted: bool = False) -> DegreeDistribution:
    """Exact degree (or strength) histogram; isolated nodes count at degree 0."""
    if kind not in KINDS:
        raise ConfigError(f"degree kind must be one of {KINDS}, got {kind!r}")
    g = graph.graph
    weight = "weight" if weighted else None
    if kind == "in":
        view = g.in_degree(weight=weight)
    elif kind == "out":
        view = g.out_degree(weight=weight)
    else:
        view = g.degree(weight=weight)
    hist = Counter(int(d) for _, d in view)
    return DegreeDistribution(kind=kind, weighted=weighted, histogram=dict(sorted(hist.items())),
                              n_nodes=g.number_of_nodes())


def distribution_from_degrees(values: Iterable[int], kind: str = "total",
                              weighted: bool = False) -> DegreeDistribution:
    """Histogram of an explicit degree sample."""
    hist = Counter(int(v) for v in values)
    return DegreeDistribution(kind=kind, weighted=weighted, histogram=dict(sorted(hist.items())),
                              n_nodes=sum(hist.values()))


def ccdf(dist: DegreeDistribution) -> List[Tuple[int, float]]:
    """(degree, P(X >= degree)) ascending by degree; first probability is 1."""
    if dist.n_nodes <= 0 or not dist.histogram:
        raise EmptyDistributionError("cannot compute the CCDF of an empty distribution")
    n = dist.n_nodes
    points = []
    remaining = n
    for degree, count in sorted(dist.histogram.items()):
        points.append((degree, remaining / n))
        remaining -= count
    return points


def default_xmin(dist: DegreeDistribution) -> int:
    """10th-percentile degree of the histogram, at least 1."""
    threshold = 0.1 * dist.n_nodes
    cumulative = 0
    for degree, count in sorted(dist.histogram.items()):
        cumulative += count
        if cumulative >= threshold:
            return max(1, degree)
    return max(1, dist.max_degree())


def _r2(y: np.ndarray, y_hat: np.ndarray) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 0.0
    ss_res = float(np.sum((y - y_hat) ** 2))
    return min(1.0, max(0.0, 1.0 - ss_res / ss_tot))


def tail_exponent(dist: DegreeDistribution, xmin: Optional[int] = None, method: str = "ls") -> TailEstimate:
    """
    Power-law tail exponent alpha with CCDF ~ x^(-alpha).

    "ls": least-squares slope of log CCDF against log degree for degrees >= xmin.
    "hill": discrete maximum-likelihood estimate 1 / mean(log(x / (xmin - 0.5))).
    Fewer than MIN_TAIL_POINTS distinct tail degrees marks the estimate unreliable.
    """
    if method not in TAIL_METHODS:
        raise ConfigError(f"tail method must be one of {TAIL_METHODS}, got {method!r}")
    points = ccdf(dist)
    if xmin is None:
        xmin = default_xmin(dist)
    xmin = max(1, int(xmin))
    tail = [(d, p) for d, p in points if d >= xmin]
    n_tail = len(tail)
    reliable = n_tail >= MentionNetConfig.MIN_TAIL_POINTS
    if n_tail < 2:
        logging.info(f"Tail fit skipped: only {n_tail} distinct degree(s) >= {xmin}")
        return TailEstimate(exponent=0.0, xmin=xmin, n_tail=n_tail, fit_r2=0.0, reliable=False, method=method)

    x = np.log(np.array([d for d, _ in tail], dtype=float))
    y = np.log(np.array([p for _, p in tail], dtype=float))

    if method == "ls":
        slope, intercept = np.polyfit(x, y, 1)
        exponent = float(-slope)
        r2 = _r2(y, slope * x + intercept)
    else:
        degrees = np.array([d for d in dist.histogram if d >= xmin], dtype=float)
        counts = np.array([dist.histogram[int(d)] for d in degrees], dtype=float)
        mean_log = float(np.sum(counts * np.log(degrees / (xmin - 0.5))) / counts.sum())
        exponent = 1.0 / mean_log if mean_log > 0 else 0.0
        # best intercept for the fixed slope
        intercept = float(np.mean(y + exponent * x))
        r2 = _r2(y, intercept - exponent * x)

    if not reliable:
        logging.info(f"Tail estimate unreliable: {n_tail} point(s) < {MentionNetConfig.MIN_TAIL_POINTS}")
    return TailEstimate(exponent=exponent, xmin=xmin, n_tail=n_tail, fit_r2=r2, reliable=reliable, method=method)


def write_degree_csv(dist: DegreeDistribution, path) -> None:
    write_csv(path, ["degree", "count"], dist.to_rows())


def write_ccdf_csv(dist: DegreeDistribution, path) -> None:
    write_csv(path, ["degree", "p"], [(d, format_float(p, 12)) for d, p in ccdf(dist)])


def _save_svg(fig, out) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
    return out


def render_matrix(adj, log_scale: bool = True, out="matrix.svg", title: Optional[str] = None) -> Path:
    """
    Heatmap of an adjacency matrix, one rectangle per non-zero cell (SVG group id
    'cell-<row>-<col>'), colored by log1p(weight) or weight, with a color bar.
    """
    n = adj.size
    if n == 0:
        raise RenderError("cannot render a 0x0 matrix")
    values = adj.matrix
    scaled = np.log1p(values) if log_scale else values.astype(float)
    vmax = float(scaled.max())
    norm = Normalize(vmin=0.0, vmax=vmax if vmax > 0 else 1.0)
    cmap = matplotlib.colormaps["viridis"]

    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(7.0, 6.0))
        ax.set_facecolor("white")
        rows, cols = np.nonzero(values)
        for i, j in zip(rows.tolist(), cols.tolist()):
            ax.add_patch(Rectangle((j, i), 1, 1, facecolor=cmap(norm(scaled[i, j])),
                                   edgecolor="none", gid=f"cell-{i}-{j}"))
        ax.set_xlim(0, n)
        ax.set_ylim(n, 0)
        ax.set_aspect("equal")
        if n <= _LABEL_TICKS_UP_TO:
            ticks = [k + 0.5 for k in range(n)]
            ax.set_xticks(ticks)
            ax.set_xticklabels(adj.handles, rotation=90)
            ax.set_yticks(ticks)
            ax.set_yticklabels(adj.handles)
        ax.set_xlabel("mentioned user")
        ax.set_ylabel("author")
        if title:
            ax.set_title(title)
        colorbar = fig.colorbar(ScalarMappable(norm=norm, cmap=cmap), ax=ax)
        colorbar.set_label("log(1 + weight)" if log_scale else "weight")
        fig.tight_layout()
        return _save_svg(fig, out)


def render_degree_plot(dist: DegreeDistribution, log_log: bool = True, out="degree.svg",
                       tail: Optional[TailEstimate] = None, title: Optional[str] = None) -> Path:
    """
    CCDF scatter (SVG group id 'ccdf'); with a tail estimate, the fitted power law
    is overlaid ('tail-fit') and its exponent annotated ('tail-annotation').
    """
    if dist.n_nodes <= 0 or not dist.histogram:
        raise RenderError("cannot plot an empty distribution")
    points = ccdf(dist)
    if log_log:
        points = [(d, p) for d, p in points if d > 0]
        if not points:
            raise RenderError("no positive degrees to plot on log-log axes")
    xs = [d for d, _ in points]
    ys = [p for _, p in points]

    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(5.0, 4.0))
        ax.plot(xs, ys, "o", markersize=4, color="#1F6AA5", gid="ccdf")
        if log_log:
            ax.set_xscale("log")
            ax.set_yscale("log")
        if tail is not None and tail.n_tail >= 2:
            p_at_xmin = next((p for d, p in points if d >= tail.xmin), None)
            if p_at_xmin is not None:
                fit_x = np.array([x for x in xs if x >= tail.xmin], dtype=float)
                fit_y = p_at_xmin * (fit_x / fit_x[0]) ** (-tail.exponent)
                ax.plot(fit_x, fit_y, "-", color="#C62828", linewidth=1.0, gid="tail-fit")
            ax.text(0.97, 0.95, f"α = {tail.exponent:.2f}", transform=ax.transAxes,
                    ha="right", va="top", gid="tail-annotation")
        ax.set_xlabel(dist.label)
        ax.set_ylabel("P(X ≥ x)")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save_svg(fig, out)


def render_communities(graph, assignment, out="communities.svg", seed: int = 0,
                       title: Optional[str] = None) -> Path:
    """
    Seeded spring layout of the undirected mention graph with nodes colored by
    community (SVG group id 'community-<id>') over the edges ('edges').
    """
    if graph.number_of_nodes() == 0:
        raise RenderError("cannot draw communities of an empty graph")
    und = nx.Graph()
    und.add_nodes_from(sorted(graph.nodes()))
    und.add_edges_from((u, v) for u, v, _ in graph.edges() if u != v)
    pos = nx.spring_layout(und, seed=seed)
    cmap = matplotlib.colormaps["tab20"]

    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(7.0, 7.0))
        segments = [(pos[u], pos[v]) for u, v in und.edges()]
        if segments:
            ax.add_collection(LineCollection(segments, colors="#B0B0B0", linewidths=0.4, zorder=1, gid="edges"))
        for cid, members in assignment.communities().items():
            nodelist = [uid for uid in members if uid in pos]
            if not nodelist:
                continue
            drawn = nx.draw_networkx_nodes(und, pos, nodelist=nodelist, node_size=14,
                                           node_color=to_hex(cmap(cid % cmap.N)), linewidths=0, ax=ax)
            drawn.set_gid(f"community-{cid}")
            drawn.set_zorder(2)
        ax.autoscale_view()
        ax.set_aspect("equal")
        ax.set_axis_off()
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save_svg(fig, out)
