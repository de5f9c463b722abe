"""Citation, coauthor, and venue networks plus PageRank on top of them."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .corpus import CorpusSnapshot


@dataclass
class DirectedGraph:
    """Weighted digraph keyed by opaque node ids.

    Adjacency stores one accumulated weight per (source, target) pair, so
    repeated add_edge calls merge rather than duplicate.
    """

    adjacency: dict[str, dict[str, float]] = field(default_factory=dict)

    def add_node(self, node: str) -> None:
        self.adjacency.setdefault(node, {})

    def add_edge(self, src: str, dst: str, weight: float = 1.0) -> None:
        if weight < 0:
            raise ValueError("edge weight must be non-negative")
        self.add_node(src)
        self.add_node(dst)
        self.adjacency[src][dst] = self.adjacency[src].get(dst, 0.0) + weight

    def nodes(self) -> list[str]:
        return sorted(self.adjacency)

    def edge_weight(self, src: str, dst: str) -> float:
        return self.adjacency.get(src, {}).get(dst, 0.0)

    def edge_count(self) -> int:
        return sum(len(t) for t in self.adjacency.values())

    def to_edge_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source", "target", "weight"])
            for src in sorted(self.adjacency):
                for dst in sorted(self.adjacency[src]):
                    writer.writerow([src, dst, self.adjacency[src][dst]])


@dataclass
class PageRankParams:
    damping: float = 0.85
    tolerance: float = 1e-10
    max_iterations: int = 200

    def __post_init__(self):
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0,1)")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class PageRankResult:
    scores: dict[str, float]
    converged: bool
    iterations: int


def build_citation_graph(snapshot: CorpusSnapshot) -> DirectedGraph:
    """Edge citing -> cited, weight 1, for every in-snapshot reference."""
    g = DirectedGraph()
    for pid in sorted(snapshot.papers):
        g.add_node(pid)
        for ref in snapshot.in_snapshot_references(pid):
            g.add_edge(pid, ref, 1.0)
    return g


def build_coauthor_graph(snapshot: CorpusSnapshot) -> DirectedGraph:
    """Symmetric collaboration graph: +1 per unordered pair per paper."""
    g = DirectedGraph()
    for aid in snapshot.author_papers:
        g.add_node(aid)
    for pid in sorted(snapshot.papers):
        authors = sorted(dict.fromkeys(snapshot.papers[pid].author_ids))
        for i, a in enumerate(authors):
            for b in authors[i + 1:]:
                g.add_edge(a, b, 1.0)
                g.add_edge(b, a, 1.0)
    return g


def build_venue_graph(snapshot: CorpusSnapshot) -> DirectedGraph:
    """Edge v1 -> v2 weighted by citations from v1's papers to v2's papers.

    Self-loops are kept: within-venue citation is meaningful.
    """
    g = DirectedGraph()
    for venue in snapshot.venue_papers:
        g.add_node(venue)
    for pid in sorted(snapshot.papers):
        src_venue = snapshot.papers[pid].venue
        for ref in snapshot.in_snapshot_references(pid):
            g.add_edge(src_venue, snapshot.papers[ref].venue, 1.0)
    return g


def pagerank(graph: DirectedGraph, params: PageRankParams | None = None) -> PageRankResult:
    """Weighted power iteration with uniform teleport.

    Dangling nodes spread their rank mass uniformly. Iteration stops when the
    L1 change drops below tolerance (converged) or at max_iterations.
    """
    if params is None:
        params = PageRankParams()
    nodes = graph.nodes()
    n = len(nodes)
    if n == 0:
        return PageRankResult({}, True, 0)

    index = {node: i for i, node in enumerate(nodes)}
    srcs, dsts, weights = [], [], []
    out_weight = np.zeros(n)
    for src in nodes:
        si = index[src]
        for dst, w in sorted(graph.adjacency[src].items()):
            if w == 0:
                continue
            srcs.append(si)
            dsts.append(index[dst])
            weights.append(w)
            out_weight[si] += w
    srcs = np.asarray(srcs, dtype=np.intp)
    dsts = np.asarray(dsts, dtype=np.intp)
    weights = np.asarray(weights, dtype=float)
    dangling = out_weight == 0
    safe_out = np.where(dangling, 1.0, out_weight)

    d = params.damping
    rank = np.full(n, 1.0 / n)
    converged = False
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        contrib = rank / safe_out
        nxt = np.zeros(n)
        np.add.at(nxt, dsts, weights * contrib[srcs])
        nxt = (1.0 - d) / n + d * nxt + d * rank[dangling].sum() / n
        if np.abs(nxt - rank).sum() < params.tolerance:
            rank = nxt
            converged = True
            break
        rank = nxt
    return PageRankResult({node: float(rank[index[node]]) for node in nodes},
                          converged, iterations)
