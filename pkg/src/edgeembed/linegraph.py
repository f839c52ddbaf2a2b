"""Weighted line graph with the edge-to-node bijection and per-node cliques."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .graph import Graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LineGraph:
    """Line graph of ``graph``; line-node ``e`` is edge ``e`` of the source graph.

    Arcs are directed and stored in CSR form sorted by destination: the arcs
    leaving line-node ``a`` are ``arc_dst[arc_ptr[a]:arc_ptr[a+1]]`` with
    weights ``arc_weight`` and shared endpoint ``arc_via``. Each unordered
    adjacent pair appears as two arcs whose weights generally differ.
    """

    graph: Graph
    arc_ptr: np.ndarray = field(repr=False)
    arc_dst: np.ndarray = field(repr=False)
    arc_weight: np.ndarray = field(repr=False)
    arc_via: np.ndarray = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return self.graph.m

    @property
    def num_arcs(self) -> int:
        return len(self.arc_dst)

    @property
    def num_adjacent_pairs(self) -> int:
        return len(self.arc_dst) // 2

    def endpoints(self, a: int) -> tuple[int, int]:
        return int(self.graph.src[a]), int(self.graph.dst[a])

    def out_arcs(self, a: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.arc_ptr[a], self.arc_ptr[a + 1]
        return self.arc_dst[lo:hi], self.arc_weight[lo:hi]

    def clique(self, u: int) -> np.ndarray:
        """Line-nodes of the edges incident on original node ``u``."""
        return self.graph.incident_edges(u)

    @property
    def cliques(self) -> list[np.ndarray]:
        return [self.clique(u) for u in range(self.graph.n)]

    def adjacent(self, a: int, b: int) -> bool:
        dst, _ = self.out_arcs(a)
        i = int(np.searchsorted(dst, b))
        return i < len(dst) and dst[i] == b

    def arc_weight_between(self, a: int, b: int) -> float:
        dst, w = self.out_arcs(a)
        i = int(np.searchsorted(dst, b))
        if i < len(dst) and dst[i] == b:
            return float(w[i])
        raise KeyError((a, b))


def build_line_graph(g: Graph) -> LineGraph:
    """Transform ``g`` into its weighted line graph.

    The arc from line-node ``(i, j)`` to ``(j, k)`` through the shared node
    ``j`` has weight ``d_i / (d_i + d_j) * w_jk / (d_j - w_ij)`` where ``d``
    is the weighted degree. A degree-1 endpoint offers no continuation.
    """
    if g.m == 0:
        raise ValueError("cannot build a line graph from a graph with no edges")
    isolated = g.isolated_nodes()
    if len(isolated):
        logger.warning("%d isolated node(s) have no line-graph counterpart", len(isolated))

    deg = g.degrees
    srcs, dsts, wts, vias = [], [], [], []
    for j in range(g.n):
        inc = g.incident_edges(j)
        d = len(inc)
        if d < 2:
            continue
        inc_w = g.incident_weights(j)
        nbrs = g.neighbors(j)
        a_idx, b_idx = np.nonzero(~np.eye(d, dtype=bool))
        # other endpoint of the source edge is the neighbor i of j
        d_i = deg[nbrs[a_idx]]
        denom = deg[j] - inc_w[a_idx]
        assert np.all(denom > 0), "zero continuation mass on a simple graph"
        w = d_i / (d_i + deg[j]) * inc_w[b_idx] / denom
        srcs.append(inc[a_idx])
        dsts.append(inc[b_idx])
        wts.append(w)
        vias.append(np.full(len(a_idx), j, dtype=np.int64))
    if srcs:
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        wt = np.concatenate(wts)
        via = np.concatenate(vias)
    else:
        src = dst = via = np.zeros(0, dtype=np.int64)
        wt = np.zeros(0, dtype=np.float64)
    order = np.lexsort((dst, src))
    src, dst, wt, via = src[order], dst[order], wt[order], via[order]
    ptr = np.zeros(g.m + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=g.m), out=ptr[1:])
    for arr in (ptr, dst, wt, via):
        arr.setflags(write=False)
    return LineGraph(g, ptr, dst, wt, via)


def line_node_of(lg: LineGraph, u: int, v: int) -> int:
    """Line-node id of edge ``{u, v}`` in either orientation."""
    try:
        return lg.graph.edge_id(u, v)
    except KeyError:
        raise KeyError(f"({u}, {v}) is not an edge of the graph") from None


def write_line_graph(lg: LineGraph, arcs: IO[str], mapping: IO[str]) -> None:
    """Write ``src<TAB>dst<TAB>weight`` arcs and a ``line_node<TAB>u<TAB>v`` sidecar."""
    g = lg.graph
    for a in range(lg.num_nodes):
        dst, w = lg.out_arcs(a)
        for b, x in zip(dst.tolist(), w.tolist()):
            arcs.write(f"{a}\t{b}\t{x!r}\n")
    for a in range(lg.num_nodes):
        mapping.write(f"{a}\t{g.tokens[g.src[a]]}\t{g.tokens[g.dst[a]]}\n")
