"""Undirected weighted simple graphs, edge-list I/O and hop-count centralities."""

from __future__ import annotations

import io
import logging
from collections import deque
from dataclasses import dataclass, field
from os import PathLike
from typing import IO, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised for malformed edge-list or label input; carries the line number."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected weighted simple graph with dense node ids ``0..n-1``.

    Edges are stored once, as ``(src[e], dst[e], weight[e])`` with
    ``src[e] < dst[e]``. Adjacency is kept in CSR form: the neighbors of
    ``u`` are ``indices[indptr[u]:indptr[u+1]]`` (sorted ascending) with the
    matching weights in ``adj_weight`` and edge ids in ``adj_edge``.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    tokens: tuple[str, ...]
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    adj_weight: np.ndarray = field(repr=False)
    adj_edge: np.ndarray = field(repr=False)
    degrees: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int] | tuple[int, int, float]],
        tokens: Sequence[str] | None = None,
    ) -> "Graph":
        """Build a graph from integer edges; duplicate orientations are merged.

        The first occurrence of an unordered pair fixes its edge id and weight.
        """
        seen: dict[tuple[int, int], int] = {}
        src: list[int] = []
        dst: list[int] = []
        wts: list[float] = []
        for item in edges:
            u, v = int(item[0]), int(item[1])
            w = float(item[2]) if len(item) > 2 else 1.0
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (w > 0 and np.isfinite(w)):
                raise ValueError(f"edge ({u}, {v}) has non-positive weight {w}")
            key = (min(u, v), max(u, v))
            if key in seen:
                continue
            seen[key] = len(src)
            src.append(key[0])
            dst.append(key[1])
            wts.append(w)
        if tokens is None:
            tokens = [str(i) for i in range(n)]
        if len(tokens) != n:
            raise ValueError("token list length must equal n")
        return cls._assemble(
            n,
            np.asarray(src, dtype=np.int64),
            np.asarray(dst, dtype=np.int64),
            np.asarray(wts, dtype=np.float64),
            tuple(tokens),
        )

    @classmethod
    def _assemble(cls, n, src, dst, weight, tokens) -> "Graph":
        m = len(src)
        eids = np.arange(m, dtype=np.int64)
        heads = np.concatenate([src, dst])
        tails = np.concatenate([dst, src])
        ws = np.concatenate([weight, weight])
        es = np.concatenate([eids, eids])
        order = np.lexsort((tails, heads))
        heads, tails, ws, es = heads[order], tails[order], ws[order], es[order]
        counts = np.bincount(heads, minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        degrees = np.bincount(heads, weights=ws, minlength=n).astype(np.float64)
        g = cls(n, src, dst, weight, tokens, indptr, tails, ws, es, degrees)
        for arr in (src, dst, weight, indptr, tails, ws, es, degrees):
            arr.setflags(write=False)
        return g

    @property
    def m(self) -> int:
        return len(self.src)

    def neighbors(self, u: int) -> np.ndarray:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        return self.indices[lo:hi]

    def incident_edges(self, u: int) -> np.ndarray:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        return self.adj_edge[lo:hi]

    def incident_weights(self, u: int) -> np.ndarray:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        return self.adj_weight[lo:hi]

    def edge_count(self, u: int) -> int:
        """Number of incident edges (unweighted degree)."""
        return int(self.indptr[u + 1] - self.indptr[u])

    def edge_id(self, u: int, v: int) -> int:
        """Edge id of ``{u, v}``; raises ``KeyError`` if the pair is not an edge."""
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise KeyError((u, v))
        nbrs = self.neighbors(u)
        i = int(np.searchsorted(nbrs, v))
        if i < len(nbrs) and nbrs[i] == v:
            return int(self.incident_edges(u)[i])
        raise KeyError((u, v))

    def isolated_nodes(self) -> np.ndarray:
        return np.flatnonzero(np.diff(self.indptr) == 0)

    def token_to_id(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens)}


def _open_text(source) -> tuple[IO[str], bool, str]:
    if isinstance(source, (str, PathLike)):
        return open(source, "r", encoding="utf-8"), True, str(source)
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8")), True, "<bytes>"
    if isinstance(source, io.BufferedIOBase) or isinstance(source, io.RawIOBase):
        return io.TextIOWrapper(source, encoding="utf-8"), False, "<stream>"
    name = getattr(source, "name", "<stream>")
    return source, False, str(name)


def load_edge_list(source, weighted: bool | None = None) -> Graph:
    """Parse a whitespace-separated edge list into a :class:`Graph`.

    Each non-comment line is ``u v`` or ``u v w``. Node tokens are arbitrary
    strings, remapped to dense ids in order of first appearance. With
    ``weighted=False`` a third column is ignored; with ``weighted=True`` it is
    required; ``None`` accepts both.

    Raises
    ------
    GraphFormatError
        On a self-loop, a non-positive or unparsable weight, a short line, or
        an input with no edges.
    """
    fh, close, name = _open_text(source)
    ids: dict[str, int] = {}
    tokens: list[str] = []
    edges: dict[tuple[int, int], tuple[int, float]] = {}
    order: list[tuple[int, int]] = []
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphFormatError("expected 'u v [w]'", lineno, name)
            a, b = parts[0], parts[1]
            if a == b:
                raise GraphFormatError(f"self-loop on node {a!r}", lineno, name)
            w = 1.0
            if weighted is True and len(parts) < 3:
                raise GraphFormatError("missing weight column", lineno, name)
            if len(parts) >= 3 and weighted is not False:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise GraphFormatError(f"bad weight {parts[2]!r}", lineno, name) from None
                if not (w > 0 and np.isfinite(w)):
                    raise GraphFormatError(f"non-positive weight {parts[2]}", lineno, name)
            for tok in (a, b):
                if tok not in ids:
                    ids[tok] = len(tokens)
                    tokens.append(tok)
            u, v = ids[a], ids[b]
            key = (min(u, v), max(u, v))
            if key in edges:
                if edges[key][1] != w:
                    logger.warning("%s:%d: duplicate edge %s-%s with different weight ignored",
                                   name, lineno, a, b)
                continue
            edges[key] = (len(order), w)
            order.append(key)
    finally:
        if close:
            fh.close()
    if not order:
        raise GraphFormatError("edge list is empty", None, name)
    src = np.array([k[0] for k in order], dtype=np.int64)
    dst = np.array([k[1] for k in order], dtype=np.int64)
    wts = np.array([edges[k][1] for k in order], dtype=np.float64)
    return Graph._assemble(len(tokens), src, dst, wts, tuple(tokens))


def write_edge_list(g: Graph, fh: IO[str], weighted: bool = True) -> None:
    """Write ``u<TAB>v[<TAB>w]`` lines using the original node tokens."""
    for e in range(g.m):
        u, v = g.tokens[g.src[e]], g.tokens[g.dst[e]]
        if weighted:
            fh.write(f"{u}\t{v}\t{float(g.weight[e])!r}\n")
        else:
            fh.write(f"{u}\t{v}\n")


def write_id_mapping(g: Graph, fh: IO[str]) -> None:
    for i, tok in enumerate(g.tokens):
        fh.write(f"{tok}\t{i}\n")


def load_node_labels(source, g: Graph) -> np.ndarray:
    """Read ``u<TAB>label`` lines into a per-node array of contiguous ids.

    Label strings are mapped to ``0..k-1`` in sorted order (numerically when
    all labels are integers). Nodes without a line get ``-1``.
    """
    fh, close, name = _open_text(source)
    ids = g.token_to_id()
    raw_labels: dict[int, str] = {}
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphFormatError("expected 'u label'", lineno, name)
            if parts[0] not in ids:
                raise GraphFormatError(f"unknown node {parts[0]!r}", lineno, name)
            raw_labels[ids[parts[0]]] = parts[1]
    finally:
        if close:
            fh.close()
    distinct = set(raw_labels.values())
    try:
        ordered = sorted(distinct, key=int)
    except ValueError:
        ordered = sorted(distinct)
    code = {lab: i for i, lab in enumerate(ordered)}
    labels = np.full(g.n, -1, dtype=np.int64)
    for u, lab in raw_labels.items():
        labels[u] = code[lab]
    return labels


def degree(g: Graph, u: int) -> float:
    """Weighted degree of ``u``: the sum of its incident edge weights."""
    if not 0 <= u < g.n:
        raise IndexError(f"node id {u} out of range [0, {g.n})")
    return float(g.degrees[u])


def _bfs(g: Graph, s: int) -> tuple[list[int], np.ndarray, np.ndarray, list[list[int]]]:
    dist = np.full(g.n, -1, dtype=np.int64)
    sigma = np.zeros(g.n, dtype=np.float64)
    preds: list[list[int]] = [[] for _ in range(g.n)]
    dist[s] = 0
    sigma[s] = 1.0
    order = []
    queue = deque([s])
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in g.neighbors(v):
            w = int(w)
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] += sigma[v]
                preds[w].append(v)
    return order, dist, sigma, preds


def closeness_centrality(g: Graph) -> np.ndarray:
    """Hop-count closeness, ``(reachable - 1) / sum(dist)`` within each component.

    Isolated nodes get 0. Edge weights are ignored.
    """
    out = np.zeros(g.n, dtype=np.float64)
    for s in range(g.n):
        _, dist, _, _ = _bfs(g, s)
        reach = dist[dist > 0]
        if len(reach):
            out[s] = len(reach) / reach.sum()
    return out


def betweenness_centrality(g: Graph) -> np.ndarray:
    """Unnormalized hop-count betweenness (Brandes accumulation).

    Every unordered source/target pair is counted once, so the middle node of
    a 3-path scores 1.
    """
    bc = np.zeros(g.n, dtype=np.float64)
    for s in range(g.n):
        order, _, sigma, preds = _bfs(g, s)
        delta = np.zeros(g.n, dtype=np.float64)
        for w in reversed(order):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    return bc / 2.0
