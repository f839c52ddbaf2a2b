"""Second-order (p, q)-biased random walks over a weighted line graph.

Sampling uses alias tables. Second-order tables are precomputed per
directed arc unless the line graph exceeds ``WalkConfig.max_precomputed_arcs``
entries, in which case the walker falls back to rejection sampling against
the first-order tables; both give the same distribution.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterator

import numba
import numpy as np

from .linegraph import LineGraph


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80
    p: float = 1.0
    q: float = 1.0
    window: int = 10
    seed: int = 0
    workers: int = 1
    max_precomputed_arcs: int = 50_000_000

    def __post_init__(self):
        for name in ("walks_per_node", "walk_length", "window", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")
        if self.walk_length > 1 and self.window > self.walk_length - 1:
            raise ValueError("window must not exceed walk_length - 1")


@numba.njit(cache=True)
def _alias_build(probs, prob_out, alias_out):
    """Vose alias construction for one normalized distribution (in place)."""
    k = len(probs)
    small = np.empty(k, dtype=np.int64)
    large = np.empty(k, dtype=np.int64)
    ns = 0
    nl = 0
    scaled = probs * k
    for i in range(k):
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        nl -= 1
        g = large[nl]
        prob_out[s] = scaled[s]
        alias_out[s] = g
        scaled[g] = scaled[g] + scaled[s] - 1.0
        if scaled[g] < 1.0:
            small[ns] = g
            ns += 1
        else:
            large[nl] = g
            nl += 1
    while nl > 0:
        nl -= 1
        prob_out[large[nl]] = 1.0
        alias_out[large[nl]] = large[nl]
    while ns > 0:
        ns -= 1
        prob_out[small[ns]] = 1.0
        alias_out[small[ns]] = small[ns]


def alias_setup(weights) -> tuple[np.ndarray, np.ndarray]:
    """Alias table ``(prob, alias)`` for a nonnegative weight vector."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or len(w) == 0 or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("weights must be a nonempty nonnegative vector with positive sum")
    prob = np.empty(len(w))
    alias = np.empty(len(w), dtype=np.int64)
    _alias_build(w / w.sum(), prob, alias)
    return prob, alias


def alias_probabilities(prob: np.ndarray, alias: np.ndarray) -> np.ndarray:
    """Per-outcome probabilities encoded by an alias table."""
    k = len(prob)
    out = prob / k
    np.add.at(out, alias, (1.0 - prob) / k)
    return out


@numba.njit(cache=True)
def _alias_draw(prob, alias, lo, k):
    # one uniform: integer part picks the column, fractional part the coin
    x = np.random.random() * k
    i = int(x)
    if i >= k:
        i = k - 1
    if x - i < prob[lo + i]:
        return i
    return alias[lo + i]


def alias_draw(prob: np.ndarray, alias: np.ndarray, size: int, seed: int) -> np.ndarray:
    """``size`` draws from an alias table (used for sampler diagnostics)."""
    return _alias_draw_many(prob, alias, size, seed)


@numba.njit(cache=True)
def _alias_draw_many(prob, alias, size, seed):
    np.random.seed(seed)
    out = np.empty(size, dtype=np.int64)
    k = len(prob)
    for t in range(size):
        out[t] = _alias_draw(prob, alias, 0, k)
    return out


@numba.njit(cache=True)
def _first_order_tables(arc_ptr, arc_weight, prob, alias):
    m = len(arc_ptr) - 1
    for a in range(m):
        lo = arc_ptr[a]
        hi = arc_ptr[a + 1]
        if hi > lo:
            w = arc_weight[lo:hi]
            _alias_build(w / w.sum(), prob[lo:hi], alias[lo:hi])


@numba.njit(cache=True)
def _contains_sorted(arr, lo, hi, x):
    # binary search in arr[lo:hi]
    end = hi
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo < end and arr[lo] == x


@numba.njit(cache=True)
def _bias(arc_ptr, arc_dst, prev, nxt, inv_p, inv_q):
    if nxt == prev:
        return inv_p
    if _contains_sorted(arc_dst, arc_ptr[prev], arc_ptr[prev + 1], nxt):
        return 1.0
    return inv_q


@numba.njit(cache=True)
def _second_order_tables(arc_ptr, arc_dst, arc_weight, inv_p, inv_q, tbl_ptr, prob, alias):
    m = len(arc_ptr) - 1
    for a in range(m):
        for k in range(arc_ptr[a], arc_ptr[a + 1]):
            b = arc_dst[k]
            lo = arc_ptr[b]
            hi = arc_ptr[b + 1]
            if hi == lo:
                continue
            w = np.empty(hi - lo)
            for t in range(lo, hi):
                w[t - lo] = arc_weight[t] * _bias(arc_ptr, arc_dst, a, arc_dst[t], inv_p, inv_q)
            s = w.sum()
            o = tbl_ptr[k]
            _alias_build(w / s, prob[o:o + hi - lo], alias[o:o + hi - lo])


@dataclass(frozen=True, eq=False)
class TransitionTables:
    """Alias tables for the first step and, optionally, every directed arc.

    ``first_prob/first_alias`` are aligned with the line graph's arc arrays.
    For arc ``k`` (``a -> b``), the second-order table over the arcs leaving
    ``b`` lives at ``edge_prob[edge_ptr[k]:edge_ptr[k] + outdeg(b)]``. When
    ``edge_ptr`` is ``None`` the walker uses rejection sampling.
    """

    lg: LineGraph
    p: float
    q: float
    first_prob: np.ndarray = field(repr=False)
    first_alias: np.ndarray = field(repr=False)
    edge_ptr: np.ndarray | None = field(repr=False, default=None)
    edge_prob: np.ndarray | None = field(repr=False, default=None)
    edge_alias: np.ndarray | None = field(repr=False, default=None)

    @property
    def precomputed(self) -> bool:
        return self.edge_ptr is not None

    def first_order_distribution(self, a: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.lg.arc_ptr[a], self.lg.arc_ptr[a + 1]
        return self.lg.arc_dst[lo:hi], alias_probabilities(self.first_prob[lo:hi], self.first_alias[lo:hi])

    def second_order_distribution(self, prev: int, cur: int) -> tuple[np.ndarray, np.ndarray]:
        """Next-node distribution after the step ``prev -> cur``."""
        lg = self.lg
        lo, hi = lg.arc_ptr[cur], lg.arc_ptr[cur + 1]
        dst = lg.arc_dst[lo:hi]
        if self.precomputed:
            pl, ph = lg.arc_ptr[prev], lg.arc_ptr[prev + 1]
            k = pl + int(np.searchsorted(lg.arc_dst[pl:ph], cur))
            if k >= ph or lg.arc_dst[k] != cur:
                raise KeyError((prev, cur))
            o = self.edge_ptr[k]
            return dst, alias_probabilities(self.edge_prob[o:o + hi - lo], self.edge_alias[o:o + hi - lo])
        bias = np.array([
            _bias(lg.arc_ptr, lg.arc_dst, prev, int(b), 1.0 / self.p, 1.0 / self.q) for b in dst
        ])
        w = lg.arc_weight[lo:hi] * bias
        return dst, w / w.sum()


def build_transition_tables(lg: LineGraph, p: float = 1.0, q: float = 1.0,
                            max_precomputed_arcs: int = 50_000_000) -> TransitionTables:
    """Alias tables for weight-proportional first steps and (p, q)-biased later steps."""
    if not (p > 0 and q > 0):
        raise ValueError("p and q must be positive")
    first_prob = np.ones(lg.num_arcs)
    first_alias = np.zeros(lg.num_arcs, dtype=np.int64)
    _first_order_tables(lg.arc_ptr, lg.arc_weight, first_prob, first_alias)
    outdeg = np.diff(lg.arc_ptr)
    sizes = outdeg[lg.arc_dst]
    total = int(sizes.sum())
    if total > max_precomputed_arcs:
        return TransitionTables(lg, p, q, first_prob, first_alias)
    edge_ptr = np.zeros(lg.num_arcs + 1, dtype=np.int64)
    np.cumsum(sizes, out=edge_ptr[1:])
    edge_prob = np.ones(total)
    edge_alias = np.zeros(total, dtype=np.int64)
    _second_order_tables(lg.arc_ptr, lg.arc_dst, lg.arc_weight, 1.0 / p, 1.0 / q,
                         edge_ptr, edge_prob, edge_alias)
    return TransitionTables(lg, p, q, first_prob, first_alias, edge_ptr, edge_prob, edge_alias)


@numba.njit(cache=True)
def _walk_kernel(starts, length, seed, arc_ptr, arc_dst, first_prob, first_alias,
                 precomputed, edge_ptr, edge_prob, edge_alias, inv_p, inv_q, out, lens):
    np.random.seed(seed)
    max_bias = max(inv_p, 1.0, inv_q)
    for w in range(len(starts)):
        cur = starts[w]
        out[w, 0] = cur
        n = 1
        prev_arc = -1
        while n < length:
            lo = arc_ptr[cur]
            deg = arc_ptr[cur + 1] - lo
            if deg == 0:
                break
            if prev_arc < 0:
                k = lo + _alias_draw(first_prob, first_alias, lo, deg)
            elif precomputed:
                k = lo + _alias_draw(edge_prob, edge_alias, edge_ptr[prev_arc], deg)
            else:
                prev = out[w, n - 2]
                while True:
                    k = lo + _alias_draw(first_prob, first_alias, lo, deg)
                    b = _bias(arc_ptr, arc_dst, prev, arc_dst[k], inv_p, inv_q)
                    if np.random.random() * max_bias < b:
                        break
            cur = arc_dst[k]
            out[w, n] = cur
            n += 1
            prev_arc = k
        lens[w] = n


@dataclass(eq=False)
class WalkCorpus:
    """Walks stored flat: walk ``i`` is ``tokens[offsets[i]:offsets[i+1]]``."""

    tokens: np.ndarray
    offsets: np.ndarray
    num_nodes: int

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def walk(self, i: int) -> np.ndarray:
        return self.tokens[self.offsets[i]:self.offsets[i + 1]]

    @property
    def walks(self) -> list[np.ndarray]:
        return [self.walk(i) for i in range(len(self))]

    @classmethod
    def from_walks(cls, walks, num_nodes: int | None = None) -> "WalkCorpus":
        arrs = [np.asarray(w, dtype=np.int64) for w in walks]
        offsets = np.zeros(len(arrs) + 1, dtype=np.int64)
        np.cumsum([len(a) for a in arrs], out=offsets[1:])
        tokens = np.concatenate(arrs) if arrs else np.zeros(0, dtype=np.int64)
        if num_nodes is None:
            num_nodes = int(tokens.max()) + 1 if len(tokens) else 0
        return cls(tokens, offsets, num_nodes)

    def counts(self) -> np.ndarray:
        return np.bincount(self.tokens, minlength=self.num_nodes)

    def context_pairs(self, window: int) -> Iterator[tuple[int, int]]:
        return context_pairs(self, window)

    def write(self, fh: IO[str]) -> None:
        """One walk per line, space-separated line-node ids."""
        for i in range(len(self)):
            fh.write(" ".join(map(str, self.walk(i).tolist())) + "\n")


def _partition_seeds(seed: int, parts: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in ss.spawn(parts)]


def generate_walks(lg: LineGraph, cfg: WalkConfig,
                   tables: TransitionTables | None = None) -> WalkCorpus:
    """``cfg.walks_per_node`` walks from every line-node.

    Start nodes are visited round by round (all nodes, then all nodes again).
    A walk stops early only at a line-node without outgoing arcs. Results
    are reproducible for a fixed ``(seed, workers)``.
    """
    if tables is None:
        tables = build_transition_tables(lg, cfg.p, cfg.q, cfg.max_precomputed_arcs)
    m = lg.num_nodes
    starts = np.tile(np.arange(m, dtype=np.int64), cfg.walks_per_node)
    parts = max(1, min(cfg.workers, len(starts)))
    chunks = np.array_split(starts, parts)
    seeds = _partition_seeds(cfg.seed, parts)
    precomputed = tables.precomputed
    edge_ptr = tables.edge_ptr if precomputed else np.zeros(1, dtype=np.int64)
    edge_prob = tables.edge_prob if precomputed else np.zeros(1)
    edge_alias = tables.edge_alias if precomputed else np.zeros(1, dtype=np.int64)

    def run(i):
        chunk = chunks[i]
        out = np.empty((len(chunk), cfg.walk_length), dtype=np.int64)
        lens = np.empty(len(chunk), dtype=np.int64)
        _walk_kernel(chunk, cfg.walk_length, seeds[i], lg.arc_ptr, lg.arc_dst,
                     tables.first_prob, tables.first_alias, precomputed,
                     edge_ptr, edge_prob, edge_alias, 1.0 / tables.p, 1.0 / tables.q,
                     out, lens)
        return out, lens

    if parts == 1:
        results = [run(0)]
    else:
        with ThreadPoolExecutor(max_workers=parts) as pool:
            results = list(pool.map(run, range(parts)))
    out = np.concatenate([r[0] for r in results])
    lens = np.concatenate([r[1] for r in results])
    mask = np.arange(cfg.walk_length)[None, :] < lens[:, None]
    offsets = np.zeros(len(lens) + 1, dtype=np.int64)
    np.cumsum(lens, out=offsets[1:])
    return WalkCorpus(out[mask], offsets, m)


def context_pairs(corpus: WalkCorpus, window: int) -> Iterator[tuple[int, int]]:
    """Yield ``(walk[i], walk[j])`` for every ``j != i`` with ``|i - j| <= window``."""
    for k in range(len(corpus)):
        walk = corpus.walk(k).tolist()
        for i, center in enumerate(walk):
            for j in range(max(0, i - window), min(len(walk), i + window + 1)):
                if j != i:
                    yield center, walk[j]


def context_pair_array(corpus: WalkCorpus, window: int) -> np.ndarray:
    """All context pairs as an ``(P, 2)`` int array, in :func:`context_pairs` order."""
    return _pair_array(corpus.tokens, corpus.offsets, window)


@numba.njit(cache=True)
def _pair_array(tokens, offsets, window):
    total = 0
    for k in range(len(offsets) - 1):
        L = offsets[k + 1] - offsets[k]
        for i in range(L):
            total += min(L - 1, i + window) - max(0, i - window)
    out = np.empty((total, 2), dtype=np.int64)
    t = 0
    for k in range(len(offsets) - 1):
        base = offsets[k]
        L = offsets[k + 1] - base
        for i in range(L):
            for j in range(max(0, i - window), min(L, i + window + 1)):
                if j != i:
                    out[t, 0] = tokens[base + i]
                    out[t, 1] = tokens[base + j]
                    t += 1
    return out
