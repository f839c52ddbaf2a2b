"""Skip-gram edge embeddings under per-node sphere constraints.

Every line-node ``e = (u, v)`` has an embedding ``X[e]``; every original
node ``u`` owns a sphere with center ``C[u]`` and radius ``R[u]``. The
penalized objective is

    sum over context pairs (c, o) with negatives N of
        log sum_{n in N + [o]} exp(X[n] . X[c]) - X[o] . X[c]
    + alpha * sum_u R[u]**2
    + lam * sum_u sum_{e incident on u} g(|X[e] - C[u]|**2 - R[u]**2)
    + sum_u gamma[u] * g(-R[u])

with the hinge ``g(t) = max(t, 0)``. Counting the context node ``o`` in the
normalizer keeps the per-pair loss bounded below; ``context_in_normalizer``
switches to the bare negative-only sum. It is minimized by plain SGD while
``lam`` and ``gamma`` are escalated between epochs until the constraints
hold.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .graph import Graph
from .linegraph import LineGraph
from .walks import WalkCorpus, alias_setup, context_pair_array

logger = logging.getLogger(__name__)

MAX_RATE = 0.5
PAIR_CHUNK = 1 << 20

TRACE_COLUMNS = ("skipgram_loss", "radius_loss", "spherical_error",
                 "nonnegative_error", "lam", "mean_gamma")


class TrainingDiverged(FloatingPointError):
    """A loss or gradient became non-finite; ``trace`` holds the epochs so far."""

    def __init__(self, message: str, trace: "TrainTrace | None" = None):
        super().__init__(message)
        self.trace = trace


class ConstraintViolationWarning(UserWarning):
    pass


@dataclass
class PenaltySchedule:
    lam0: float = 0.1
    gamma0: float = 1.0
    lam_growth: float = 1.5
    gamma_growth: float = 2.0
    lam_max: float = 1e4
    gamma_max: float = 1e4
    tol: float = 1e-3


@dataclass
class TrainConfig:
    dim: int = 8
    alpha: float = 0.1
    epochs: int = 20
    negatives: int = 5
    lr_start: float = 0.025
    lr_end: float = 0.0001
    window: int = 10
    seed: int = 0
    context_in_normalizer: bool = True
    schedule: PenaltySchedule = field(default_factory=PenaltySchedule)


@dataclass(eq=False)
class EmbeddingState:
    X: np.ndarray
    C: np.ndarray
    R: np.ndarray
    alpha: float
    lam: float
    gamma: np.ndarray
    # constraint items: edge item_edge[i] must lie in the sphere of node item_node[i]
    item_node: np.ndarray = field(repr=False)
    item_edge: np.ndarray = field(repr=False)
    step: float = 0.0
    context_in_normalizer: bool = True

    def copy(self) -> "EmbeddingState":
        return EmbeddingState(self.X.copy(), self.C.copy(), self.R.copy(), self.alpha,
                              self.lam, self.gamma.copy(), self.item_node, self.item_edge,
                              self.step, self.context_in_normalizer)

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass(eq=False)
class NegativeSampler:
    """Unigram-to-the-3/4 noise distribution over line-nodes.

    Every line-node gets at least one pseudo-count so the support is total.
    """

    probs: np.ndarray
    negatives_per_pair: int = 5
    table_prob: np.ndarray = field(init=False, repr=False)
    table_alias: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.table_prob, self.table_alias = alias_setup(self.probs)

    @classmethod
    def from_corpus(cls, corpus: WalkCorpus, negatives_per_pair: int = 5,
                    power: float = 0.75) -> "NegativeSampler":
        counts = np.maximum(corpus.counts(), 1).astype(np.float64)
        w = counts ** power
        return cls(w / w.sum(), negatives_per_pair)

    def sample(self, num_pairs: int, rng: np.random.Generator | int) -> np.ndarray:
        """``(num_pairs, negatives_per_pair)`` array of negative line-nodes."""
        rng = np.random.default_rng(rng)
        k = len(self.table_prob)
        x = rng.random((num_pairs, self.negatives_per_pair)) * k
        col = np.minimum(x.astype(np.int64), k - 1)
        keep = (x - col) < self.table_prob[col]
        return np.where(keep, col, self.table_alias[col])


@dataclass
class TrainTrace:
    skipgram_loss: list[float] = field(default_factory=list)
    radius_loss: list[float] = field(default_factory=list)
    spherical_error: list[float] = field(default_factory=list)
    nonnegative_error: list[float] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    mean_gamma: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.skipgram_loss)

    def append(self, rec: dict) -> None:
        for col in TRACE_COLUMNS:
            getattr(self, col).append(float(rec[col]))

    def rows(self) -> list[tuple[float, ...]]:
        return list(zip(*(getattr(self, c) for c in TRACE_COLUMNS)))

    def to_csv(self, fh) -> None:
        fh.write("epoch," + ",".join(TRACE_COLUMNS) + "\n")
        for i, row in enumerate(self.rows()):
            fh.write(f"{i}," + ",".join(repr(float(x)) for x in row) + "\n")


@dataclass(eq=False)
class TrainResult:
    state: EmbeddingState
    trace: TrainTrace
    corpus: WalkCorpus
    feasible: bool

    @property
    def embeddings(self) -> np.ndarray:
        return self.state.X

    @property
    def centers(self) -> np.ndarray:
        return self.state.C

    @property
    def radii(self) -> np.ndarray:
        return self.state.R


def constraint_items(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """``(node, edge)`` for every incidence, grouped by node."""
    node = np.repeat(np.arange(g.n, dtype=np.int64), np.diff(g.indptr))
    return node, g.adj_edge.astype(np.int64)


def init_state(g: Graph, lg: LineGraph | None, dim: int, alpha: float = 0.1, seed: int = 0,
               schedule: PenaltySchedule | None = None,
               context_in_normalizer: bool = True) -> EmbeddingState:
    """Feasible starting point: small random ``X``, centers at incident means,
    radii just covering the farthest incident edge."""
    schedule = schedule or PenaltySchedule()
    m = g.m
    if dim < 2:
        raise ValueError("embedding dimension must be at least 2")
    if dim >= m:
        raise ValueError(f"embedding dimension K={dim} must be smaller than the edge count m={m}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-0.5 / dim, 0.5 / dim, size=(m, dim))
    C = np.zeros((g.n, dim))
    R = np.zeros(g.n)
    for u in range(g.n):
        inc = g.incident_edges(u)
        if len(inc) == 0:
            continue
        C[u] = X[inc].mean(axis=0)
        diff = X[inc] - C[u]
        d2 = float(np.max(np.einsum("ij,ij->i", diff, diff)))
        r = math.sqrt(d2)
        while r * r < d2:
            r = np.nextafter(r, np.inf)
        R[u] = r
    node, edge = constraint_items(g)
    return EmbeddingState(X, C, R, float(alpha), schedule.lam0,
                          np.full(g.n, schedule.gamma0), node, edge,
                          context_in_normalizer=context_in_normalizer)


def hinge(t):
    return np.maximum(t, 0.0)


def spherical_violations(state: EmbeddingState) -> np.ndarray:
    """``|X[e] - C[u]|^2 - R[u]^2`` for every constraint item."""
    diff = state.X[state.item_edge] - state.C[state.item_node]
    return np.einsum("ij,ij->i", diff, diff) - state.R[state.item_node] ** 2


def spherical_error(state: EmbeddingState) -> float:
    return float(hinge(spherical_violations(state)).sum())


def nonnegative_error(state: EmbeddingState) -> float:
    return float(hinge(-state.R).sum())


def _normalizer_set(pairs: np.ndarray, negatives: np.ndarray, with_context: bool) -> np.ndarray:
    negatives = np.asarray(negatives, dtype=np.int64).reshape(len(pairs), -1)
    if with_context:
        return np.hstack([negatives, pairs[:, 1:2]])
    return negatives


def skipgram_loss(X: np.ndarray, pairs: np.ndarray, negatives: np.ndarray,
                  with_context: bool = True) -> float:
    """Sum over pairs of ``log sum exp(X[n] . X[c]) - X[o] . X[c]``."""
    if len(pairs) == 0:
        return 0.0
    negatives = _normalizer_set(pairs, negatives, with_context)
    xc = X[pairs[:, 0]]
    xo = X[pairs[:, 1]]
    s = np.einsum("pk,pnk->pn", xc, X[negatives])
    mx = s.max(axis=1)
    lse = mx + np.log(np.exp(s - mx[:, None]).sum(axis=1))
    return float(np.sum(lse - np.einsum("pk,pk->p", xo, xc)))


def total_loss(state: EmbeddingState, pairs: np.ndarray, negatives: np.ndarray) -> tuple[float, dict]:
    """Penalized objective for fixed context pairs and negatives."""
    if len(pairs) == 0 and len(state.item_edge) == 0:
        raise ValueError("empty corpus")
    parts = {
        "skipgram": skipgram_loss(state.X, pairs, negatives, state.context_in_normalizer),
        "radius": state.alpha * float(np.sum(state.R ** 2)),
        "spherical": state.lam * spherical_error(state),
        "nonnegative": float(np.sum(state.gamma * hinge(-state.R))),
    }
    return sum(parts.values()), parts


def loss_gradients(state: EmbeddingState, pairs: np.ndarray,
                   negatives: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic (sub)gradients of :func:`total_loss` w.r.t. ``X``, ``C`` and ``R``.

    The hinge contributes slope 0 at its kink.
    """
    X, C, R = state.X, state.C, state.R
    gX = np.zeros_like(X)
    gC = np.zeros_like(C)
    if len(pairs):
        negatives = _normalizer_set(pairs, negatives, state.context_in_normalizer)
        c, o = pairs[:, 0], pairs[:, 1]
        xc = X[c]
        xn = X[negatives]
        s = np.einsum("pk,pnk->pn", xc, xn)
        s = np.exp(s - s.max(axis=1, keepdims=True))
        s /= s.sum(axis=1, keepdims=True)
        np.add.at(gX, c, np.einsum("pn,pnk->pk", s, xn) - X[o])
        np.add.at(gX, o, -xc)
        np.add.at(gX, negatives.ravel(), (s[:, :, None] * xc[:, None, :]).reshape(-1, X.shape[1]))
    gR = 2.0 * state.alpha * R
    t = spherical_violations(state)
    act = t > 0
    diff = X[state.item_edge[act]] - C[state.item_node[act]]
    np.add.at(gX, state.item_edge[act], 2.0 * state.lam * diff)
    np.add.at(gC, state.item_node[act], -2.0 * state.lam * diff)
    np.add.at(gR, state.item_node[act], -2.0 * state.lam * R[state.item_node[act]])
    gR -= np.where(R < 0, state.gamma, 0.0)
    return gX, gC, gR


@numba.njit(cache=True)
def _pair_step(X, c, o, negs, with_context, lr, s, gc, gn):
    """One SGD step on a single context pair; returns the pair loss.

    The normalizer runs over ``negs`` and, if ``with_context``, over the
    context node ``o`` itself (stored in slot ``k`` of ``s``/``gn``).
    """
    K = X.shape[1]
    k = len(negs)
    kk = k + 1 if with_context else k
    mx = -np.inf
    for j in range(kk):
        nj = negs[j] if j < k else o
        d = 0.0
        for t in range(K):
            d += X[nj, t] * X[c, t]
        s[j] = d
        if d > mx:
            mx = d
    tot = 0.0
    for j in range(kk):
        s[j] = math.exp(s[j] - mx)
        tot += s[j]
    pos = 0.0
    for t in range(K):
        pos += X[o, t] * X[c, t]
    loss = mx + math.log(tot) - pos
    for j in range(kk):
        s[j] /= tot
    # gradients at the old point, then apply
    for t in range(K):
        acc = -X[o, t]
        for j in range(kk):
            nj = negs[j] if j < k else o
            acc += s[j] * X[nj, t]
        gc[t] = acc
    for j in range(kk):
        for t in range(K):
            gn[j, t] = s[j] * X[c, t]
    for t in range(K):
        go = -X[c, t]
        X[c, t] -= lr * gc[t]
        X[o, t] -= lr * go
    for j in range(kk):
        nj = negs[j] if j < k else o
        for t in range(K):
            X[nj, t] -= lr * gn[j, t]
    return loss


@numba.njit(cache=True)
def _constraint_step(X, C, R, gamma, lam, alpha, u, e, inv_cnt, lr, max_rate, diff):
    """SGD step on the constraint term of incidence (u, e) plus a 1/d_u share
    of u's radius and non-negativity terms."""
    K = X.shape[1]
    d2 = 0.0
    for t in range(K):
        diff[t] = X[e, t] - C[u, t]
        d2 += diff[t] * diff[t]
    r = R[u]
    gr = 2.0 * alpha * r * inv_cnt
    if r < 0.0:
        gr -= gamma[u] * inv_cnt
    if d2 - r * r > 0.0:
        rate = min(lr * 2.0 * lam, max_rate)
        for t in range(K):
            X[e, t] -= rate * diff[t]
            C[u, t] += rate * diff[t]
        R[u] = r - lr * gr + rate * r
    else:
        R[u] = r - lr * gr


@numba.njit(cache=True)
def _pairs_kernel(X, pairs, negs, with_context, lr_hi, lr_lo):
    P = len(pairs)
    K = X.shape[1]
    k = negs.shape[1]
    s = np.empty(k + 1)
    gc = np.empty(K)
    gn = np.empty((k + 1, K))
    loss = 0.0
    for i in range(P):
        lr = lr_hi - (lr_hi - lr_lo) * i / P
        loss += _pair_step(X, pairs[i, 0], pairs[i, 1], negs[i], with_context, lr, s, gc, gn)
    return loss


@numba.njit(cache=True)
def _sweep_kernel(X, C, R, gamma, lam, alpha, item_node, item_edge, item_inv_cnt, lr, max_rate):
    diff = np.empty(X.shape[1])
    for i in range(len(item_node)):
        _constraint_step(X, C, R, gamma, lam, alpha, item_node[i], item_edge[i],
                         item_inv_cnt[i], lr, max_rate, diff)


def _item_inv_counts(state: EmbeddingState, n: int) -> np.ndarray:
    cnt = np.bincount(state.item_node, minlength=n).astype(np.float64)
    return 1.0 / cnt[state.item_node]


def sgd_epoch(state: EmbeddingState, pairs: np.ndarray, sampler: NegativeSampler,
              lr: float | tuple[float, float], seed: int = 0,
              penalty_lr: float | None = None) -> tuple[EmbeddingState, dict]:
    """One shuffled pass over ``pairs`` followed by one constraint sweep.

    ``lr`` is a constant or a ``(start, end)`` pair decayed linearly across
    the pair pass. The sweep over all sphere constraints runs at
    ``penalty_lr`` (default: the starting pair rate); a violated constraint
    moves its point and center by at most half their gap. Updates ``state``
    in place and returns it with the epoch record.
    """
    lr_hi, lr_lo = (lr, lr) if np.isscalar(lr) else lr
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    P = len(pairs)
    sg = 0.0
    for lo in range(0, P, PAIR_CHUNK):
        hi = min(P, lo + PAIR_CHUNK)
        chunk = np.ascontiguousarray(pairs[order[lo:hi]], dtype=np.int64)
        negs = sampler.sample(hi - lo, rng)
        a = lr_hi - (lr_hi - lr_lo) * lo / P
        b = lr_hi - (lr_hi - lr_lo) * hi / P
        sg += _pairs_kernel(state.X, chunk, negs, state.context_in_normalizer, a, b)
    _sweep_kernel(state.X, state.C, state.R, state.gamma, state.lam, state.alpha,
                  state.item_node, state.item_edge, _item_inv_counts(state, len(state.R)),
                  float(lr_hi if penalty_lr is None else penalty_lr), MAX_RATE)
    state.step = float(lr_lo)
    for name, arr in (("X", state.X), ("C", state.C), ("R", state.R)):
        if not np.all(np.isfinite(arr)):
            raise TrainingDiverged(f"non-finite values in {name} after SGD epoch")
    if not math.isfinite(sg):
        raise TrainingDiverged("skip-gram loss became non-finite")
    rec = {
        "skipgram_loss": sg,
        "radius_loss": state.alpha * float(np.sum(state.R ** 2)),
        "spherical_error": spherical_error(state),
        "nonnegative_error": nonnegative_error(state),
        "lam": state.lam,
        "mean_gamma": float(state.gamma.mean()) if len(state.gamma) else 0.0,
    }
    return state, rec


def escalate_penalties(state: EmbeddingState, schedule: PenaltySchedule) -> None:
    """Grow ``lam`` while spheres are violated and ``gamma[u]`` while ``R[u] < 0``."""
    if spherical_error(state) > schedule.tol:
        state.lam = min(state.lam * schedule.lam_growth, schedule.lam_max)
    neg = state.R < 0
    state.gamma[neg] = np.minimum(state.gamma[neg] * schedule.gamma_growth, schedule.gamma_max)


def train(g: Graph, lg: LineGraph, corpus: WalkCorpus, cfg: TrainConfig) -> TrainResult:
    """Run ``cfg.epochs`` SGD epochs with linear learning-rate decay and
    escalating penalties."""
    state = init_state(g, lg, cfg.dim, cfg.alpha, cfg.seed, cfg.schedule,
                       cfg.context_in_normalizer)
    pairs = context_pair_array(corpus, cfg.window)
    if len(pairs) == 0:
        warnings.warn("corpus has no context pairs; only sphere and radius terms are trained",
                      RuntimeWarning, stacklevel=2)
    sampler = NegativeSampler.from_corpus(corpus, cfg.negatives)
    trace = TrainTrace()
    seeds = np.random.SeedSequence([cfg.seed, 1]).generate_state(cfg.epochs)
    E = cfg.epochs
    for ep in range(E):
        lr_hi = cfg.lr_start - (cfg.lr_start - cfg.lr_end) * ep / E
        lr_lo = cfg.lr_start - (cfg.lr_start - cfg.lr_end) * (ep + 1) / E
        try:
            state, rec = sgd_epoch(state, pairs, sampler, (lr_hi, lr_lo), int(seeds[ep]),
                                   penalty_lr=cfg.lr_start)
        except TrainingDiverged as exc:
            exc.trace = trace
            raise
        trace.append(rec)
        logger.info("epoch %d: skipgram=%.4g spherical=%.3g nonneg=%.3g lam=%.3g",
                    ep, rec["skipgram_loss"], rec["spherical_error"],
                    rec["nonnegative_error"], rec["lam"])
        if ep < E - 1:
            escalate_penalties(state, cfg.schedule)
    sph = spherical_error(state)
    nonneg = nonnegative_error(state)
    feasible = nonneg == 0.0 and sph <= cfg.schedule.tol
    if not feasible:
        warnings.warn(f"constraints violated after training: spherical error {sph:.3g}, "
                      f"non-negative error {nonneg:.3g}", ConstraintViolationWarning, stacklevel=2)
    return TrainResult(state, trace, corpus, feasible)


def write_embeddings(g: Graph, X: np.ndarray, fh) -> None:
    fh.write(f"{X.shape[0]} {X.shape[1]}\n")
    for e in range(g.m):
        vec = " ".join(repr(float(x)) for x in X[e])
        fh.write(f"{g.tokens[g.src[e]]}\t{g.tokens[g.dst[e]]}\t{vec}\n")


def write_centers(g: Graph, C: np.ndarray, fh) -> None:
    fh.write(f"{C.shape[0]} {C.shape[1]}\n")
    for u in range(g.n):
        fh.write(f"{g.tokens[u]}\t" + " ".join(repr(float(x)) for x in C[u]) + "\n")


def write_radii(g: Graph, R: np.ndarray, fh) -> None:
    for u in range(g.n):
        fh.write(f"{g.tokens[u]}\t{float(R[u])!r}\n")


def read_embeddings(fh) -> tuple[list[tuple[str, str]], np.ndarray]:
    header = fh.readline().split()
    m, k = int(header[0]), int(header[1])
    keys, rows = [], []
    for line in fh:
        if not line.strip():
            continue
        u, v, vec = line.rstrip("\n").split("\t")
        keys.append((u, v))
        rows.append([float(x) for x in vec.split()])
    X = np.asarray(rows, dtype=np.float64).reshape(-1, k)
    if X.shape[0] != m:
        raise ValueError(f"embedding header says {m} rows, found {X.shape[0]}")
    return keys, X


def read_centers(fh) -> tuple[list[str], np.ndarray]:
    header = fh.readline().split()
    n, k = int(header[0]), int(header[1])
    keys, rows = [], []
    for line in fh:
        if not line.strip():
            continue
        u, vec = line.rstrip("\n").split("\t")
        keys.append(u)
        rows.append([float(x) for x in vec.split()])
    C = np.asarray(rows, dtype=np.float64).reshape(-1, k)
    if C.shape[0] != n:
        raise ValueError(f"centers header says {n} rows, found {C.shape[0]}")
    return keys, C


def read_radii(fh) -> tuple[list[str], np.ndarray]:
    keys, vals = [], []
    for line in fh:
        if not line.strip():
            continue
        u, r = line.rstrip("\n").split("\t")
        keys.append(u)
        vals.append(float(r))
    return keys, np.asarray(vals)
