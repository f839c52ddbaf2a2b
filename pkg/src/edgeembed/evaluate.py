"""Downstream protocols: edge labels, clustering accuracy, edge classification,
node clustering on sphere centers and radius-centrality correlation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import Graph


@dataclass(frozen=True, eq=False)
class EdgeLabels:
    """Per-edge community id; ``-1`` marks inter-community edges."""

    labels: np.ndarray

    @property
    def mask(self) -> np.ndarray:
        return self.labels >= 0

    @property
    def num_classes(self) -> int:
        return len(np.unique(self.labels[self.mask]))


def derive_edge_labels(g: Graph, node_labels: np.ndarray) -> EdgeLabels:
    """Intra-community edges take the shared label; inter-community edges are masked."""
    node_labels = np.asarray(node_labels)
    if len(node_labels) != g.n:
        raise ValueError(f"expected {g.n} node labels, got {len(node_labels)}")
    missing = np.flatnonzero(node_labels < 0)
    if len(missing):
        raise ValueError(f"node {g.tokens[missing[0]]!r} has no label")
    a, b = node_labels[g.src], node_labels[g.dst]
    return EdgeLabels(np.where(a == b, a, -1).astype(np.int64))


def _pairwise_sq(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (points * points).sum(1)[:, None] - 2.0 * points @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    idx = [int(rng.integers(n))]
    d2 = ((points - points[idx[0]]) ** 2).sum(1)
    for _ in range(1, k):
        tot = d2.sum()
        if tot > 0:
            nxt = int(rng.choice(n, p=d2 / tot))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(1))
    return points[idx].copy()


def _lloyd(points, centers, max_iter=300, tol=1e-6):
    k = len(centers)
    prev = np.inf
    for _ in range(max_iter):
        d = _pairwise_sq(points, centers)
        ids = d.argmin(1)
        best = d[np.arange(len(points)), ids]
        wcss = float(best.sum())
        for c in range(k):
            members = ids == c
            if members.any():
                centers[c] = points[members].mean(0)
            else:
                # re-seed an empty cluster at the worst-served point
                far = int(best.argmax())
                centers[c] = points[far]
                best[far] = 0.0
        if wcss == 0.0 or (prev - wcss) <= tol * abs(prev):
            break
        prev = wcss
    d = _pairwise_sq(points, centers)
    ids = d.argmin(1)
    wcss = float(((points - centers[ids]) ** 2).sum())
    return ids, centers, wcss


def kmeans(points, k: int, seed: int = 0, restarts: int = 10,
           max_iter: int = 300, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray, float]:
    """k-means++ with Lloyd refinement; best of ``restarts`` by WCSS.

    Returns ``(ids, centers, wcss)``.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if not 1 <= k <= len(points):
        raise ValueError(f"k={k} must be between 1 and the number of points ({len(points)})")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        centers = _kmeanspp_seed(points, k, rng)
        res = _lloyd(points, centers, max_iter, tol)
        if best is None or res[2] < best[2]:
            best = res
    return best


def kmeanspp_cluster(points, k: int, seed: int = 0, restarts: int = 10) -> np.ndarray:
    return kmeans(points, k, seed, restarts)[0]


def confusion_matrix(pred, truth) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Counts with rows = predicted ids, columns = true ids (plus the id lists)."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(truth)} labels")
    pv, pi = np.unique(pred, return_inverse=True)
    tv, ti = np.unique(truth, return_inverse=True)
    cm = np.zeros((len(pv), len(tv)), dtype=np.int64)
    np.add.at(cm, (pi, ti), 1)
    return cm, pv, tv


def unsupervised_accuracy(pred, truth) -> float:
    """Best accuracy over one-to-one maps from predicted ids to true labels."""
    cm, _, _ = confusion_matrix(pred, truth)
    if cm.size == 0:
        raise ValueError("empty input")
    rows, cols = linear_sum_assignment(cm, maximize=True)
    return float(cm[rows, cols].sum() / cm.sum())


def f1_scores(truth, pred) -> tuple[float, float]:
    """Micro and macro F1 for single-label multiclass predictions.

    Macro averages over every label seen in either array.
    """
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    labels = np.union1d(truth, pred)
    tp = np.array([np.sum((pred == c) & (truth == c)) for c in labels], dtype=float)
    fp = np.array([np.sum((pred == c) & (truth != c)) for c in labels], dtype=float)
    fn = np.array([np.sum((pred != c) & (truth == c)) for c in labels], dtype=float)
    denom = 2 * tp + fp + fn
    per_class = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    micro = 2 * tp.sum() / (2 * tp.sum() + fp.sum() + fn.sum())
    return float(micro), float(per_class.mean())


class LogisticRegression:
    """Multinomial logistic regression, full-batch gradient descent, L2 penalty.

    Features are standardized with training statistics; the step size is
    the inverse of a curvature bound so every iteration descends.
    """

    def __init__(self, l2: float = 1e-4, max_iter: int = 500, tol: float = 1e-6):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol

    def _design(self, X):
        Z = (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_
        return np.hstack([Z, np.ones((len(Z), 1))])

    def fit(self, X, y) -> "LogisticRegression":
        X = np.asarray(X, dtype=np.float64)
        self.classes_, yi = np.unique(y, return_inverse=True)
        self.mean_ = X.mean(0)
        sd = X.std(0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        A = self._design(X)
        n, d = A.shape
        k = len(self.classes_)
        Y = np.zeros((n, k))
        Y[np.arange(n), yi] = 1.0
        W = np.zeros((d, k))
        step = 1.0 / (0.5 * np.linalg.norm(A, 2) ** 2 / n + self.l2)
        prev = np.inf
        for _ in range(self.max_iter):
            Z = A @ W
            Z -= Z.max(1, keepdims=True)
            P = np.exp(Z)
            P /= P.sum(1, keepdims=True)
            loss = -np.mean(np.log(P[np.arange(n), yi] + 1e-300)) + 0.5 * self.l2 * np.sum(W[:-1] ** 2)
            if prev - loss <= self.tol * max(abs(prev), 1e-12) and np.isfinite(prev):
                break
            prev = loss
            G = A.T @ (P - Y) / n
            G[:-1] += self.l2 * W[:-1]
            W -= step * G
        self.coef_ = W
        return self

    def decision_function(self, X) -> np.ndarray:
        return self._design(X) @ self.coef_

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.decision_function(X).argmax(1)]


def stratified_split(labels: np.ndarray, train_fraction: float,
                     seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays ``(train, test)``; every class contributes at least one training item."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        n_train = int(round(train_fraction * len(idx)))
        if n_train == 0:
            if len(idx) < 2:
                raise ValueError(f"class {c} has a single item and would be absent from the training split")
            n_train = 1
        train.append(idx[:n_train])
        test.append(idx[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def classify_edges(embeddings, labels: EdgeLabels, train_fraction: float = 0.10,
                   seed: int = 0) -> tuple[float, float]:
    """Train on a stratified ``train_fraction`` of evaluable edges, report
    ``(micro_f1, macro_f1)`` on the rest."""
    X = np.asarray(embeddings)[labels.mask]
    y = labels.labels[labels.mask]
    if len(np.unique(y)) < 2:
        raise ValueError("edge classification needs at least two classes among evaluable edges")
    tr, te = stratified_split(y, train_fraction, seed)
    if len(te) == 0:
        raise ValueError("no held-out edges left for testing")
    clf = LogisticRegression().fit(X[tr], y[tr])
    return f1_scores(y[te], clf.predict(X[te]))


def cluster_edges(embeddings, labels: EdgeLabels, seed: int = 0, restarts: int = 10) -> float:
    """Unsupervised accuracy of k-means++ on all edges, scored on intra-community ones.

    ``k`` is the number of distinct edge labels.
    """
    k = labels.num_classes
    ids = kmeanspp_cluster(np.asarray(embeddings), k, seed, restarts)
    return unsupervised_accuracy(ids[labels.mask], labels.labels[labels.mask])


def cluster_nodes_on_centers(centers, node_labels, k: int | None = None, seed: int = 0,
                             restarts: int = 10) -> float:
    node_labels = np.asarray(node_labels)
    keep = node_labels >= 0
    if k is None:
        k = len(np.unique(node_labels[keep]))
    ids = kmeanspp_cluster(np.asarray(centers)[keep], k, seed, restarts)
    return unsupervised_accuracy(ids, node_labels[keep])


def correlate_radii(radii, centrality) -> float:
    """Pearson correlation between per-node radii and a centrality vector."""
    r = np.asarray(radii, dtype=np.float64)
    c = np.asarray(centrality, dtype=np.float64)
    if r.shape != c.shape or r.ndim != 1:
        raise ValueError("radii and centrality must be 1-D arrays of equal length")
    if len(r) < 3:
        raise ValueError("need at least 3 nodes")
    r = r - r.mean()
    c = c - c.mean()
    sr, sc = math.sqrt(r @ r), math.sqrt(c @ c)
    if sr == 0 or sc == 0:
        raise ValueError("zero variance: correlation undefined")
    return float(np.clip((r @ c) / (sr * sc), -1.0, 1.0))


def principal_components(points, n_components: int = 2, seed: int = 0,
                         max_iter: int = 1000, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Top principal axes by power iteration with deflation.

    Returns ``(axes, variances)`` with unit-norm axes as rows.
    """
    P = np.asarray(points, dtype=np.float64)
    Z = P - P.mean(0)
    cov = Z.T @ Z / len(Z)
    scale = max(float(np.trace(cov)), np.finfo(float).tiny)
    rng = np.random.default_rng(seed)
    axes, variances = [], []
    for _ in range(min(n_components, P.shape[1])):
        basis = np.array(axes).reshape(-1, P.shape[1])
        v = rng.standard_normal(P.shape[1])
        v -= basis.T @ (basis @ v)
        v /= np.linalg.norm(v)
        for _ in range(max_iter):
            w = cov @ v
            # keep the iterate orthogonal to earlier axes despite deflation round-off
            w -= basis.T @ (basis @ w)
            nw = np.linalg.norm(w)
            if nw <= 1e-12 * scale:
                break
            w /= nw
            done = min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < tol
            v = w
            if done:
                break
        lam = float(v @ cov @ v)
        axes.append(v)
        variances.append(max(lam, 0.0))
        cov = cov - lam * np.outer(v, v)
    return np.array(axes), np.array(variances)


def project_2d(points, seed: int = 0) -> np.ndarray:
    """Coordinates of centered ``points`` on their top two principal axes."""
    P = np.asarray(points, dtype=np.float64)
    if len(P) < 3:
        raise ValueError("need at least 3 points for a 2-D projection")
    axes, _ = principal_components(P, 2, seed)
    out = (P - P.mean(0)) @ axes.T
    if out.shape[1] < 2:
        out = np.hstack([out, np.zeros((len(out), 2 - out.shape[1]))])
    return out


@dataclass
class EvalReport:
    clustering_accuracy: float | None = None
    micro_f1: float | None = None
    macro_f1: float | None = None
    node_clustering_accuracy: float | None = None
    pearson_betweenness: float | None = None
    pearson_closeness: float | None = None
    seed: int = 0
    train_fraction: float | None = None
    num_edge_labels: int | None = None
    num_evaluable_edges: int | None = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "extra" and v is not None}
        d.update(self.extra)
        return d

    def validate(self) -> None:
        for key in ("clustering_accuracy", "node_clustering_accuracy"):
            v = getattr(self, key)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{key}={v} outside [0, 1]")
        for key in ("micro_f1", "macro_f1"):
            v = getattr(self, key)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{key}={v} outside [0, 1]")
        for key in ("pearson_betweenness", "pearson_closeness"):
            v = getattr(self, key)
            if v is not None and not -1.0 <= v <= 1.0:
                raise ValueError(f"{key}={v} outside [-1, 1]")

    def to_json(self) -> str:
        self.validate()
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        known = {f for f in cls.__dataclass_fields__ if f != "extra"}
        return cls(**{k: v for k, v in d.items() if k in known},
                   extra={k: v for k, v in d.items() if k not in known})
