import itertools

import numpy as np
import pytest

from edgeembed.evaluate import (EdgeLabels, EvalReport, LogisticRegression, classify_edges,
                                cluster_nodes_on_centers, confusion_matrix, correlate_radii,
                                derive_edge_labels, f1_scores, kmeans, principal_components,
                                project_2d, stratified_split, unsupervised_accuracy)
from edgeembed.graph import Graph, load_node_labels

from graphgen import KARATE_LABELS, karate


def brute_force_accuracy(pred, truth):
    pv, tv = np.unique(pred), np.unique(truth)
    best = 0
    targets = list(tv) + [None] * max(0, len(pv) - len(tv))
    for perm in itertools.permutations(targets, len(pv)):
        mapping = dict(zip(pv, perm))
        best = max(best, sum(mapping[p] == t for p, t in zip(pred, truth)))
    return best / len(pred)


def test_accuracy_matches_permutation_search():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 13))
        k = int(rng.integers(1, 5))
        truth = rng.integers(0, k, n)
        pred = rng.integers(0, int(rng.integers(1, 5)), n)
        assert unsupervised_accuracy(pred, truth) == brute_force_accuracy(pred, truth)


def test_accuracy_permutation_invariant():
    truth = np.array([0, 0, 1, 1, 2, 2, 2])
    assert unsupervised_accuracy(truth, truth) == 1.0
    assert unsupervised_accuracy(np.array([5, 9, 1])[truth], truth) == 1.0
    with pytest.raises(ValueError):
        unsupervised_accuracy([0, 1], [0])


def test_confusion_matrix_counts():
    cm, pv, tv = confusion_matrix([0, 0, 1], [1, 1, 1])
    assert cm.tolist() == [[2], [1]] and pv.tolist() == [0, 1] and tv.tolist() == [1]


def test_kmeans_separates_blobs():
    rng = np.random.default_rng(1)
    pts = np.vstack([rng.normal(0, 0.1, (30, 2)), rng.normal(5, 0.1, (30, 2))])
    ids, _, _ = kmeans(pts, 2, seed=0)
    assert unsupervised_accuracy(ids, np.repeat([0, 1], 30)) == 1.0


def test_kmeans_single_cluster_wcss():
    pts = np.random.default_rng(2).normal(size=(25, 3))
    _, centers, wcss = kmeans(pts, 1)
    assert wcss == pytest.approx(pts.var(axis=0).sum() * len(pts))
    np.testing.assert_allclose(centers[0], pts.mean(axis=0))


def test_kmeans_duplicates():
    pts = np.array([[0.0, 0.0]] * 4 + [[1.0, 1.0]] * 3)
    assert kmeans(pts, 2)[2] == 0.0
    assert kmeans(pts, 3)[2] == 0.0
    same = np.ones((5, 2))
    ids, _, wcss = kmeans(same, 2)
    assert wcss == 0.0
    with pytest.raises(ValueError):
        kmeans(same, 6)


def exhaustive_wcss(pts, k):
    best = np.inf
    for assign in itertools.product(range(k), repeat=len(pts)):
        a = np.array(assign)
        if len(np.unique(a)) < k:
            continue
        total = sum(((pts[a == c] - pts[a == c].mean(axis=0)) ** 2).sum() for c in range(k))
        best = min(best, total)
    return best


def test_kmeans_reaches_global_optimum_on_small_fixtures():
    rng = np.random.default_rng(3)
    for trial in range(6):
        n = int(rng.integers(4, 9))
        k = int(rng.integers(2, 4))
        pts = rng.normal(size=(n, 2))
        assert kmeans(pts, k, seed=trial, restarts=50)[2] == pytest.approx(exhaustive_wcss(pts, k), rel=1e-9)


def test_logistic_regression_separable():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(-2, 0.3, (40, 2)), rng.normal(2, 0.3, (40, 2))])
    y = np.repeat([0, 1], 40)
    pred = LogisticRegression().fit(X, y).predict(X)
    assert f1_scores(y, pred)[0] == 1.0


def test_logistic_regression_multiclass():
    rng = np.random.default_rng(5)
    centers = np.array([[0, 4], [4, 0], [-4, -4]])
    X = np.vstack([rng.normal(c, 0.4, (30, 2)) for c in centers])
    y = np.repeat([0, 1, 2], 30)
    clf = LogisticRegression().fit(X, y)
    assert (clf.predict(X) == y).mean() == 1.0
    assert clf.decision_function(X).shape == (90, 3)


def test_majority_predictor_micro_f1():
    truth = np.array([0] * 80 + [1] * 20)
    micro, macro = f1_scores(truth, np.zeros(100, dtype=int))
    assert micro == pytest.approx(0.8)
    assert macro == pytest.approx((2 * 0.8 / 1.8) / 2)


def test_stratified_split_keeps_every_class():
    y = np.array([0] * 50 + [1] * 3 + [2] * 7)
    tr, te = stratified_split(y, 0.1, seed=0)
    assert set(y[tr]) == {0, 1, 2}
    assert len(np.intersect1d(tr, te)) == 0 and len(tr) + len(te) == len(y)


def test_classify_edges_rejects_single_class():
    labels = EdgeLabels(np.zeros(20, dtype=int))
    with pytest.raises(ValueError):
        classify_edges(np.random.default_rng(0).normal(size=(20, 3)), labels)


def test_edge_label_derivation():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    el = derive_edge_labels(g, np.zeros(4, dtype=int))
    assert el.mask.all() and el.num_classes == 1
    cut = Graph.from_edges(4, [(0, 2), (1, 3)])
    assert not derive_edge_labels(cut, np.array([0, 0, 1, 1])).mask.any()
    with pytest.raises(ValueError):
        derive_edge_labels(g, np.array([0, -1, 0, 0]))


def test_karate_has_three_edge_labels():
    g = karate()
    el = derive_edge_labels(g, load_node_labels(str(KARATE_LABELS), g))
    assert el.num_classes == 3


def test_pearson_sign_and_invariance():
    c = np.random.default_rng(6).random(20)
    assert correlate_radii(c, c) == pytest.approx(1.0)
    assert correlate_radii(-c, c) == pytest.approx(-1.0)
    r = np.random.default_rng(7).random(20)
    assert correlate_radii(3 * r + 2, c) == pytest.approx(correlate_radii(r, c))
    with pytest.raises(ValueError):
        correlate_radii(np.ones(5), np.arange(5.0))


def test_node_clustering_one_hot_centers():
    labels = np.array([0, 0, 1, 1, 2, 2, 2])
    centers = np.eye(3)[labels] * 10
    assert cluster_nodes_on_centers(centers, labels) == 1.0


def test_node_clustering_random_centers_sanity():
    rng = np.random.default_rng(8)
    labels = rng.integers(0, 3, 60)
    accs = [cluster_nodes_on_centers(rng.normal(size=(60, 4)), labels, seed=s) for s in range(10)]
    assert np.mean(accs) >= 1 / 3


def test_pca_rotation_and_rank_one():
    rng = np.random.default_rng(9)
    pts = rng.normal(size=(50, 2)) * [5.0, 0.5]
    theta = 0.7
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    a, b = project_2d(pts), project_2d(pts @ rot.T)
    np.testing.assert_allclose(np.abs(a), np.abs(b), atol=1e-8)
    line = np.outer(rng.normal(size=30), [1.0, 2.0, -1.0])
    Y = project_2d(line)
    assert np.allclose(Y[:, 1], 0.0, atol=1e-8)
    with pytest.raises(ValueError):
        project_2d(pts[:2])


def test_pca_matches_reference():
    sklearn = pytest.importorskip("sklearn.decomposition")
    rng = np.random.default_rng(10)
    pts = rng.normal(size=(40, 6)) @ rng.normal(size=(6, 6))
    ours = project_2d(pts)
    axes, var = principal_components(pts, 2)
    np.testing.assert_allclose(axes @ axes.T, np.eye(2), atol=1e-10)
    ref = sklearn.PCA(2).fit_transform(pts)
    np.testing.assert_allclose(np.abs(ours), np.abs(ref), atol=1e-6)


def test_projection_preserves_cluster_structure():
    metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(11)
    labels = np.repeat([0, 1, 2], 20)
    means = rng.normal(scale=6, size=(3, 8))
    pts = means[labels] + rng.normal(size=(60, 8))
    assert metrics.silhouette_score(project_2d(pts), labels) > 0.5


def test_report_json_round_trip():
    rep = EvalReport(clustering_accuracy=0.9, micro_f1=0.8, macro_f1=0.7, seed=3)
    back = EvalReport.from_json(rep.to_json())
    assert back == rep
    assert EvalReport.from_json(EvalReport().to_json()).as_dict() == {"seed": 0}
    with pytest.raises(ValueError):
        EvalReport(clustering_accuracy=1.5).to_json()
