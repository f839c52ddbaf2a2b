import io
import itertools

import numpy as np
import pytest

from edgeembed.graph import Graph, degree, load_edge_list
from edgeembed.linegraph import build_line_graph, line_node_of, write_line_graph

from graphgen import karate, random_graph


def test_path_weight():
    g = load_edge_list(b"a b\nb c\n")
    lg = build_line_graph(g)
    assert lg.num_nodes == 2 and lg.num_adjacent_pairs == 1
    assert lg.arc_weight_between(0, 1) == pytest.approx(1 / 3, rel=1e-15)


def test_star_weight():
    g = load_edge_list(b"a c\nb c\nd c\n")
    lg = build_line_graph(g)
    assert lg.num_nodes == 3 and lg.num_adjacent_pairs == 3
    ac, cb = line_node_of(lg, 0, 1), line_node_of(lg, 1, 2)
    assert lg.arc_weight_between(ac, cb) == pytest.approx(0.125, rel=1e-15)


def test_karate_line_graph_size():
    lg = build_line_graph(karate())
    assert lg.num_nodes == 78 and lg.num_adjacent_pairs == 528


def test_line_node_ids():
    g = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    lg = build_line_graph(g)
    ids = {line_node_of(lg, u, v) for u, v in [(0, 1), (1, 2), (0, 2)]}
    assert ids == {0, 1, 2}
    assert line_node_of(lg, 1, 0) == line_node_of(lg, 0, 1)
    path = build_line_graph(Graph.from_edges(3, [(0, 1), (1, 2)]))
    with pytest.raises(KeyError):
        line_node_of(path, 0, 2)


def test_empty_graph_rejected():
    with pytest.raises(ValueError):
        build_line_graph(Graph.from_edges(2, []))


def test_isolated_node_logged(caplog):
    build_line_graph(Graph.from_edges(3, [(0, 1)]))
    assert "isolated" in caplog.text


def test_weights_positive_everywhere():
    rng = np.random.default_rng(5)
    for _ in range(30):
        lg = build_line_graph(random_graph(rng, 20))
        assert np.all(lg.arc_weight > 0)


def _check_normalization(g):
    lg = build_line_graph(g)
    deg = np.array([degree(g, u) for u in range(g.n)])
    for a in range(lg.num_nodes):
        i, j = lg.endpoints(a)
        dst, w = lg.out_arcs(a)
        for near, far in ((i, j), (j, i)):
            # arcs leaving a through endpoint ``far`` go to edges incident on far
            through = np.array([far in lg.endpoints(int(b)) for b in dst], dtype=bool)
            if deg[far] == g.incident_weights(far)[list(g.incident_edges(far)).index(a)]:
                assert not through.any()
                continue
            expected = deg[near] / (deg[near] + deg[far])
            assert w[through].sum() == pytest.approx(expected, rel=1e-12)


def test_normalization_on_fixtures():
    _check_normalization(karate())
    _check_normalization(load_edge_list(b"a b 0.5\nb c 2\nc a 1\nc d 3\nd e 0.25\n"))
    rng = np.random.default_rng(8)
    for _ in range(20):
        _check_normalization(random_graph(rng, 25))


def test_size_law_and_clique_on_random_graphs():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        g = random_graph(rng, 50)
        lg = build_line_graph(g)
        d = np.diff(g.indptr)
        assert lg.num_adjacent_pairs == int(np.sum(d * (d - 1) // 2))
        for u in range(g.n):
            members = lg.clique(u)
            for a, b in itertools.combinations(members.tolist(), 2):
                assert lg.adjacent(a, b) and lg.adjacent(b, a)


def test_write_line_graph():
    lg = build_line_graph(karate())
    arcs, mapping = io.StringIO(), io.StringIO()
    write_line_graph(lg, arcs, mapping)
    assert len(arcs.getvalue().splitlines()) == 2 * 528
    assert len(mapping.getvalue().splitlines()) == 78
    a, b, w = arcs.getvalue().splitlines()[0].split("\t")
    assert float(w) == lg.arc_weight_between(int(a), int(b))
