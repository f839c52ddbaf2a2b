import io

import numpy as np
import pytest

from edgeembed.embedder import (EmbeddingState, NegativeSampler, PenaltySchedule, TrainConfig,
                                TrainingDiverged, constraint_items, escalate_penalties,
                                init_state, loss_gradients, nonnegative_error, read_centers,
                                read_embeddings, read_radii, sgd_epoch, skipgram_loss,
                                spherical_error, total_loss, train, write_centers,
                                write_embeddings, write_radii)
from edgeembed.graph import Graph, load_edge_list
from edgeembed.linegraph import build_line_graph
from edgeembed.walks import WalkConfig, WalkCorpus, context_pair_array, generate_walks

from graphgen import KARATE, karate, random_graph

H = 1e-5
KINK_MARGIN = 1e-3


def test_init_is_feasible():
    rng = np.random.default_rng(0)
    for seed in range(10):
        g = random_graph(rng, 20, min_edges=6)
        st = init_state(g, None, 4, seed=seed)
        assert spherical_error(st) == 0.0 and nonnegative_error(st) == 0.0


def test_degree_one_radius_zero():
    g = load_edge_list(b"a b\nb c\nc d\nb d\n")
    st = init_state(g, None, 2)
    assert st.R[0] == 0.0
    np.testing.assert_array_equal(st.C[0], st.X[0])


def test_init_deterministic():
    g = karate()
    a, b = init_state(g, None, 8, seed=3), init_state(g, None, 8, seed=3)
    assert a.X.tobytes() == b.X.tobytes()


@pytest.mark.parametrize("dim", [1, 78, 100])
def test_init_rejects_bad_dim(dim):
    with pytest.raises(ValueError):
        init_state(karate(), None, dim)


def test_skipgram_example_value():
    X = np.zeros((8, 3))
    pairs = np.array([[0, 1], [0, 2]])
    negs = np.array([[3, 4, 5, 6, 7]] * 2)
    assert skipgram_loss(X, pairs, negs, with_context=False) == pytest.approx(2 * np.log(5))
    assert skipgram_loss(X, pairs, negs, with_context=True) == pytest.approx(2 * np.log(6))


def test_penalties_zero_when_feasible():
    g = karate()
    st = init_state(g, None, 8)
    _, parts = total_loss(st, np.zeros((0, 2), dtype=np.int64), np.zeros((0, 5), dtype=np.int64))
    assert parts["spherical"] == 0.0 and parts["nonnegative"] == 0.0
    st.R[:] = 0.0
    st.C[st.item_node] = st.X[st.item_edge]
    assert total_loss(st, np.zeros((0, 2), dtype=np.int64), np.zeros((0, 5)))[1]["radius"] == 0.0


def _random_problem(rng):
    while True:
        m_target = int(rng.integers(4, 9))
        n = int(rng.integers(3, 7))
        iu, ju = np.triu_indices(n, 1)
        if len(iu) < m_target:
            continue
        pick = rng.choice(len(iu), m_target, replace=False)
        g = Graph.from_edges(n, zip(iu[pick].tolist(), ju[pick].tolist()))
        break
    st = init_state(g, None, 3, seed=int(rng.integers(1 << 30)))
    st.X = rng.normal(size=st.X.shape)
    st.C = rng.normal(size=st.C.shape)
    st.R = rng.normal(size=st.R.shape)
    st.lam = float(rng.uniform(0.1, 3))
    st.gamma = rng.uniform(0.5, 4, size=g.n)
    st.context_in_normalizer = bool(rng.integers(2))
    P = int(rng.integers(1, 10))
    pairs = rng.integers(0, g.m, size=(P, 2))
    negs = rng.integers(0, g.m, size=(P, 5))
    return st, pairs, negs


def _near_kink(st):
    diff = st.X[st.item_edge] - st.C[st.item_node]
    t = np.einsum("ij,ij->i", diff, diff) - st.R[st.item_node] ** 2
    return np.any(np.abs(t) < KINK_MARGIN) or np.any(np.abs(st.R) < KINK_MARGIN)


def _numeric_gradient(st, pairs, negs, name):
    arr = getattr(st, name)
    grad = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + H
        fp = total_loss(st, pairs, negs)[0]
        arr[idx] = old - H
        fm = total_loss(st, pairs, negs)[0]
        arr[idx] = old
        grad[idx] = (fp - fm) / (2 * H)
    return grad


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(42)
    checked = 0
    worst = 0.0
    while checked < 20:
        st, pairs, negs = _random_problem(rng)
        if _near_kink(st):
            continue
        analytic = dict(zip("XCR", loss_gradients(st, pairs, negs)))
        for name in "XCR":
            num = _numeric_gradient(st, pairs, negs, name)
            a = analytic[name]
            rel = np.abs(a - num) / np.maximum(np.maximum(np.abs(a), np.abs(num)), 1e-6)
            worst = max(worst, float(rel.max()))
        checked += 1
    assert worst < 1e-4


def _small_setup(seed=0):
    g = karate()
    lg = build_line_graph(g)
    corpus = generate_walks(lg, WalkConfig(2, 20, window=3, seed=seed))
    pairs = context_pair_array(corpus, 3)
    sampler = NegativeSampler.from_corpus(corpus, 5)
    return g, lg, corpus, pairs, sampler


def test_zero_learning_rate_leaves_state_unchanged():
    g, lg, corpus, pairs, sampler = _small_setup()
    st = init_state(g, lg, 8)
    st.X += np.random.default_rng(0).normal(scale=0.3, size=st.X.shape)
    before = st.copy()
    sgd_epoch(st, pairs, sampler, 0.0, seed=1)
    for name in ("X", "C", "R"):
        np.testing.assert_array_equal(getattr(st, name), getattr(before, name))


def test_single_pair_step_descends():
    g = karate()
    st = init_state(g, None, 8, seed=2)
    st.X = np.random.default_rng(2).normal(scale=0.5, size=st.X.shape)
    pairs = np.array([[0, 1]])
    negs = np.array([[5, 9, 13, 20, 40]])
    before = skipgram_loss(st.X, pairs, negs)
    gX, _, _ = loss_gradients(st, pairs, negs)
    gX_sg = np.zeros_like(gX)
    touched = np.unique(np.concatenate([pairs.ravel(), negs.ravel()]))
    gX_sg[touched] = gX[touched]
    after = skipgram_loss(st.X - 1e-3 * gX_sg, pairs, negs)
    assert after < before


def test_sgd_epoch_decreases_loss_on_fixed_pairs():
    g, lg, corpus, pairs, sampler = _small_setup()
    st = init_state(g, lg, 8, seed=0)
    negs = sampler.sample(len(pairs), 0)
    start = total_loss(st, pairs, negs)[0]
    for ep in range(3):
        sgd_epoch(st, pairs, sampler, 0.025, seed=ep)
    assert total_loss(st, pairs, negs)[0] < start


def test_penalties_are_monotone():
    g = karate()
    st = init_state(g, None, 8)
    sched = PenaltySchedule()
    st.X[0] += 5.0
    st.R[3] = -1.0
    lams, gammas = [st.lam], [st.gamma.copy()]
    for _ in range(40):
        escalate_penalties(st, sched)
        lams.append(st.lam)
        gammas.append(st.gamma.copy())
    assert all(b >= a for a, b in zip(lams, lams[1:]))
    assert all(np.all(b >= a) for a, b in zip(gammas, gammas[1:]))
    assert lams[-1] <= sched.lam_max and gammas[-1].max() <= sched.gamma_max
    assert gammas[-1][3] > gammas[0][3] and gammas[-1][0] == gammas[0][0]


def test_no_escalation_when_feasible():
    st = init_state(karate(), None, 8)
    escalate_penalties(st, PenaltySchedule())
    assert st.lam == PenaltySchedule().lam0


@pytest.mark.filterwarnings("ignore::edgeembed.embedder.ConstraintViolationWarning")
def test_train_trace_length_and_determinism():
    g, lg, corpus, _, _ = _small_setup()
    cfg = TrainConfig(epochs=4, window=3, seed=5)
    a = train(g, lg, corpus, cfg)
    b = train(g, lg, corpus, cfg)
    assert len(a.trace) == 4
    assert a.embeddings.tobytes() == b.embeddings.tobytes()
    assert a.radii.tobytes() == b.radii.tobytes()
    buf = io.StringIO()
    a.trace.to_csv(buf)
    assert len(buf.getvalue().splitlines()) == 5


def test_divergence_raises_with_trace():
    g, lg, corpus, _, _ = _small_setup()
    cfg = TrainConfig(epochs=3, window=3, lr_start=1e6, lr_end=1e6)
    with pytest.raises(TrainingDiverged) as exc:
        with np.errstate(all="ignore"):
            train(g, lg, corpus, cfg)
    assert exc.value.trace is not None


def test_empty_corpus_trains_constraints_only():
    g = karate()
    lg = build_line_graph(g)
    corpus = WalkCorpus.from_walks([[i] for i in range(g.m)], g.m)
    with pytest.warns(RuntimeWarning):
        res = train(g, lg, corpus, TrainConfig(epochs=2))
    assert res.feasible


def test_total_loss_rejects_empty():
    node = np.zeros(0, dtype=np.int64)
    st = EmbeddingState(np.zeros((2, 2)), np.zeros((0, 2)), np.zeros(0), 0.1, 0.1,
                        np.zeros(0), node, node)
    with pytest.raises(ValueError):
        total_loss(st, np.zeros((0, 2), dtype=np.int64), np.zeros((0, 5), dtype=np.int64))


def test_constraint_items_cover_incidences():
    g = karate()
    node, edge = constraint_items(g)
    assert len(node) == 2 * g.m
    for u, e in zip(node.tolist(), edge.tolist()):
        assert u in (g.src[e], g.dst[e])


def test_negative_sampler_support_and_shape():
    corpus = WalkCorpus.from_walks([[0, 1, 0, 1]], num_nodes=4)
    s = NegativeSampler.from_corpus(corpus, 3)
    draws = s.sample(20000, 0)
    assert draws.shape == (20000, 3)
    freq = np.bincount(draws.ravel(), minlength=4) / draws.size
    np.testing.assert_allclose(freq, s.probs, atol=0.01)
    assert s.probs[2] > 0


def test_artifact_round_trip():
    g = karate()
    st = init_state(g, None, 8, seed=1)
    for writer, reader, arr in ((write_embeddings, read_embeddings, st.X),
                                (write_centers, read_centers, st.C),
                                (write_radii, read_radii, st.R)):
        buf = io.StringIO()
        writer(g, arr, buf)
        buf.seek(0)
        keys, back = reader(buf)
        assert back.tobytes() == np.ascontiguousarray(arr).tobytes()
        assert len(keys) == len(arr)


@pytest.mark.filterwarnings("ignore::edgeembed.embedder.ConstraintViolationWarning")
def test_output_invariant_to_token_relabeling():
    text = KARATE.read_text()
    renamed = "\n".join(" ".join(f"node{t}" for t in line.split()) if line and not line.startswith("#")
                        else line for line in text.splitlines())
    results = []
    for g in (load_edge_list(text.encode()), load_edge_list(renamed.encode())):
        lg = build_line_graph(g)
        corpus = generate_walks(lg, WalkConfig(2, 20, window=3, seed=4))
        results.append(train(g, lg, corpus, TrainConfig(epochs=2, window=3, seed=4)))
    assert results[0].embeddings.tobytes() == results[1].embeddings.tobytes()
    assert results[0].radii.tobytes() == results[1].radii.tobytes()
