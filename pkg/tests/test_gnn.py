import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from infomotif.autodiff import ShapeError, Tensor, cross_entropy_logits, grad_check, gradients, parameter
from infomotif.gnn import (ClassifierParams, GcnParams, classify, forward_base, init_classifier,
                           init_gcn, logits)
from infomotif.graphstore import AttributedGraph, khop_ball, normalized_adjacency

from conftest import random_graph


def dense_gcn(edges, n, x, weights):
    """Straight-line dense reference: symmetric normalisation, ReLU between layers."""
    a = np.eye(n)
    for u, v in edges:
        a[u, v] = a[v, u] = 1.0
    d = a.sum(1)
    a_hat = a / np.sqrt(np.outer(d, d))
    h = x
    for i, w in enumerate(weights):
        h = a_hat @ h @ w
        if i < len(weights) - 1:
            h = np.maximum(h, 0.0)
    return h


def test_single_node_identity():
    g = AttributedGraph(1, [], np.array([[1.5, -2.0, 0.25]]))
    params = GcnParams([parameter(np.eye(3))])
    h = forward_base(g, sp.csr_matrix([[1.0]]), params)
    np.testing.assert_array_equal(h.data, g.features)


def test_isolated_nodes_are_independent_and_equivariant():
    x = np.array([[1.0, 2.0], [-3.0, 0.5]])
    rng = np.random.default_rng(0)
    params = init_gcn(2, (4, 3), rng)
    g = AttributedGraph(2, [], x)
    h = forward_base(g, None, params).data
    g_swapped = AttributedGraph(2, [], x[::-1])
    h_swapped = forward_base(g_swapped, None, params).data
    np.testing.assert_allclose(h_swapped, h[::-1], rtol=1e-14)
    # a lone node's row depends on its features only
    alone = forward_base(AttributedGraph(1, [], x[:1]), None, params).data
    np.testing.assert_allclose(alone[0], h[0], rtol=1e-14)


def test_matches_dense_oracle(toy_graph):
    params = init_gcn(5, (8, 6), np.random.default_rng(3))
    h = forward_base(toy_graph, normalized_adjacency(toy_graph), params).data
    ref = dense_gcn(toy_graph.edges, 12, np.asarray(toy_graph.features), [w.data for w in params.weights])
    np.testing.assert_allclose(h, ref, rtol=1e-12, atol=1e-14)


def test_sparse_features_match_dense(toy_graph):
    params = init_gcn(5, (8, 6), np.random.default_rng(3))
    sparse_x = sp.csr_matrix(np.asarray(toy_graph.features))
    g2 = AttributedGraph(12, toy_graph.edges, sparse_x, directed=True)
    np.testing.assert_allclose(forward_base(g2, None, params).data,
                               forward_base(toy_graph, None, params).data, rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_permutation_equivariance(seed):
    g = random_graph(15, 0.2, False, seed, num_features=4)
    perm = np.random.default_rng(seed).permutation(15)
    inv = np.argsort(perm)  # new id of old node i is inv[i]
    gp = AttributedGraph(15, inv[g.edges], np.asarray(g.features)[perm])
    params = init_gcn(4, (5, 3), np.random.default_rng(seed))
    h = forward_base(g, None, params).data
    hp = forward_base(gp, None, params).data
    np.testing.assert_allclose(hp, h[perm], rtol=1e-10, atol=1e-12)


def test_final_layer_is_linear(toy_graph):
    params = init_gcn(5, (8, 6), np.random.default_rng(1))
    h = forward_base(toy_graph, None, params).data
    assert (h < 0).any()


def test_shape_errors(toy_graph):
    with pytest.raises(ShapeError):
        forward_base(toy_graph, None, init_gcn(4, (3,), np.random.default_rng(0)))
    with pytest.raises(ShapeError):
        forward_base(toy_graph, sp.identity(5, format="csr"), init_gcn(5, (3,), np.random.default_rng(0)))
    with pytest.raises(ShapeError):
        GcnParams([parameter(np.ones((5, 3))), parameter(np.ones((4, 2)))])
    with pytest.raises(ShapeError):
        logits(Tensor(np.ones((2, 3))), init_classifier(4, 2))


def test_dropout_needs_rng(toy_graph):
    params = init_gcn(5, (3,), np.random.default_rng(0))
    with pytest.raises(ValueError):
        forward_base(toy_graph, None, params, train_mode=True)
    a = forward_base(toy_graph, None, params, True, np.random.default_rng(1)).data
    b = forward_base(toy_graph, None, params, True, np.random.default_rng(1)).data
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, forward_base(toy_graph, None, params).data)


class TestClassify:
    def test_zero_weights_uniform(self):
        clf = ClassifierParams(parameter(np.zeros((4, 5))), parameter(np.zeros(5)))
        probs = classify(Tensor(np.random.default_rng(0).normal(size=(3, 4))), clf).data
        np.testing.assert_allclose(probs, 0.2)

    def test_large_logit_wins(self):
        z = np.array([[1.0, 0.0], [0.0, 1.0]])
        clf = ClassifierParams(parameter(np.array([[10.0, -10.0, -10.0], [-10.0, -10.0, 10.0]])),
                               parameter(np.zeros(3)))
        probs = classify(Tensor(z), clf).data
        assert probs.argmax(1).tolist() == [0, 2]
        np.testing.assert_allclose(probs.sum(1), 1.0)

    def test_cross_entropy_gradient(self):
        rng = np.random.default_rng(5)
        z = Tensor(rng.normal(size=(6, 4)))
        clf = init_classifier(4, 3, rng)
        clf.bias.data[:] = rng.normal(size=3)
        labels = np.array([0, 1, 2, 2, 1, 0])
        report = grad_check(lambda: cross_entropy_logits(logits(z, clf), labels), clf.named())
        assert report.max_rel_error < 1e-6


def test_loss_is_local_to_two_hop_ball():
    """Features beyond two hops of the labelled nodes cannot affect a 2-layer model."""
    g = random_graph(60, 0.04, False, seed=11, num_features=6)
    train = np.array([0, 1, 2])
    ball = khop_ball(g, train, 2)
    assert len(ball) < g.num_nodes
    x = np.asarray(g.features)
    x_cut = np.zeros_like(x)
    x_cut[ball] = x[ball]
    params = init_gcn(6, (8, 5), np.random.default_rng(0))
    clf = init_classifier(5, 3, np.random.default_rng(1))
    named = {**params.named(), **clf.named()}
    adj = normalized_adjacency(g)

    def loss_and_grads(features):
        h = forward_base(g, adj, params, features=features)
        z = h[train]
        loss = cross_entropy_logits(logits(z, clf), g.labels[train])
        return float(loss.data), gradients(loss, named)

    l_full, g_full = loss_and_grads(x)
    l_cut, g_cut = loss_and_grads(x_cut)
    assert abs(l_full - l_cut) < 1e-12
    for k in named:
        np.testing.assert_allclose(g_cut[k], g_full[k], rtol=0, atol=1e-12)
    # a feature change inside the ball does change the loss
    x_in = x.copy()
    x_in[train[0]] += 1.0
    assert abs(loss_and_grads(x_in)[0] - l_full) > 1e-6
