"""Finite-difference check of the full training objective on a 12-node toy graph."""
from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, gather_rows, grad_check, using_dtype
from ..curriculum import (MotifSamples, attention_profiles, init_model, novelty_weights,
                          represent, weighted_mi_loss, weighted_supervised_loss)
from ..gnn import forward_base, logits
from ..graphstore import AttributedGraph, normalized_adjacency
from ..motifs import default_registry, enumerate_instances
from ..regularizer import batch_mi_losses, gate

TOY_EDGES = [
    (0, 1), (1, 2), (2, 0),              # cycle
    (3, 4), (4, 5), (3, 5),              # feed-forward loop
    (6, 7), (6, 8),                      # divergent
    (9, 11), (10, 11),                   # convergent
    (2, 3), (5, 6), (8, 9), (11, 0), (7, 10),
]
TOY_TRAIN = np.array([0, 3, 4, 7, 9, 10])


def toy_graph(seed: int = 0) -> AttributedGraph:
    """Directed 12-node graph containing every default directed motif."""
    rng = np.random.default_rng(seed)
    labels = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2, 0, 1, 2])
    return AttributedGraph(12, TOY_EDGES, rng.normal(size=(12, 5)), labels, directed=True,
                           num_classes=3, name="toy")


def combined_loss_check(seed: int = 0, q: int = 3, hidden=(6, 5), max_coords: int = 64) -> dict:
    """Gradient reports for the supervised loss and each motif's MI loss.

    Runs in 64-bit with dropout off.  ``beta`` and ``alpha`` are computed from
    the initial model and held constant, as during training.  Returns
    ``{"L_S": report, "L_MI/<motif id>": report, ...}``.
    """
    with using_dtype("float64"):
        return _check(seed, q, hidden, max_coords)


def _check(seed, q, hidden, max_coords):
    g = toy_graph(seed)
    reg = default_registry(True)
    index = enumerate_instances(g, reg)
    adj = normalized_adjacency(g)
    model = init_model(g.num_features, g.num_classes, reg, hidden, seed)
    for p in model.motifs:  # non-zero biases so every term is exercised
        p.gate_bias.data[:] = np.random.default_rng(seed + 1).normal(scale=0.5, size=p.dim)
    alpha = attention_profiles(model, g, adj)
    beta = novelty_weights(alpha[TOY_TRAIN])
    reports = {}

    def supervised():
        h = forward_base(g, adj, model.gcn)
        _, z = represent(model, gather_rows(h, TOY_TRAIN))
        return weighted_supervised_loss(beta, logits(z, model.classifier), g.labels[TOY_TRAIN])

    reports["L_S"] = grad_check(supervised, model.supervised_parameters(), max_coords=max_coords,
                                seed=seed)

    samples = MotifSamples(index, q, np.random.default_rng(seed))
    nodes = np.arange(g.num_nodes)
    for t, motif in enumerate(reg):
        owner, pos, neg = samples.for_batch(t, nodes)
        p = model.motifs[t]

        def mi_loss(t=t, owner=owner, pos=pos, neg=neg, p=p):
            h = forward_base(g, adj, model.gcn)
            per_node, _ = batch_mi_losses(gate(h, p), nodes, owner, pos, neg, p)
            terms = [(nodes, per_node if s == t else Tensor(np.zeros(len(nodes))))
                     for s in range(len(reg))]
            return weighted_mi_loss(alpha, terms, g.num_nodes)

        params = {**model.gcn.named(), **p.named(model.motif_prefix(t))}
        reports[f"L_MI/{motif.id}"] = grad_check(mi_loss, params, max_coords=max_coords, seed=seed)
    return reports
