"""Two-layer graph convolutional encoder and the softmax classification head."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .autodiff import (Tensor, ShapeError, add, default_dtype, dropout, matmul, parameter, relu,
                       row_softmax, sparse_dropout, spmm)
from .graphstore import NormalizedAdjacency, normalized_adjacency

CITATION_HIDDEN = (256, 256)
AIR_TRAFFIC_HIDDEN = (64, 64)


def glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform Glorot initialisation, ``U(-r, r)`` with ``r = sqrt(6 / (fan_in + fan_out))``."""
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=(fan_in, fan_out))


@dataclass
class GcnParams:
    """Per-layer weight matrices; layer ``l`` maps width ``D_{l-1}`` to ``D_l``."""

    weights: list

    def __post_init__(self):
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ShapeError(f"layer widths do not chain: {a.shape} then {b.shape}")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def named(self, prefix="gcn") -> dict:
        return {f"{prefix}.W{i + 1}": w for i, w in enumerate(self.weights)}


def init_gcn(in_dim: int, hidden=CITATION_HIDDEN, rng=None) -> GcnParams:
    rng = np.random.default_rng(0) if rng is None else rng
    widths = [in_dim, *hidden]
    return GcnParams([parameter(glorot(rng, a, b), name=f"gcn.W{i + 1}")
                      for i, (a, b) in enumerate(zip(widths, widths[1:]))])


@dataclass
class ClassifierParams:
    weight: Tensor  # D x C
    bias: Tensor    # C

    def __post_init__(self):
        if self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(f"classifier bias {self.bias.shape} does not match weight {self.weight.shape}")

    @property
    def num_classes(self) -> int:
        return self.weight.shape[1]

    def named(self, prefix="clf") -> dict:
        return {f"{prefix}.W": self.weight, f"{prefix}.b": self.bias}


def init_classifier(dim: int, num_classes: int, rng=None) -> ClassifierParams:
    rng = np.random.default_rng(0) if rng is None else rng
    return ClassifierParams(parameter(glorot(rng, dim, num_classes), name="clf.W"),
                            parameter(np.zeros(num_classes), name="clf.b"))


def _adjacency_matrix(adj):
    if isinstance(adj, NormalizedAdjacency):
        return adj.matrix
    if sp.issparse(adj):
        return adj.tocsr()
    return sp.csr_matrix(np.asarray(adj, dtype=np.float64))


def forward_base(g, adj, params: GcnParams, train_mode: bool = False, rng=None,
                 dropout_rate: float = 0.5, features=None) -> Tensor:
    """Base node representations ``H`` (n x D).

    Each layer computes ``A_hat drop(H_{l-1}) W_l``; hidden layers apply ReLU,
    the last layer stays linear.  Dropout acts on every layer input when
    ``train_mode`` is set.  ``features`` overrides ``g.features``.
    """
    x = g.features if features is None else features
    a = _adjacency_matrix(adj if adj is not None else normalized_adjacency(g))
    n = g.num_nodes
    if a.shape != (n, n):
        raise ShapeError(f"adjacency shape {a.shape} does not match {n} nodes")
    if x.shape[0] != n:
        raise ShapeError(f"feature matrix has {x.shape[0]} rows for {n} nodes")
    if x.shape[1] != params.in_dim:
        raise ShapeError(f"feature width {x.shape[1]} != first layer input width {params.in_dim}")
    if train_mode and dropout_rate > 0 and rng is None:
        raise ValueError("train_mode with dropout needs an rng")
    rate = dropout_rate if train_mode else 0.0
    a = a.astype(default_dtype(), copy=False)

    k = len(params.weights)
    h = None
    for layer, w in enumerate(params.weights):
        if layer == 0 and sp.issparse(x):
            xw = spmm(sparse_dropout(x, rate, rng).astype(default_dtype()), w)
        else:
            inp = Tensor(np.asarray(x)) if layer == 0 else h
            xw = matmul(dropout(inp, rate, rng), w)
        h = spmm(a, xw)
        if layer < k - 1:
            h = relu(h)
    return h


def logits(z: Tensor, params: ClassifierParams) -> Tensor:
    if z.shape[-1] != params.weight.shape[0]:
        raise ShapeError(f"representation width {z.shape[-1]} != classifier input {params.weight.shape[0]}")
    return add(matmul(z, params.weight), params.bias)


def classify(z: Tensor, params: ClassifierParams) -> Tensor:
    """Class probabilities: row softmax of ``Z W + b``."""
    return row_softmax(logits(z, params))
