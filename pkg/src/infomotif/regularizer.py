"""Per-motif self-gating, instance encoding, readout and the contrastive MI loss.

Each motif owns an independent :class:`MotifParams`.  The single-instance
functions (:func:`encode_instance`, :func:`readout`, :func:`discriminate`,
:func:`mi_loss_node`) follow the definitions one node at a time;
:func:`batch_mi_losses` computes the same per-node losses for many nodes at
once and is what training uses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .autodiff import (ContractError, ShapeError, Tensor, add, bce_from_prob, concat, constant,
                       gather_rows, matmul, mean, mix_rows, mul, parameter, reshape, row_softmax,
                       rowdot, sigmoid, spmm, sum, transpose)
from .gnn import glorot

PROB_CLAMP = 1e-12


@dataclass
class MotifParams:
    gate_weight: Tensor  # D x D
    gate_bias: Tensor    # D
    attention: Tensor    # 2D, split as [anchor-free half | anchor half]
    disc: Tensor         # D x D

    def __post_init__(self):
        d = self.gate_weight.shape[0]
        expected = {"gate_weight": (d, d), "gate_bias": (d,), "attention": (2 * d,), "disc": (d, d)}
        for field, shape in expected.items():
            if getattr(self, field).shape != shape:
                raise ShapeError(f"MotifParams.{field} has shape {getattr(self, field).shape}, "
                                 f"expected {shape}")

    @property
    def dim(self) -> int:
        return self.gate_weight.shape[0]

    def named(self, prefix: str) -> dict:
        return {f"{prefix}.gate_W": self.gate_weight, f"{prefix}.gate_b": self.gate_bias,
                f"{prefix}.attn": self.attention, f"{prefix}.disc": self.disc}

    def gate_params(self, prefix: str) -> dict:
        return {f"{prefix}.gate_W": self.gate_weight, f"{prefix}.gate_b": self.gate_bias}


def init_motif_params(dim: int, rng, prefix: str = "motif") -> MotifParams:
    return MotifParams(
        parameter(glorot(rng, dim, dim), name=f"{prefix}.gate_W"),
        parameter(np.zeros(dim), name=f"{prefix}.gate_b"),
        parameter(glorot(rng, 2 * dim, 1).ravel(), name=f"{prefix}.attn"),
        parameter(glorot(rng, dim, dim), name=f"{prefix}.disc"),
    )


def gate(h: Tensor, p: MotifParams) -> Tensor:
    """Rowwise ``h * sigmoid(W_g h + b_g)``."""
    h = constant(h)
    if h.shape[-1] != p.dim:
        raise ShapeError(f"gate: input width {h.shape[-1]} != {p.dim}")
    return mul(h, sigmoid(add(matmul(h, transpose(p.gate_weight)), p.gate_bias)))


def encode_instance(v: int, nodes, gated: Tensor, p: MotifParams) -> Tensor:
    """Attention-weighted average of the gated rows of ``nodes``, anchored at ``v``.

    The weight of member ``u`` is the softmax over members of
    ``a . [h_u || h_v]``; ``v`` itself is one of the members.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    if v not in nodes:
        raise ContractError(f"instance {tuple(nodes)} does not contain anchor {v}")
    rows = gather_rows(gated, nodes)
    anchor = gather_rows(gated, np.full(len(nodes), v))
    scores = matmul(concat([rows, anchor], axis=1), p.attention)
    alpha = row_softmax(scores)
    return reshape(matmul(reshape(alpha, (1, len(nodes))), rows), (p.dim,))


def readout(embeddings) -> Tensor:
    """``sigmoid`` of the mean instance embedding."""
    if isinstance(embeddings, Tensor):
        stacked = embeddings if embeddings.ndim == 2 else reshape(embeddings, (1, -1))
    else:
        embeddings = list(embeddings)
        if not embeddings:
            raise ContractError("readout of an empty set of instance embeddings")
        stacked = concat([reshape(constant(e), (1, -1)) for e in embeddings], axis=0)
    if stacked.shape[0] == 0:
        raise ContractError("readout of an empty set of instance embeddings")
    return sigmoid(mean(stacked, axis=0))


def discriminate(e: Tensor, s: Tensor, p: MotifParams) -> Tensor:
    """Bilinear score ``sigmoid(e . W_d s)``."""
    e, s = constant(e), constant(s)
    if e.shape != (p.dim,) or s.shape != (p.dim,):
        raise ShapeError(f"discriminate: widths {e.shape}, {s.shape} vs {p.dim}")
    return sigmoid(sum(mul(e, matmul(p.disc, s))))


def mi_loss_node(v: int, positives, negatives, gated: Tensor, p: MotifParams,
                 clamp: float = PROB_CLAMP) -> Tensor:
    """Noise-contrastive loss of node ``v`` for one motif.

    ``-(1/2q) sum_i [log D(e_i+, s) + log(1 - D(e_i-, s))]`` where ``s`` is the
    readout of the positive embeddings only.  With no positives the node is
    masked and the result is a constant zero.
    """
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    negatives = np.asarray(negatives, dtype=np.int64).reshape(-1, 3)
    q = len(positives)
    if q == 0:
        return constant(0.0)
    if len(negatives) != q:
        raise ContractError(f"need one negative per positive, got {len(negatives)} for {q}")
    pos = [encode_instance(v, t, gated, p) for t in positives]
    neg = [encode_instance(v, t, gated, p) for t in negatives]
    s = readout(pos)
    terms = [bce_from_prob(discriminate(e, s, p), 1.0, clamp) for e in pos]
    terms += [bce_from_prob(discriminate(e, s, p), 0.0, clamp) for e in neg]
    total = terms[0]
    for t in terms[1:]:
        total = add(total, t)
    return mul(total, 1.0 / (2 * q))


# ------------------------------------------------------------- batched path

def _encode_batch(gated: Tensor, score_member: Tensor, score_anchor: Tensor, triples, anchors):
    m = len(triples)
    scores = add(gather_rows(score_member, triples),
                 reshape(gather_rows(score_anchor, anchors), (m, 1)))
    return mix_rows(gated, triples, row_softmax(scores))


def batch_mi_losses(gated: Tensor, nodes, owner, pos_triples, neg_triples, p: MotifParams,
                    clamp: float = PROB_CLAMP):
    """Per-node MI losses for one motif over a batch of anchor nodes.

    ``gated`` holds the gated rows addressed by the (local) node ids used in
    ``nodes`` and the triples.  ``owner[i]`` is the position in ``nodes`` of
    the anchor of ``pos_triples[i]``; ``neg_triples[i]`` is its paired
    corruption with the anchor in column 0.

    Returns ``(losses, q)``: a length-``len(nodes)`` tensor and the number of
    positive samples per node (0 marks a masked node with zero loss).
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    owner = np.asarray(owner, dtype=np.int64)
    pos_triples = np.asarray(pos_triples, dtype=np.int64).reshape(-1, 3)
    neg_triples = np.asarray(neg_triples, dtype=np.int64).reshape(-1, 3)
    b, m, d = len(nodes), len(owner), p.dim
    if pos_triples.shape[0] != m or neg_triples.shape[0] != m:
        raise ShapeError("owner, positive and negative arrays must have equal length")
    q = np.bincount(owner, minlength=b)
    if m == 0:
        return constant(np.zeros(b)), q
    anchors = nodes[owner]
    score_member = matmul(gated, p.attention[:d])
    score_anchor = matmul(gated, p.attention[d:])
    e_pos = _encode_batch(gated, score_member, score_anchor, pos_triples, anchors)
    e_neg = _encode_batch(gated, score_member, score_anchor, neg_triples, anchors)

    inv_q = 1.0 / q[owner]
    seg = sp.csr_matrix((inv_q, (owner, np.arange(m))), shape=(b, m))
    summary = sigmoid(spmm(seg, e_pos))                       # b x D
    projected = gather_rows(matmul(summary, transpose(p.disc)), owner)  # rows W_d s
    d_pos = sigmoid(rowdot(e_pos, projected))
    d_neg = sigmoid(rowdot(e_neg, projected))
    pair = add(bce_from_prob(d_pos, 1.0, clamp), bce_from_prob(d_neg, 0.0, clamp))
    losses = spmm(seg * 0.5, reshape(pair, (m, 1)))
    return reshape(losses, (b,)), q
