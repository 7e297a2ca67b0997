"""Positive instance sampling and attribute-corrupted negative instances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_NEGATIVE_TRIES = 10


class SamplingError(ValueError):
    pass


def sample_positive(index, motif, v, q, rng) -> np.ndarray:
    """Up to ``q`` distinct instances of ``motif`` containing ``v``, uniformly."""
    if q < 1:
        raise ValueError("q must be >= 1")
    inst = index.instances(motif, v)
    if len(inst) <= q:
        return inst.copy()
    pick = rng.choice(len(inst), size=q, replace=False)
    return inst[np.sort(pick)]


@dataclass(frozen=True)
class NegativeSample:
    triple: tuple
    exhausted: bool  # True when every try hit a real instance


def sample_negative(g, index, motif, v, positive, rng) -> NegativeSample:
    """Replace the two non-anchor nodes of ``positive`` by random nodes.

    Draws ``r1 != r2`` uniformly from all nodes except ``v`` and retries
    (at most 10 times) while ``{v, r1, r2}`` is itself an instance of the motif.
    """
    n = g.num_nodes
    if n < 3:
        raise SamplingError("need at least 3 nodes to corrupt an instance")
    if v not in tuple(positive):
        raise ValueError(f"positive instance {tuple(positive)} does not contain anchor {v}")
    inst = index[motif]
    triple = None
    for _ in range(MAX_NEGATIVE_TRIES):
        r1, r2 = rng.choice(n - 1, size=2, replace=False)
        r1 += r1 >= v
        r2 += r2 >= v
        triple = (int(v), int(r1), int(r2))
        if not inst.contains([triple])[0]:
            return NegativeSample(triple, False)
    return NegativeSample(triple, True)


# ------------------------------------------------------- batched variants

HEAVY_FACTOR = 4  # nodes with more than HEAVY_FACTOR * q instances use rejection draws


def _distinct_offsets(counts, q, rng):
    """``q`` distinct uniform offsets in ``[0, counts[i])`` per row (counts > q).

    Collisions are redrawn until every row is distinct.  The procedure is
    symmetric in the offset labels, so each ``q``-subset is equally likely.
    """
    draws = rng.integers(0, counts[:, None], size=(len(counts), q))
    while True:
        draws.sort(axis=1)
        dup = np.zeros_like(draws, dtype=bool)
        dup[:, 1:] = draws[:, 1:] == draws[:, :-1]
        if not dup.any():
            return draws
        rows = np.nonzero(dup)[0]
        draws[dup] = rng.integers(0, counts[rows])


def sample_positive_batch(instances, nodes, q, rng):
    """Sample up to ``q`` instances per node for a whole node array.

    Returns ``(owner, triples)`` where ``owner[i]`` is the position in
    ``nodes`` of the anchor of ``triples[i]``, sorted by owner.  Nodes without
    instances contribute nothing.  Work is proportional to the instances of
    lightly covered nodes plus ``q`` per heavily covered node.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    starts = instances.indptr[nodes]
    counts = instances.indptr[nodes + 1] - starts
    heavy = counts > HEAVY_FACTOR * q
    light_counts = np.where(heavy, 0, counts)
    total = int(light_counts.sum())
    owner = np.repeat(np.arange(len(nodes)), light_counts)
    offs = np.arange(total) - np.repeat(np.cumsum(light_counts) - light_counts, light_counts)
    # random rank within each light node's list; keep the q smallest
    keys = rng.random(total)
    order = np.lexsort((keys, owner))
    first = np.cumsum(light_counts) - light_counts
    rank = np.empty(total, np.int64)
    rank[order] = np.arange(total) - np.repeat(first, light_counts)
    keep = rank < q
    owner, offs = owner[keep], offs[keep]
    if heavy.any():
        h = np.flatnonzero(heavy)
        extra = _distinct_offsets(counts[h], q, rng)
        owner = np.concatenate([owner, np.repeat(h, q)])
        offs = np.concatenate([offs, extra.ravel()])
        order = np.lexsort((offs, owner))
        owner, offs = owner[order], offs[order]
    if len(owner) == 0:
        return np.empty(0, np.int64), np.empty((0, 3), np.int64)
    triples = instances.triples[instances.node_instances[starts[owner] + offs]]
    return owner, triples


def sample_negative_batch(instances, anchors, num_nodes, rng):
    """One corrupted triple ``(v, r1, r2)`` per anchor, vectorised.

    Returns ``(triples, exhausted)``.
    """
    anchors = np.asarray(anchors, dtype=np.int64)
    m = len(anchors)
    if num_nodes < 3:
        raise SamplingError("need at least 3 nodes to corrupt an instance")
    out = np.empty((m, 3), np.int64)
    out[:, 0] = anchors
    todo = np.arange(m)
    for _ in range(MAX_NEGATIVE_TRIES):
        k = len(todo)
        if k == 0:
            break
        r1 = rng.integers(0, num_nodes - 1, size=k)
        r2 = rng.integers(0, num_nodes - 2, size=k)
        r2 += r2 >= r1  # r2 != r1 in the reduced range
        v = anchors[todo]
        r1 += r1 >= v
        r2 += r2 >= v
        out[todo, 1] = r1
        out[todo, 2] = r2
        todo = todo[instances.contains(out[todo])]
    exhausted = np.zeros(m, dtype=bool)
    exhausted[todo] = True
    return out, exhausted
