"""Per-node motif instance index and the enumeration entry point."""
from __future__ import annotations

import os

import numpy as np

from . import _enumerate_py

BACKEND = "python"
_kernel = _enumerate_py.enumerate_connected_triples
if not os.environ.get("INFOMOTIF_PURE_PYTHON"):
    try:
        from . import _enumerate as _ext
    except ImportError:  # extension not built
        pass
    else:
        _kernel = _ext.enumerate_connected_triples
        BACKEND = "cython"


def connected_triples(g, backend=None):
    """All connected induced 3-node sets of ``g`` with their raw 6-bit codes."""
    if backend is None:
        fn = _kernel
    elif backend == "python":
        fn = _enumerate_py.enumerate_connected_triples
    elif backend == "cython":
        from . import _enumerate as _ext
        fn = _ext.enumerate_connected_triples
    else:
        raise ValueError(f"unknown backend {backend!r}")
    u, o = g.und_adj, g.out_adj
    return fn(u.indptr.astype(np.int64), u.indices.astype(np.int64),
              o.indptr.astype(np.int64), o.indices.astype(np.int64))


class MotifInstances:
    """Instances of one motif: sorted triples plus a node -> instance CSR map."""

    def __init__(self, triples, num_nodes):
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        order = np.lexsort((triples[:, 2], triples[:, 1], triples[:, 0]))
        self.triples = triples[order]
        self.num_nodes = int(num_nodes)
        n = np.int64(self.num_nodes)
        self.keys = (self.triples[:, 0] * n + self.triples[:, 1]) * n + self.triples[:, 2]
        m = len(self.triples)
        owners = self.triples.ravel()
        inst = np.repeat(np.arange(m, dtype=np.int64), 3)
        by_node = np.argsort(owners, kind="stable")
        self.node_instances = inst[by_node]
        self.indptr = np.zeros(self.num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(owners, minlength=self.num_nodes), out=self.indptr[1:])
        for a in (self.triples, self.keys, self.node_instances, self.indptr):
            a.setflags(write=False)

    def __len__(self):
        return len(self.triples)

    @property
    def counts(self):
        """Number of instances containing each node."""
        return np.diff(self.indptr)

    def of_node(self, v):
        """Instance triples containing node ``v``."""
        return self.triples[self.node_instances[self.indptr[v]:self.indptr[v + 1]]]

    def contains(self, triples):
        """Vectorised membership test for (unsorted) node triples."""
        t = np.sort(np.asarray(triples, dtype=np.int64).reshape(-1, 3), axis=1)
        n = np.int64(self.num_nodes)
        k = (t[:, 0] * n + t[:, 1]) * n + t[:, 2]
        if len(self.keys) == 0:
            return np.zeros(len(k), dtype=bool)
        pos = np.searchsorted(self.keys, k)
        pos = np.minimum(pos, len(self.keys) - 1)
        return self.keys[pos] == k


class InstanceIndex:
    """Enumerated instances of every registry motif, indexed by node."""

    def __init__(self, registry, per_motif, num_nodes):
        self.registry = registry
        self.per_motif = list(per_motif)
        self.num_nodes = num_nodes

    def __getitem__(self, motif):
        return self.per_motif[self.registry.position(motif)]

    def __len__(self):
        return len(self.per_motif)

    def instances(self, motif, v):
        return self[motif].of_node(v)

    def is_instance(self, motif, triple) -> bool:
        return bool(self[motif].contains([triple])[0])

    def totals(self) -> dict:
        return {m.id: len(inst) for m, inst in zip(self.registry, self.per_motif)}

    def count_matrix(self) -> np.ndarray:
        """(num_nodes x T) number of instances per node and motif."""
        return np.stack([inst.counts for inst in self.per_motif], axis=1)


def enumerate_instances(g, registry, backend=None) -> InstanceIndex:
    """Find every induced 3-node instance of each registry motif in ``g``.

    Triples whose pattern is not in the registry (for example ones with a
    mutual edge under the default directed set) are dropped.
    """
    if registry.directed != g.directed:
        raise ValueError("registry and graph directedness differ")
    triples, codes = connected_triples(g, backend)
    pos = registry.raw_lookup[codes] if len(codes) else codes
    per_motif = [MotifInstances(triples[pos == t], g.num_nodes) for t in range(len(registry))]
    return InstanceIndex(registry, per_motif, g.num_nodes)
