"""Pure-Python connected-triple enumeration (fallback for the Cython kernel).

Each connected 3-node set is found from a center ``u`` adjacent to both other
nodes.  An open wedge has one center; a closed triangle has three, so it is
emitted only from its smallest node.
"""
import numpy as np


def enumerate_connected_triples(und_indptr, und_indices, out_indptr, out_indices):
    """Return ``(triples, raw_codes)`` for every connected induced 3-node set.

    ``triples`` rows are sorted ascending; ``raw_codes`` is the 6-bit
    directed adjacency code of the row in that node order.
    """
    n = len(und_indptr) - 1
    und = [set(und_indices[und_indptr[v]:und_indptr[v + 1]].tolist()) for v in range(n)]
    out = [set(out_indices[out_indptr[v]:out_indptr[v + 1]].tolist()) for v in range(n)]
    triples = []
    codes = []
    for u in range(n):
        nb = und_indices[und_indptr[u]:und_indptr[u + 1]].tolist()
        for i, v in enumerate(nb):
            uv_closed = und[v]
            for w in nb[i + 1:]:
                if w in uv_closed and u > v:
                    continue
                a, b, c = sorted((u, v, w))
                oa, ob, oc = out[a], out[b], out[c]
                code = ((b in oa) << 5 | (c in oa) << 4 | (a in ob) << 3
                        | (c in ob) << 2 | (a in oc) << 1 | (b in oc))
                triples.append((a, b, c))
                codes.append(code)
    if not triples:
        return np.empty((0, 3), dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.asarray(triples, dtype=np.int64), np.asarray(codes, dtype=np.int64)
