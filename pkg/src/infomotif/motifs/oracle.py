"""O(n^3) motif census used as a test oracle.

Deliberately shares nothing with the enumeration path: it checks every node
triple against every pattern by trying all position mappings on a dense
adjacency matrix.
"""
from itertools import combinations, permutations

import numpy as np

MAX_NODES = 200


def brute_force_instances(g, registry) -> dict:
    """``{motif_id: set of sorted node triples}`` by exhaustive search."""
    if g.num_nodes > MAX_NODES:
        raise ValueError(f"brute force refused for {g.num_nodes} > {MAX_NODES} nodes")
    adj = np.zeros((g.num_nodes, g.num_nodes), dtype=bool)
    for u, v in g.edges:
        adj[u, v] = True
        if not g.directed:
            adj[v, u] = True
    patterns = []
    for m in registry:
        patterns.append((m.id, {(u, v) for u, v in m.edges}))
    found = {mid: set() for mid, _ in patterns}
    for tri in combinations(range(g.num_nodes), 3):
        induced = {(i, j) for i in range(3) for j in range(3)
                   if i != j and adj[tri[i], tri[j]]}
        if len({frozenset(e) for e in induced}) < 2:
            continue  # fewer than two node pairs linked: not connected
        for mid, pat in patterns:
            if any({(p[i], p[j]) for i, j in pat} == induced for p in permutations(range(3))):
                found[mid].add(tri)
                break
    return found


def brute_force_count(g, registry) -> dict:
    """Per-motif instance totals by exhaustive search."""
    return {mid: len(s) for mid, s in brute_force_instances(g, registry).items()}
