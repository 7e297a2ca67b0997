"""Canonical 3-node motif patterns.

A 3-node pattern is encoded as a 6-bit integer reading the off-diagonal
adjacency matrix row by row: bit order ``(0,1) (0,2) (1,0) (1,2) (2,0) (2,1)``
with ``(0,1)`` as the most significant bit.  The canonical code of a pattern is
the minimum over the six position permutations.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PAIRS = ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))
PERMS = tuple(itertools.permutations(range(3)))


def encode(edges) -> int:
    """6-bit code for a set of directed position pairs."""
    es = set(map(tuple, edges))
    code = 0
    for u, v in PAIRS:
        code = (code << 1) | ((u, v) in es)
    return code


def decode(code: int) -> set[tuple[int, int]]:
    return {PAIRS[i] for i in range(6) if code >> (5 - i) & 1}


def canonical(code: int) -> int:
    es = decode(code)
    return min(encode({(p[u], p[v]) for u, v in es}) for p in PERMS)


def is_connected(code: int) -> bool:
    touched = {u for e in decode(code) for u in e}
    und = {frozenset(e) for e in decode(code)}
    return len(touched) == 3 and len(und) >= 2


# canonical code of every possible raw code; shared by both enumeration backends
CANONICAL_TABLE = np.array([canonical(c) for c in range(64)], dtype=np.int64)


class RegistryError(ValueError):
    pass


@dataclass(frozen=True)
class MotifPattern:
    id: str
    edges: frozenset
    directed: bool
    name: str = ""
    node_count: int = 3

    @property
    def code(self) -> int:
        return canonical(encode(self.edges))

    def to_json(self) -> dict:
        if self.directed:
            edges = sorted(self.edges)
        else:
            edges = sorted({tuple(sorted(e)) for e in self.edges})
        d = {"id": self.id, "directed": self.directed, "edges": [list(e) for e in edges]}
        if self.name:
            d["name"] = self.name
        return d


def make_pattern(id, edges, directed, name="") -> MotifPattern:
    es = set()
    for u, v in edges:
        if u == v or not (0 <= u < 3 and 0 <= v < 3):
            raise RegistryError(f"motif {id}: invalid edge {(u, v)}")
        es.add((u, v))
        if not directed:
            es.add((v, u))
    return MotifPattern(id, frozenset(es), bool(directed), name)


class MotifRegistry:
    """Ordered set of pairwise non-isomorphic motifs sharing one directedness.

    Motifs are kept sorted by canonical code.
    """

    def __init__(self, motifs):
        motifs = sorted(motifs, key=lambda m: m.code)
        if not motifs:
            raise RegistryError("registry is empty")
        if len({m.directed for m in motifs}) != 1:
            raise RegistryError("all motifs must share the same directedness")
        codes = [m.code for m in motifs]
        if len(set(codes)) != len(codes):
            raise RegistryError("motifs are not pairwise non-isomorphic")
        if len({m.id for m in motifs}) != len(motifs):
            raise RegistryError("duplicate motif ids")
        for m in motifs:
            if not is_connected(encode(m.edges)):
                raise RegistryError(f"motif {m.id} is not connected")
        self.motifs = tuple(motifs)
        self.directed = motifs[0].directed
        self.codes = np.array(codes, dtype=np.int64)
        lookup = np.full(64, -1, dtype=np.int64)
        lookup[self.codes] = np.arange(len(codes))
        # raw 6-bit code -> motif position, -1 when not in the registry
        self.raw_lookup = lookup[CANONICAL_TABLE]

    def __len__(self):
        return len(self.motifs)

    def __iter__(self):
        return iter(self.motifs)

    def __getitem__(self, i):
        return self.motifs[i]

    def __repr__(self):
        inner = ", ".join(f"{m.id}:{m.name or m.code}" for m in self.motifs)
        return f"MotifRegistry(directed={self.directed}, [{inner}])"

    @property
    def ids(self):
        return [m.id for m in self.motifs]

    def position(self, motif_id) -> int:
        if isinstance(motif_id, (int, np.integer)):
            return int(motif_id)
        return self.ids.index(motif_id)

    def to_json(self) -> list:
        return [m.to_json() for m in self.motifs]

    def checksum(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()


_DIRECTED = [
    ("chain", [(0, 1), (1, 2)]),
    ("convergent", [(0, 1), (2, 1)]),
    ("divergent", [(1, 0), (1, 2)]),
    ("feed_forward_loop", [(0, 1), (1, 2), (0, 2)]),
    ("cycle", [(0, 1), (1, 2), (2, 0)]),
]
_UNDIRECTED = [
    ("wedge", [(0, 1), (1, 2)]),
    ("triangle", [(0, 1), (1, 2), (0, 2)]),
]


def default_registry(directed: bool) -> MotifRegistry:
    """Directed: the five connected 3-node patterns without mutual edges.
    Undirected: wedge and triangle.  Ids are M1.. in canonical-code order,
    continuing with M6, M7 for the undirected set."""
    spec, offset = (_DIRECTED, 1) if directed else (_UNDIRECTED, 6)
    pats = sorted((make_pattern("", e, directed, name) for name, e in spec), key=lambda m: m.code)
    pats = [MotifPattern(f"M{offset + i}", m.edges, m.directed, m.name) for i, m in enumerate(pats)]
    return MotifRegistry(pats)


def load_registry(path) -> MotifRegistry:
    """Read a JSON array of ``{"id", "directed", "edges"[, "name"]}`` objects."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise RegistryError(f"{path}: expected a JSON array of motif patterns")
    return MotifRegistry([make_pattern(d["id"], d["edges"], d["directed"], d.get("name", ""))
                          for d in data])


def save_registry(reg: MotifRegistry, path) -> None:
    Path(path).write_text(json.dumps(reg.to_json(), indent=2) + "\n")
