"""Attributed graph storage, dataset I/O, GCN adjacency and data splits.

A dataset directory holds four canonical files::

    meta.json      {"name": ..., "directed": bool, "num_classes": int,
                    optional "num_nodes": int, optional "features": "identity"}
    edges.tsv      "src<TAB>dst" per line
    features.tsv   "row<TAB>col<TAB>value" triplets (sparse), or
    features.csv   one dense comma-separated row per node
    labels.tsv     "node<TAB>class" per line (unlisted nodes are unlabeled)

Loading keeps only the largest (weakly) connected component.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

__all__ = [
    "AttributedGraph",
    "DatasetFormatError",
    "GraphIntegrityError",
    "NormalizedAdjacency",
    "Split",
    "StratificationError",
    "dataset_checksum",
    "generate_split",
    "khop_ball",
    "khop_neighborhood",
    "largest_component",
    "load_dataset",
    "load_split",
    "normalized_adjacency",
    "resolve_dataset",
    "save_dataset",
    "save_split",
]


class DatasetFormatError(ValueError):
    """A dataset file is missing or cannot be parsed."""

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class GraphIntegrityError(ValueError):
    """Edges or labels reference nodes that do not exist."""


class StratificationError(ValueError):
    """A class has too few labeled nodes for a stratified split."""


def _csr(num_nodes, rows, cols):
    data = np.ones(len(rows), dtype=np.int8)
    m = sp.csr_matrix((data, (rows, cols)), shape=(num_nodes, num_nodes))
    m.sum_duplicates()
    m.sort_indices()
    return m


class AttributedGraph:
    """Immutable simple graph with node features and optional labels.

    Node ids are ``0..num_nodes-1``.  Undirected graphs store each edge once
    with ``src < dst``; directed graphs store edges as given.  Self-loops and
    duplicate edges are dropped at construction and counted.
    """

    def __init__(self, num_nodes, edges, features=None, labels=None, *,
                 directed=False, num_classes=None, name="graph"):
        self.num_nodes = int(num_nodes)
        self.directed = bool(directed)
        self.name = name
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= self.num_nodes):
            bad = edges[(edges < 0).any(1) | (edges >= self.num_nodes).any(1)][0]
            raise GraphIntegrityError(
                f"edge {tuple(bad)} references a node outside 0..{self.num_nodes - 1}")

        loops = edges[:, 0] == edges[:, 1]
        self.dropped_self_loops = int(loops.sum())
        edges = edges[~loops]
        if not self.directed:
            edges = np.sort(edges, axis=1)
        uniq = np.unique(edges, axis=0) if len(edges) else edges
        self.dropped_duplicates = len(edges) - len(uniq)
        if self.dropped_self_loops or self.dropped_duplicates:
            log.warning("%s: dropped %d self-loops and %d duplicate edges", name,
                        self.dropped_self_loops, self.dropped_duplicates)
        self.edges = uniq
        self.edges.setflags(write=False)

        if features is None:
            features = sp.identity(self.num_nodes, format="csr", dtype=np.float64)
        if sp.issparse(features):
            features = sp.csr_matrix(features, dtype=np.float64)
            features.sort_indices()
        else:
            features = np.ascontiguousarray(features, dtype=np.float64)
            features.setflags(write=False)
        if features.shape[0] != self.num_nodes:
            raise GraphIntegrityError(
                f"feature matrix has {features.shape[0]} rows, expected {self.num_nodes}")
        self.features = features

        if labels is None:
            labels = np.full(self.num_nodes, -1, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (self.num_nodes,):
            raise GraphIntegrityError("labels must have one entry per node")
        if num_classes is None:
            num_classes = int(labels.max()) + 1 if (labels >= 0).any() else 0
        self.num_classes = int(num_classes)
        if ((labels >= self.num_classes) | (labels < -1)).any():
            raise GraphIntegrityError(f"class ids must lie in [0, {self.num_classes})")
        labels.setflags(write=False)
        self.labels = labels

    def __repr__(self):
        return (f"AttributedGraph(name={self.name!r}, nodes={self.num_nodes}, "
                f"edges={self.num_edges}, directed={self.directed}, "
                f"features={self.num_features}, classes={self.num_classes})")

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_features(self):
        return self.features.shape[1]

    @cached_property
    def out_adj(self):
        """CSR of out-neighbors (both directions for undirected graphs)."""
        if self.directed:
            return _csr(self.num_nodes, self.edges[:, 0], self.edges[:, 1])
        return self.und_adj

    @cached_property
    def in_adj(self):
        """CSR of in-neighbors."""
        if self.directed:
            return _csr(self.num_nodes, self.edges[:, 1], self.edges[:, 0])
        return self.und_adj

    @cached_property
    def und_adj(self):
        """CSR of the undirected view (edge if either direction exists)."""
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        m = _csr(self.num_nodes, rows, cols)
        m.data[:] = 1
        return m

    @cached_property
    def degrees(self):
        """Degrees in the undirected view."""
        return np.diff(self.und_adj.indptr)

    @cached_property
    def labeled_nodes(self):
        return np.flatnonzero(self.labels >= 0)

    def neighbors(self, v):
        a = self.und_adj
        return a.indices[a.indptr[v]:a.indptr[v + 1]]

    def dense_features(self):
        f = self.features
        return f.toarray() if sp.issparse(f) else np.array(f)

    def subgraph(self, nodes):
        """Induced subgraph on ``nodes`` (relabelled in the given order)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        remap = np.full(self.num_nodes, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        e = remap[self.edges]
        e = e[(e >= 0).all(1)]
        return AttributedGraph(len(nodes), e, self.features[nodes], self.labels[nodes],
                               directed=self.directed, num_classes=self.num_classes,
                               name=self.name)

    def permuted(self, perm):
        """Relabel nodes so that old node ``v`` becomes ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return AttributedGraph(self.num_nodes, perm[self.edges], self.features[inv],
                               self.labels[inv], directed=self.directed,
                               num_classes=self.num_classes, name=self.name)

    def with_features(self, features):
        return AttributedGraph(self.num_nodes, self.edges, features, self.labels,
                               directed=self.directed, num_classes=self.num_classes,
                               name=self.name)


def largest_component(g: AttributedGraph) -> AttributedGraph:
    """Restrict to the largest weakly connected component.

    Ties go to the component containing the smallest node id; node order is
    preserved.
    """
    ncomp, comp = connected_components(g.und_adj, directed=False)
    if ncomp <= 1:
        return g
    sizes = np.bincount(comp)
    best = int(np.argmax(sizes))  # first maximum = smallest representative id
    return g.subgraph(np.flatnonzero(comp == best))


# ---------------------------------------------------------------- file I/O

def _read_int_rows(path, ncols):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != ncols:
                raise DatasetFormatError(path, f"expected {ncols} columns, got {len(parts)}", lineno)
            try:
                rows.append([int(p) for p in parts])
            except ValueError:
                raise DatasetFormatError(path, f"non-integer field in {line!r}", lineno) from None
    return np.asarray(rows, dtype=np.int64).reshape(-1, ncols)


def _read_sparse_features(path):
    rows, cols, vals = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DatasetFormatError(path, "expected row, col, value", lineno)
            try:
                rows.append(int(parts[0]))
                cols.append(int(parts[1]))
                vals.append(float(parts[2]))
            except ValueError:
                raise DatasetFormatError(path, f"malformed triplet {line!r}", lineno) from None
    return np.asarray(rows, np.int64), np.asarray(cols, np.int64), np.asarray(vals, np.float64)


def _read_dense_features(path):
    out = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(x) for x in line.split(",")]
            except ValueError:
                raise DatasetFormatError(path, "non-numeric value", lineno) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetFormatError(path, f"expected {width} columns, got {len(row)}", lineno)
            out.append(row)
    return np.asarray(out, dtype=np.float64)


def load_dataset(path, *, restrict_to_lcc=True) -> AttributedGraph:
    """Load a canonical dataset directory (see module docstring)."""
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.is_file():
        raise DatasetFormatError(meta_path, "missing meta descriptor")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(meta_path, exc.msg, exc.lineno) from None
    for key in ("name", "directed", "num_classes"):
        if key not in meta:
            raise DatasetFormatError(meta_path, f"missing key {key!r}")

    edges_path = path / "edges.tsv"
    if not edges_path.is_file():
        raise DatasetFormatError(edges_path, "missing edge list")
    edges = _read_int_rows(edges_path, 2)

    labels_path = path / "labels.tsv"
    if not labels_path.is_file():
        raise DatasetFormatError(labels_path, "missing label file")
    lab = _read_int_rows(labels_path, 2)

    sparse_path, dense_path = path / "features.tsv", path / "features.csv"
    feat_kind = meta.get("features")
    if sparse_path.is_file():
        frows, fcols, fvals = _read_sparse_features(sparse_path)
        dense = None
    elif dense_path.is_file():
        dense = _read_dense_features(dense_path)
        frows = None
    elif feat_kind == "identity":
        frows = dense = None
    else:
        raise DatasetFormatError(sparse_path, "missing feature file")

    if "num_nodes" in meta:
        n = int(meta["num_nodes"])
    else:
        n = 0
        for arr in (edges.ravel(), lab[:, 0], frows if frows is not None else ()):
            if len(arr):
                n = max(n, int(np.max(arr)) + 1)
        if dense is not None:
            n = max(n, dense.shape[0])
    if len(lab) and (lab[:, 0].min() < 0 or lab[:, 0].max() >= n):
        raise GraphIntegrityError(f"{labels_path}: label for a node outside 0..{n - 1}")
    labels = np.full(n, -1, dtype=np.int64)
    labels[lab[:, 0]] = lab[:, 1]

    if frows is not None:
        width = int(meta.get("num_features", fcols.max() + 1 if len(fcols) else 0))
        if len(frows) and (frows.max() >= n or frows.min() < 0):
            raise GraphIntegrityError(f"{sparse_path}: feature row outside 0..{n - 1}")
        features = sp.csr_matrix((fvals, (frows, fcols)), shape=(n, width))
    elif dense is not None:
        if dense.shape[0] != n:
            raise GraphIntegrityError(f"{dense_path}: {dense.shape[0]} rows for {n} nodes")
        features = dense
    else:
        features = None  # identity, built by AttributedGraph

    g = AttributedGraph(n, edges, features, labels, directed=bool(meta["directed"]),
                        num_classes=int(meta["num_classes"]), name=str(meta["name"]))
    if restrict_to_lcc:
        g = largest_component(g)
    return g


def save_dataset(g: AttributedGraph, path) -> None:
    """Write ``g`` in the canonical layout; :func:`load_dataset` reads it back."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {"name": g.name, "directed": g.directed, "num_classes": g.num_classes,
            "num_nodes": g.num_nodes}
    with open(path / "edges.tsv", "w") as fh:
        for u, v in g.edges:
            fh.write(f"{u}\t{v}\n")
    with open(path / "labels.tsv", "w") as fh:
        for v in g.labeled_nodes:
            fh.write(f"{v}\t{g.labels[v]}\n")
    for stale in ("features.tsv", "features.csv"):
        (path / stale).unlink(missing_ok=True)
    if sp.issparse(g.features):
        coo = g.features.tocoo()
        meta["num_features"] = int(g.features.shape[1])
        order = np.lexsort((coo.col, coo.row))
        with open(path / "features.tsv", "w") as fh:
            for r, c, x in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r}\t{c}\t{float(x)!r}\n")
    else:
        with open(path / "features.csv", "w") as fh:
            for row in g.features:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
    (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def dataset_checksum(path) -> str:
    """SHA-256 over the canonical files of a dataset directory."""
    h = hashlib.sha256()
    for name in ("meta.json", "edges.tsv", "features.tsv", "features.csv", "labels.tsv"):
        f = Path(path) / name
        if f.is_file():
            h.update(name.encode())
            h.update(f.read_bytes())
    return h.hexdigest()


# ------------------------------------------------------------- adjacency

@dataclass(frozen=True)
class NormalizedAdjacency:
    matrix: sp.csr_matrix
    kind: str = "sym_norm_with_self_loops"


def normalized_adjacency(g: AttributedGraph) -> NormalizedAdjacency:
    """``D^-1/2 (A + I) D^-1/2`` on the undirected view, ``d = degree + 1``."""
    a = g.und_adj.astype(np.float64) + sp.identity(g.num_nodes, format="csr")
    d = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(d)
    scale = sp.diags(inv_sqrt)
    m = sp.csr_matrix(scale @ a @ scale)
    m.sort_indices()
    return NormalizedAdjacency(m)


# ------------------------------------------------------------------ BFS

def khop_neighborhood(g: AttributedGraph, v: int, k: int) -> set[int]:
    """Nodes within ``k`` undirected hops of ``v`` (including ``v``)."""
    if not 0 <= v < g.num_nodes:
        raise IndexError(f"node {v} out of range for {g.num_nodes} nodes")
    if k < 0:
        raise ValueError("k must be non-negative")
    return set(khop_ball(g, [v], k).tolist())


def khop_ball(g: AttributedGraph, sources, k: int) -> np.ndarray:
    """Sorted ids of all nodes within ``k`` hops of any source node."""
    indptr, indices = g.und_adj.indptr, g.und_adj.indices
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    queue = deque()
    for s in sources:
        if dist[s] < 0:
            dist[s] = 0
            queue.append(int(s))
    while queue:
        u = queue.popleft()
        if dist[u] == k:
            continue
        for w in indices[indptr[u]:indptr[u + 1]]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(int(w))
    return np.flatnonzero(dist >= 0)


# ---------------------------------------------------------------- splits

@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int
    train_ratio: float
    meta: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {"train": self.train.tolist(), "val": self.val.tolist(),
                "test": self.test.tolist(), "seed": self.seed,
                "train_ratio": self.train_ratio}


def _round(x):
    return int(np.floor(x + 0.5))


def _apportion(total, quotas):
    """Largest-remainder rounding of ``quotas`` to integers summing to ``total``."""
    base = np.floor(quotas).astype(np.int64)
    rest = total - base.sum()
    order = np.argsort(-(quotas - base), kind="stable")
    base[order[:rest]] += 1
    return base


VAL_FRACTION = 0.2


def generate_split(g: AttributedGraph, train_ratio: float, seed: int) -> Split:
    """Stratified train/val/test split of the labeled nodes.

    ``|train| = round(train_ratio * L)`` and ``|val| = round(0.2 * L)``; the
    per-class shares are apportioned by largest remainder, so every class
    deviates from the target fraction by less than one node.
    """
    if not 0.0 < train_ratio < 1.0 - VAL_FRACTION:
        raise ValueError(f"train_ratio must lie in (0, {1 - VAL_FRACTION}), got {train_ratio}")
    labeled = g.labeled_nodes
    classes, counts = np.unique(g.labels[labeled], return_counts=True)
    if (counts < 3).any():
        c = classes[np.argmax(counts < 3)]
        raise StratificationError(f"class {c} has fewer than 3 labeled nodes")
    total = len(labeled)
    n_train = _apportion(_round(train_ratio * total), train_ratio * counts)
    n_val = _apportion(_round(VAL_FRACTION * total), VAL_FRACTION * counts)
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for c, nt, nv in zip(classes, n_train, n_val):
        members = rng.permutation(labeled[g.labels[labeled] == c])
        train.append(members[:nt])
        val.append(members[nt:nt + nv])
        test.append(members[nt + nv:])
    return Split(np.sort(np.concatenate(train)), np.sort(np.concatenate(val)),
                 np.sort(np.concatenate(test)), int(seed), float(train_ratio))


def save_split(split: Split, path) -> None:
    Path(path).write_text(json.dumps(split.to_json()) + "\n")


def load_split(path) -> Split:
    d = json.loads(Path(path).read_text())
    return Split(np.asarray(d["train"], np.int64), np.asarray(d["val"], np.int64),
                 np.asarray(d["test"], np.int64), int(d["seed"]), float(d["train_ratio"]))


def resolve_dataset(name_or_path) -> Path:
    """Return a dataset directory given a path or a bare name.

    Bare names are looked up under ``$INFOMOTIF_DATA`` and then ``./data``.
    """
    p = Path(name_or_path)
    if p.is_dir():
        return p
    roots = [os.environ.get("INFOMOTIF_DATA"), "data"]
    for root in filter(None, roots):
        cand = Path(root) / str(name_or_path)
        if cand.is_dir():
            return cand
    raise FileNotFoundError(
        f"dataset {name_or_path!r} not found (looked in $INFOMOTIF_DATA and ./data)")
