"""Accuracy of test nodes bucketed by quartiles of a per-node statistic."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..curriculum import predict_proba

log = logging.getLogger(__name__)

STATISTICS = ("label_fraction", "attribute_diversity")


def _two_hop_mask(g) -> sp.csr_matrix:
    """Boolean CSR: entry (v, u) set iff ``u != v`` lies within two undirected hops of ``v``."""
    r = (g.und_adj + sp.identity(g.num_nodes, format="csr")).astype(bool).astype(np.int32)
    two = (r @ r).tocsr()
    two.setdiag(0)
    two.eliminate_zeros()
    two.data[:] = 1
    return two


def label_fraction(g, train_nodes, nodes=None) -> np.ndarray:
    """Share of labelled training nodes among each node's two-hop neighbours (0 if isolated)."""
    nodes = np.arange(g.num_nodes) if nodes is None else np.asarray(nodes, dtype=np.int64)
    mask = _two_hop_mask(g)[nodes]
    is_train = np.zeros(g.num_nodes)
    is_train[np.asarray(train_nodes, dtype=np.int64)] = 1.0
    size = np.asarray(mask.sum(axis=1)).ravel()
    hits = mask @ is_train
    return np.divide(hits, size, out=np.zeros(len(nodes)), where=size > 0)


def attribute_diversity(g, nodes=None) -> np.ndarray:
    """Mean cosine distance between a node's features and each two-hop neighbour's.

    Rows of zeros are at distance 1 from everything; isolated nodes get 0.
    """
    nodes = np.arange(g.num_nodes) if nodes is None else np.asarray(nodes, dtype=np.int64)
    x = g.features
    x = sp.csr_matrix(x) if sp.issparse(x) else np.asarray(x)
    norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel() if sp.issparse(x)
                    else (x * x).sum(axis=1))
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    xn = sp.diags(inv) @ x if sp.issparse(x) else x * inv[:, None]
    mask = _two_hop_mask(g)[nodes]
    size = np.asarray(mask.sum(axis=1)).ravel()
    neigh_sum = mask @ xn
    own = xn[nodes]
    if sp.issparse(own):
        sims = np.asarray(own.multiply(neigh_sum).sum(axis=1)).ravel()
    else:
        sims = (np.asarray(own) * np.asarray(neigh_sum)).sum(axis=1)
    return np.divide(size - sims, size, out=np.zeros(len(nodes)), where=size > 0)


def quartile_buckets(values, nodes):
    """Split ``nodes`` into four rank buckets of ``values`` (sizes differ by at most one).

    Ties are ordered by node id.  A constant statistic yields a single bucket.
    """
    values = np.asarray(values, dtype=np.float64)
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) and np.all(values == values[0]):
        log.warning("statistic is constant over %d nodes; reporting a single bucket", len(nodes))
        return [nodes]
    order = np.lexsort((nodes, values))
    return [nodes[part] for part in np.array_split(order, 4)]


@dataclass
class QuartileReport:
    statistic: str
    rows: list = field(default_factory=list)  # one dict per bucket

    @property
    def counts(self) -> list:
        return [r["count"] for r in self.rows]

    def accuracy(self, model: str) -> list:
        return [r[f"acc_{model}"] for r in self.rows]


def quartile_analysis(models: dict, g, split, statistic="label_fraction", adj=None) -> QuartileReport:
    """Bucket the test nodes by ``statistic`` and report each model's accuracy per bucket.

    ``models`` maps a display name (for example ``infomotif`` and ``gcn``) to a
    trained model or to a precomputed probability matrix.
    """
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}, got {statistic!r}")
    test = np.asarray(split.test, dtype=np.int64)
    if statistic == "label_fraction":
        values = label_fraction(g, split.train, test)
    else:
        values = attribute_diversity(g, test)
    value_of = dict(zip(test.tolist(), values))
    preds = {}
    for name, m in models.items():
        probs = m if isinstance(m, np.ndarray) else predict_proba(m, g, adj)
        preds[name] = probs.argmax(axis=1)
    report = QuartileReport(statistic)
    buckets = quartile_buckets(values, test)
    for i, bucket in enumerate(buckets):
        vals = [value_of[v] for v in bucket.tolist()]
        row = {"bucket": f"Q{i + 1}", "count": len(bucket),
               "low": float(min(vals)) if vals else float("nan"),
               "high": float(max(vals)) if vals else float("nan")}
        for name, pred in preds.items():
            row[f"acc_{name}"] = float(np.mean(pred[bucket] == g.labels[bucket])) if len(bucket) else float("nan")
        report.rows.append(row)
    return report
