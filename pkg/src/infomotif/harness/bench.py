"""Epoch wall-clock of the plain GCN and of motif-regularized training on BA graphs."""
from __future__ import annotations

import time

import numpy as np

from ..curriculum import TrainConfig, train
from ..graphstore import generate_split
from ..synthetic import barabasi_albert
from .experiments import prepare

WARMUP_EPOCHS = 3


def _steady(values, warmup):
    v = np.asarray(values[warmup:], dtype=np.float64)
    return float(np.median(v)), float(v.mean())


def bench_runtime(node_counts=(5000,), densities=(1, 2, 4, 8), *, q=20, hidden=(64, 64),
                  measured_epochs=3, warmup=WARMUP_EPOCHS, seed=0, num_features=32,
                  num_classes=4, train_ratio=0.4, dtype="float64", progress=None) -> list:
    """One row per (node count, attachment parameter).

    Times are milliseconds per epoch over the epochs after ``warmup``; both the
    median and the mean are reported.  ``mi_regularizer_ms`` is the part of the
    MI phase spent outside the base encoder (sampling, gating, encoding,
    discrimination and their gradients).
    """
    rows = []
    epochs = warmup + measured_epochs
    for n in node_counts:
        for m in densities:
            g = barabasi_albert(int(n), int(m), seed, num_features=num_features,
                                num_classes=num_classes)
            t0 = time.perf_counter()
            ws = prepare(g)
            enum_s = time.perf_counter() - t0
            split = generate_split(g, train_ratio, seed)
            common = dict(epochs=epochs, patience=epochs, q=q, hidden=hidden, seed=seed,
                          dtype=dtype, deterministic=False)
            base = train(g, None, None, TrainConfig(base_only=True, **common), split, adj=ws.adj)
            full = train(g, ws.index, ws.registry, TrainConfig(**common), split, adj=ws.adj)
            base_med, base_mean = _steady([r.wallclock_ms for r in base.history], warmup)
            full_med, full_mean = _steady([r.wallclock_ms for r in full.history], warmup)
            reg_med, _ = _steady([t.mi_regularizer * 1e3 for t in full.times], warmup)
            mib_med, _ = _steady([t.mi_base * 1e3 for t in full.times], warmup)
            row = {"nodes": int(n), "m": int(m), "edges": g.num_edges, "q": q,
                   "instances": int(sum(ws.index.totals().values())),
                   "enumerate_s": round(enum_s, 3),
                   "base_epoch_ms": base_med, "infomotif_epoch_ms": full_med,
                   "gap_ms": full_med - base_med,
                   "base_epoch_mean_ms": base_mean, "infomotif_epoch_mean_ms": full_mean,
                   "mi_regularizer_ms": reg_med, "mi_base_ms": mib_med}
            rows.append(row)
            if progress:
                progress(row)
    return rows
