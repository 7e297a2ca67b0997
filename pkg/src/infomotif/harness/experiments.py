"""Shared plumbing for multi-seed runs: inputs, manifests, result rows and CSV output."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..curriculum import LR_GRID, TrainConfig, TrainResult, replace_config, save_model, train
from ..graphstore import (AttributedGraph, dataset_checksum, generate_split, load_dataset,
                          normalized_adjacency, resolve_dataset, save_split)
from ..motifs import default_registry, enumerate_instances, load_registry

# ablation variants, named after what they switch off
VARIANTS = {
    "full": {},
    "no_novelty": {"no_novelty": True},
    "no_task": {"no_task_weights": True},
    "neither": {"no_novelty": True, "no_task_weights": True},
}


@dataclass
class Workspace:
    """A loaded dataset with its motif registry, instance index and adjacency."""
    graph: AttributedGraph
    registry: object
    index: object
    adj: object
    dataset_path: str | None = None
    dataset_checksum: str = ""

    @property
    def registry_checksum(self) -> str:
        return self.registry.checksum()


def prepare(dataset, registry_path=None) -> Workspace:
    """Load ``dataset`` (directory or bare name) and enumerate its motif instances."""
    if isinstance(dataset, AttributedGraph):
        g, path, checksum = dataset, None, ""
    else:
        path = resolve_dataset(dataset)
        g = load_dataset(path)
        checksum = dataset_checksum(path)
    registry = load_registry(registry_path) if registry_path else default_registry(g.directed)
    index = enumerate_instances(g, registry)
    return Workspace(g, registry, index, normalized_adjacency(g),
                     None if path is None else str(path), checksum)


@dataclass
class RunManifest:
    config: dict
    dataset_checksum: str
    registry_checksum: str
    seeds: list
    output_dir: str
    command: list = field(default_factory=list)
    dataset: str | None = None
    created: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S"))

    def write(self, path=None) -> Path:
        path = Path(path or Path(self.output_dir) / "manifest.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def run_one(ws: Workspace, config: TrainConfig, split, out_dir=None, tag="run"):
    """Train once; returns ``(row, result)``.  With ``out_dir`` also writes the
    epoch log, the checkpoint and the split."""
    log_path = ckpt = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{tag}-seed{config.seed}"
        log_path, ckpt = out / f"{stem}.jsonl", out / f"{stem}.npz"
        save_split(split, out / f"{stem}.split.json")
    start = time.perf_counter()
    res: TrainResult = train(ws.graph, None if config.base_only else ws.index, ws.registry,
                             config, split, adj=ws.adj, log_path=log_path)
    row = {"tag": tag, "seed": config.seed, "lr": config.lr, "q": config.q,
           "train_ratio": split.train_ratio, "train_acc": res.metrics.train_acc,
           "val_acc": res.metrics.val_acc, "test_acc": res.metrics.test_acc,
           "best_epoch": res.best_epoch, "epochs_run": len(res.history),
           "seconds": round(time.perf_counter() - start, 3)}
    if ckpt is not None:
        save_model(ckpt, res.model, config, {"test_acc": res.metrics.test_acc,
                                             "val_acc": res.metrics.val_acc,
                                             "split": f"{ckpt.stem}.split.json",
                                             "dataset": ws.dataset_path})
    return row, res


def select_lr(ws: Workspace, config: TrainConfig, split, grid=LR_GRID, out_dir=None, tag="run"):
    """Train at every learning rate of ``grid``; keep the best validation accuracy.

    Ties go to the earlier grid entry.  Returns ``(row, result)`` of the winner.
    """
    best = None
    for lr in grid:
        row, res = run_one(ws, replace_config(config, lr=lr), split, None, tag)
        if best is None or row["val_acc"] > best[0]["val_acc"]:
            best = (row, res)
    if out_dir is not None:  # rerun the winner to write its artifacts
        return run_one(ws, replace_config(config, lr=best[0]["lr"]), split, out_dir, tag)
    return best


def run_seeds(ws: Workspace, config: TrainConfig, ratio: float, seeds, out_dir=None, tag="run",
              lr_grid=None, progress=None):
    """One run per seed; split and initialisation both use the seed."""
    rows = []
    for seed in seeds:
        split = generate_split(ws.graph, ratio, seed)
        cfg = replace_config(config, seed=int(seed))
        if lr_grid:
            row, _ = select_lr(ws, cfg, split, lr_grid, out_dir, tag)
        else:
            row, _ = run_one(ws, cfg, split, out_dir, tag)
        rows.append(row)
        if progress:
            progress(row)
    return rows


def summarize(rows, key="test_acc") -> dict:
    vals = np.array([r[key] for r in rows], dtype=np.float64)
    return {"mean": float(vals.mean()), "std": float(vals.std()), "runs": len(vals)}


def write_csv(path, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("")
        return path
    fields = list(rows[0])
    for r in rows[1:]:
        fields += [k for k in r if k not in fields]
    with path.open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    return path
