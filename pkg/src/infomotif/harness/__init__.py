"""Experiment orchestration, analyses, benchmarks and the command-line front end."""
from .bench import bench_runtime
from .experiments import (VARIANTS, RunManifest, Workspace, prepare, run_one, run_seeds,
                          select_lr, summarize, write_csv)
from .gradcheck import combined_loss_check, toy_graph
from .quartiles import QuartileReport, attribute_diversity, label_fraction, quartile_analysis

__all__ = [
    "VARIANTS", "QuartileReport", "RunManifest", "Workspace", "attribute_diversity",
    "bench_runtime", "combined_loss_check", "label_fraction", "prepare", "quartile_analysis",
    "run_one", "run_seeds", "select_lr", "summarize", "toy_graph", "write_csv",
]
