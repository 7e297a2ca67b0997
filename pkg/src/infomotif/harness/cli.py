"""``infomotif`` command-line interface.

Subcommands: train, evaluate, split, motifs, ablate, quartiles, bench, gradcheck.
Each run writes ``manifest.json`` plus CSV / JSON-lines artifacts into ``--out``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..autodiff import CheckpointError, ContractError, using_dtype
from ..curriculum import LR_GRID, TrainConfig, evaluate, load_model
from ..graphstore import (DatasetFormatError, GraphIntegrityError, StratificationError,
                          generate_split, load_split, save_split)
from ..motifs import RegistryError
from .bench import bench_runtime
from .experiments import VARIANTS, RunManifest, prepare, run_one, run_seeds, summarize, write_csv
from .gradcheck import combined_loss_check
from .quartiles import STATISTICS, quartile_analysis

GRADCHECK_TOL = 1e-4


def _lr(value: str):
    if value == "grid":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a float or 'grid', got {value!r}") from None


def _dataset_flags(p, ratio=True):
    p.add_argument("--dataset", required=True, help="dataset directory or name under ./data")
    p.add_argument("--registry", help="motif registry JSON (default: built-in set)")
    if ratio:
        p.add_argument("--ratio", type=float, default=0.4, help="training fraction of labelled nodes")


def _training_flags(p):
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    p.add_argument("--q", type=int, default=20, help="motif samples per node and motif")
    p.add_argument("--lr", type=_lr, default=1e-3, help="learning rate, or 'grid' to select by validation")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--hidden", type=int, nargs="+", default=[256, 256])
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--dtype", choices=["float64", "float32"], default="float64")
    p.add_argument("--deterministic", action="store_true", help="pin BLAS threads for bit-identical runs")


def _ablation_flags(p):
    p.add_argument("--no-novelty", action="store_true", help="unit sample weights in the supervised loss")
    p.add_argument("--no-task-weights", action="store_true", help="unit motif weights in the MI loss")
    p.add_argument("--base-only", action="store_true", help="plain GCN without motif regularization")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infomotif", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train over one or more seeds")
    _dataset_flags(p)
    _training_flags(p)
    _ablation_flags(p)
    p.add_argument("--out", default="runs/train")

    p = sub.add_parser("evaluate", help="evaluate a saved checkpoint")
    _dataset_flags(p, ratio=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", help="split JSON (default: the one recorded with the checkpoint)")
    p.add_argument("--out", default="runs/evaluate")

    p = sub.add_parser("split", help="write stratified split files")
    _dataset_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--out", default="runs/splits")

    p = sub.add_parser("motifs", help="motif instance statistics")
    p.add_argument("action", choices=["count"])
    _dataset_flags(p, ratio=False)
    p.add_argument("--out", default="runs/motifs")

    p = sub.add_parser("ablate", help="full model and the three ablations over seeds")
    _dataset_flags(p)
    _training_flags(p)
    p.set_defaults(seeds=10)
    p.add_argument("--variants", nargs="+", choices=list(VARIANTS), default=list(VARIANTS))
    p.add_argument("--out", default="runs/ablate")

    p = sub.add_parser("quartiles", help="accuracy by quartiles of a node statistic")
    _dataset_flags(p)
    _training_flags(p)
    p.add_argument("--statistic", choices=[*STATISTICS, "both"], default="both")
    p.add_argument("--out", default="runs/quartiles")

    p = sub.add_parser("bench", help="epoch runtime on Barabasi-Albert graphs")
    p.add_argument("--nodes", type=int, nargs="+", default=[5000])
    p.add_argument("--densities", type=int, nargs="+", default=[1, 2, 4, 8])
    p.add_argument("--q", type=int, default=20)
    p.add_argument("--hidden", type=int, nargs="+", default=[64, 64])
    p.add_argument("--epochs", type=int, default=3, help="measured epochs after warm-up")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=["float64", "float32"], default="float64")
    p.add_argument("--out", default="runs/bench")

    p = sub.add_parser("gradcheck", help="finite-difference check of the full objective")
    p.add_argument("--toy", action="store_true", required=True, help="use the 12-node toy graph")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/gradcheck")
    return parser


def _config(args, **extra) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=1e-3 if args.lr == "grid" else args.lr,
        q=args.q, seed=args.seed, hidden=tuple(args.hidden), dropout=args.dropout,
        patience=args.patience, dtype=args.dtype, deterministic=args.deterministic,
        dataset=args.dataset, registry=args.registry,
        no_novelty=getattr(args, "no_novelty", False),
        no_task_weights=getattr(args, "no_task_weights", False),
        base_only=getattr(args, "base_only", False), **extra)


def _seeds(args):
    return list(range(args.seed, args.seed + args.seeds))


def _manifest(args, argv, config=None, ws=None, seeds=()):
    RunManifest(config=config.to_dict() if config else {},
                dataset_checksum=ws.dataset_checksum if ws else "",
                registry_checksum=ws.registry_checksum if ws else "",
                seeds=list(seeds), output_dir=str(args.out), command=list(argv),
                dataset=ws.dataset_path if ws else None).write()


def _print_row(row):
    print(f"{row['tag']} seed={row['seed']} lr={row['lr']:g} val={row['val_acc']:.4f} "
          f"test={row['test_acc']:.4f} epochs={row['epochs_run']} ({row['seconds']:.1f}s)", flush=True)


def cmd_train(args, argv):
    ws = prepare(args.dataset, args.registry)
    cfg = _config(args)
    seeds = _seeds(args)
    out = Path(args.out)
    _manifest(args, argv, cfg, ws, seeds)
    tag = "gcn" if cfg.base_only else "infomotif"
    rows = run_seeds(ws, cfg, args.ratio, seeds, out, tag,
                     LR_GRID if args.lr == "grid" else None, _print_row)
    write_csv(out / "summary.csv", rows)
    s = summarize(rows)
    print(f"test accuracy {100 * s['mean']:.2f} +/- {100 * s['std']:.2f} over {s['runs']} runs")
    return 0


def cmd_evaluate(args, argv):
    ws = prepare(args.dataset, args.registry)
    ckpt = Path(args.checkpoint)
    model, meta = load_model(ckpt, ws.registry)
    split_path = Path(args.split) if args.split else ckpt.parent / meta["extra"]["split"]
    split = load_split(split_path)
    cfg = TrainConfig.from_dict(meta["config"]) if meta.get("config") else None
    _manifest(args, argv, cfg, ws, [split.seed])
    with using_dtype(cfg.dtype if cfg else "float64"):
        m = evaluate(model, ws.graph, ws.index, split, ws.adj)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = {"checkpoint": str(ckpt), "split": str(split_path), **m.to_dict(),
              "recorded_test_acc": meta["extra"].get("test_acc")}
    (out / "evaluate.json").write_text(json.dumps(result, indent=2) + "\n")
    print(f"train={m.train_acc:.4f} val={m.val_acc:.4f} test={m.test_acc:.4f}")
    return 0


def cmd_split(args, argv):
    ws = prepare(args.dataset, args.registry)
    out = Path(args.out)
    seeds = _seeds(args)
    _manifest(args, argv, None, ws, seeds)
    for seed in seeds:
        split = generate_split(ws.graph, args.ratio, seed)
        save_split(split, out / f"split-{args.ratio:g}-{seed}.json")
    print(f"wrote {len(seeds)} splits to {out}")
    return 0


def cmd_motifs(args, argv):
    ws = prepare(args.dataset, args.registry)
    _manifest(args, argv, None, ws)
    counts = ws.index.count_matrix()
    rows = [{"motif": m.id, "name": m.name, "instances": len(inst),
             "nodes_covered": int((counts[:, t] > 0).sum()),
             "mean_per_node": float(counts[:, t].mean())}
            for t, (m, inst) in enumerate(zip(ws.registry, ws.index.per_motif))]
    write_csv(Path(args.out) / "motif_counts.csv", rows)
    for r in rows:
        print(f"{r['motif']:>4} {r['name']:<18} {r['instances']:>10} instances, "
              f"{r['nodes_covered']} nodes covered")
    return 0


def cmd_ablate(args, argv):
    ws = prepare(args.dataset, args.registry)
    seeds = _seeds(args)
    out = Path(args.out)
    _manifest(args, argv, _config(args), ws, seeds)
    all_rows, table = [], []
    for name in args.variants:
        cfg = _config(args)
        for k, v in VARIANTS[name].items():
            setattr(cfg, k, v)
        rows = run_seeds(ws, cfg, args.ratio, seeds, out / name, name,
                         LR_GRID if args.lr == "grid" else None, _print_row)
        all_rows += rows
        s = summarize(rows)
        table.append({"variant": name, "mean_test_acc": s["mean"], "std_test_acc": s["std"],
                      "runs": s["runs"]})
    write_csv(out / "ablation_runs.csv", all_rows)
    write_csv(out / "ablation.csv", table)
    for r in table:
        print(f"{r['variant']:<11} {100 * r['mean_test_acc']:.2f} +/- {100 * r['std_test_acc']:.2f}")
    return 0


def cmd_quartiles(args, argv):
    ws = prepare(args.dataset, args.registry)
    out = Path(args.out)
    cfg = _config(args)
    _manifest(args, argv, cfg, ws, [args.seed])
    split = generate_split(ws.graph, args.ratio, args.seed)
    _, full = run_one(ws, cfg, split, out, "infomotif")
    cfg.base_only = True
    _, base = run_one(ws, cfg, split, out, "gcn")
    stats = STATISTICS if args.statistic == "both" else (args.statistic,)
    for stat in stats:
        report = quartile_analysis({"infomotif": full.model, "gcn": base.model}, ws.graph, split,
                                   stat, ws.adj)
        write_csv(out / f"quartiles_{stat}.csv", report.rows)
        print(stat)
        for r in report.rows:
            print(f"  {r['bucket']} n={r['count']} [{r['low']:.3f}, {r['high']:.3f}] "
                  f"infomotif={r['acc_infomotif']:.4f} gcn={r['acc_gcn']:.4f}")
    return 0


def cmd_bench(args, argv):
    _manifest(args, argv, None, None, [args.seed])
    rows = bench_runtime(args.nodes, args.densities, q=args.q, hidden=tuple(args.hidden),
                         measured_epochs=args.epochs, seed=args.seed, dtype=args.dtype,
                         progress=lambda r: print(
                             f"n={r['nodes']} m={r['m']} base={r['base_epoch_ms']:.0f}ms "
                             f"infomotif={r['infomotif_epoch_ms']:.0f}ms "
                             f"regularizer={r['mi_regularizer_ms']:.0f}ms", flush=True))
    write_csv(Path(args.out) / "bench.csv", rows)
    return 0


def cmd_gradcheck(args, argv):
    _manifest(args, argv, None, None, [args.seed])
    reports = combined_loss_check(seed=args.seed)
    worst = max(r.max_rel_error for r in reports.values())
    rows = [{"loss": k, "max_rel_error": r.max_rel_error, "coords": r.coords_checked}
            for k, r in reports.items()]
    write_csv(Path(args.out) / "gradcheck.csv", rows)
    for r in rows:
        print(f"{r['loss']:<10} {r['max_rel_error']:.3e}")
    print(f"max relative error {worst:.3e}")
    return 0 if worst < GRADCHECK_TOL else 1


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "split": cmd_split, "motifs": cmd_motifs,
            "ablate": cmd_ablate, "quartiles": cmd_quartiles, "bench": cmd_bench,
            "gradcheck": cmd_gradcheck}

EXPECTED_ERRORS = (FileNotFoundError, DatasetFormatError, GraphIntegrityError, StratificationError,
                   RegistryError, CheckpointError, ContractError, ValueError, FloatingPointError)


def cli(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, argv)
    except EXPECTED_ERRORS as exc:
        print(f"infomotif {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())
