"""Compare the compiled and pure-Python motif enumeration kernels.

Usage::

    python benchmarks/bench_enumeration.py [--repeats 3] [--csv out.csv]

Both kernels must produce identical triples and codes; the script checks
this before reporting timings.
"""
import argparse
import csv
import sys
import time

import numpy as np

from infomotif.graphstore import load_dataset
from infomotif.motifs import BACKEND, connected_triples
from infomotif.synthetic import barabasi_albert, erdos_renyi


def workloads():
    yield "er-500-p0.02", erdos_renyi(500, 0.02, seed=0)
    yield "er-2000-p0.005-directed", erdos_renyi(2000, 0.005, seed=0, directed=True)
    yield "ba-5000-m2", barabasi_albert(5000, 2, seed=0)
    yield "ba-5000-m4", barabasi_albert(5000, 4, seed=0)
    try:
        yield "cora", load_dataset("data/cora")
    except (FileNotFoundError, OSError):
        pass


def best_time(fn, repeats):
    times = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    if BACKEND != "cython":
        print("compiled kernel not available; build with `pip install -e . --no-build-isolation`")
        return 1
    rows = []
    print(f"{'graph':<26}{'triples':>10}{'python s':>11}{'cython s':>11}{'speedup':>9}")
    for name, g in workloads():
        t_py, (tri_py, code_py) = best_time(lambda: connected_triples(g, "python"), args.repeats)
        t_cy, (tri_cy, code_cy) = best_time(lambda: connected_triples(g, "cython"), args.repeats)
        assert np.array_equal(tri_py, tri_cy) and np.array_equal(code_py, code_cy), name
        row = {"graph": name, "triples": len(tri_cy), "python_s": t_py, "cython_s": t_cy,
               "speedup": t_py / t_cy}
        rows.append(row)
        print(f"{name:<26}{row['triples']:>10}{t_py:>11.3f}{t_cy:>11.4f}{row['speedup']:>8.1f}x",
              flush=True)
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
