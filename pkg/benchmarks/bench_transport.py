"""Benchmark the compiled transport kernel against the pure-Python twin.

Kernel selection happens once at import, so each kernel runs in its own
subprocess (SEMSEARCH_TRANSPORT_KERNEL=compiled / python) over the same
seeded instances.  The parent compares wall time per solve and checks the
two kernels produced bitwise-identical distances.

    python3 benchmarks/bench_transport.py
    python3 benchmarks/bench_transport.py --sizes 4,16 --instances 50
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

SEED = 1723
REPEATS = 3


def build_instances(size: int, count: int):
    from semsearch.transport import CostMatrix, metric_cdist
    from semsearch.weighting import NbowVector

    rng = np.random.default_rng(SEED + size)
    instances = []
    for _ in range(count):
        src = tuple(f"a{j:03d}" for j in range(size))
        dst = tuple(f"b{j:03d}" for j in range(size))
        cost = CostMatrix(
            src,
            dst,
            metric_cdist(rng.normal(size=(size, 50)), rng.normal(size=(size, 50)), "euclidean"),
        )
        counts_a = rng.integers(1, 6, size=size)
        counts_b = rng.integers(1, 6, size=size)
        a = NbowVector(src, counts_a / counts_a.sum())
        b = NbowVector(dst, counts_b / counts_b.sum())
        instances.append((a, b, cost))
    return instances


def run_worker(sizes, count):
    from semsearch.transport import kernel_name, wmd

    report = {"kernel": kernel_name(), "sizes": []}
    for size in sizes:
        instances = build_instances(size, count)
        best = float("inf")
        objectives = None
        for _ in range(REPEATS):
            start = time.perf_counter()
            objectives = [wmd(a, b, cost)[0] for a, b, cost in instances]
            best = min(best, time.perf_counter() - start)
        report["sizes"].append(
            {
                "size": size,
                "instances": count,
                "us_per_solve": best / count * 1e6,
                # hex floats so the parent can compare results bitwise
                "objectives": [value.hex() for value in objectives],
            }
        )
    json.dump(report, sys.stdout)


def launch(kernel: str, args) -> dict:
    env = dict(os.environ, SEMSEARCH_TRANSPORT_KERNEL=kernel)
    cmd = [
        sys.executable,
        os.path.abspath(__file__),
        "--worker",
        "--sizes", ",".join(str(s) for s in args.sizes),
        "--instances", str(args.instances),
    ]
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(proc.stderr.strip().splitlines()[-1] if proc.stderr else "worker failed")
    return json.loads(proc.stdout)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="4,8,16,32",
                        help="comma-separated unique-token counts per side")
    parser.add_argument("--instances", type=int, default=100, help="instances per size")
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    args.sizes = [int(s) for s in str(args.sizes).split(",")]

    if args.worker:
        run_worker(args.sizes, args.instances)
        return 0

    results = {}
    for kernel in ("compiled", "python"):
        try:
            results[kernel] = launch(kernel, args)
        except RuntimeError as exc:
            print(f"{kernel} kernel unavailable: {exc}")
    if not results:
        return 1

    print(f"\ntransport solve, {args.instances} instances per size, best of {REPEATS} runs\n")
    header = f"{'size':>6} " + "".join(f"{k + ' (us)':>16}" for k in results) + f"{'speedup':>10}  objectives"
    print(header)
    for i, size in enumerate(args.sizes):
        rows = {k: r["sizes"][i] for k, r in results.items()}
        cells = "".join(f"{rows[k]['us_per_solve']:>16.1f}" for k in results)
        if len(rows) == 2:
            speedup = rows["python"]["us_per_solve"] / rows["compiled"]["us_per_solve"]
            agree = rows["compiled"]["objectives"] == rows["python"]["objectives"]
            tail = f"{speedup:>9.1f}x  {'bitwise equal' if agree else 'DIFFER'}"
            if not agree:
                print(f"{size:>6}x{cells}{tail}")
                print("\nkernels disagree; this is a bug, not a benchmark result")
                return 1
        else:
            tail = f"{'-':>10}  single kernel"
        print(f"{size:>6} {cells}{tail}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
