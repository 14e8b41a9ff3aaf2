"""Compiled vs numpy gate kernels.

    python benchmarks/bench_kernels.py --qubits 12 16 20 --repeat 5

Times three workloads per register size: a single-qubit rotation on every
qubit, the same with one control, and a 2-layer classifier circuit. Each
backend is checked against the other before timing.
"""
import argparse
import csv
import sys
import time

import numpy as np

from qsmooth import backend
from qsmooth.qnn import ClassifierParams, classifier_circuit
from qsmooth.simulator import Circuit, apply_ops, cry, ry


def workloads(n):
    rng = np.random.default_rng(n)
    rotations = Circuit(n, [ry(float(rng.uniform(0, np.pi)), q) for q in range(n)])
    controlled = Circuit(n, [cry(float(rng.uniform(0, np.pi)), (q + 1) % n, q) for q in range(n)])
    layers = classifier_circuit(ClassifierParams.random(n, 2, seed=n, scale=np.pi))
    return {"ry-all": rotations, "cry-ring": controlled, "classifier-2L": layers}


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=(1, 2 ** n)) + 1j * rng.normal(size=(1, 2 ** n))
    return psi / np.linalg.norm(psi)


def best_time(kernels, circuit, psi, repeat, threads):
    best = float("inf")
    for _ in range(repeat):
        work = psi.copy()
        start = time.perf_counter()
        apply_ops(work, circuit, kernels=kernels, threads=threads)
        best = min(best, time.perf_counter() - start)
    return best, work


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--qubits", type=int, nargs="+", default=[10, 14, 18, 20])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--threads", type=int, default=None,
                        help="OpenMP threads for the compiled kernel (default: all cores)")
    parser.add_argument("--csv", help="also write the table here")
    args = parser.parse_args(argv)

    try:
        compiled = backend.get("cython")
    except ImportError:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
        return 1
    fallback = backend.get("numpy")
    threads = args.threads or backend.num_threads()

    rows = []
    print(f"{'qubits':>6} {'workload':>14} {'numpy ms':>10} {'cython ms':>10} "
          f"{'cython xT ms':>13} {'speedup':>8}")
    for n in args.qubits:
        psi = random_state(n, n)
        for name, circuit in workloads(n).items():
            t_np, ref = best_time(fallback, circuit, psi, args.repeat, 1)
            t_cy, out = best_time(compiled, circuit, psi, args.repeat, 1)
            t_mt, out_mt = best_time(compiled, circuit, psi, args.repeat, threads)
            err = max(np.abs(out - ref).max(), np.abs(out_mt - ref).max())
            if err > 1e-10:
                print(f"backends disagree on {name} at n={n}: max diff {err:.2e}")
                return 1
            rows.append({"qubits": n, "workload": name, "numpy_ms": 1e3 * t_np,
                         "cython_ms": 1e3 * t_cy, "cython_threads_ms": 1e3 * t_mt,
                         "threads": threads, "speedup": t_np / min(t_cy, t_mt)})
            r = rows[-1]
            print(f"{n:>6} {name:>14} {r['numpy_ms']:>10.3f} {r['cython_ms']:>10.3f} "
                  f"{r['cython_threads_ms']:>13.3f} {r['speedup']:>7.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
