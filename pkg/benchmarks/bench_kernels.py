"""Compare the compiled and pure-Python traversal kernels.

    python benchmarks/bench_kernels.py [--nodes 20000] [--degree 8] [--repeat 5]

Prints the best-of-``repeat`` time per call and the speed-up for each kernel.
"""
import argparse
import timeit

import numpy as np

from specaug import kernels
from specaug.graph import from_edge_pairs


def workloads(g, rng):
    args = (g.row_offsets, g.col_indices)
    n = g.num_nodes
    nodes = rng.choice(n, size=min(256, n), replace=False)
    ru, su = rng.random(256), rng.random(256)
    return {
        "bfs_ball(r=2)": lambda k: k.bfs_ball(*args, 0, 2),
        "random_walk_visit(256)": lambda k: k.random_walk_visit(*args, 0, ru, su, 0.8, 256),
        "induced_csr(256)": lambda k: k.induced_csr(*args, nodes),
        "component_labels": lambda k: k.component_labels(*args),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=20000)
    ap.add_argument("--degree", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    m = args.nodes * args.degree // 2
    g = from_edge_pairs(rng.integers(0, args.nodes, size=(m, 2)), args.nodes)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; timing the Python backend only")
    print(f"graph: {g.num_nodes} nodes, {g.num_edges} edges")
    print(f"{'kernel':<26}" + "".join(f"{b:>14}" for b in backends) + "   speed-up")
    for name, fn in workloads(g, rng).items():
        times = {}
        for b in backends:
            k = kernels.get_backend(b)
            number = 1 if name == "component_labels" else 20
            best = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat))
            times[b] = best / number
        row = "".join(f"{times[b] * 1e3:>12.3f}ms" for b in backends)
        ratio = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<26}{row}   {ratio:8.1f}x")


if __name__ == "__main__":
    main()
