"""Time the compiled kernels against the pure-Python twins.

    python benchmarks/bench_kernels.py [--L 32] [--repeat 3]
"""

import argparse
import time

import numpy as np

from quenchxy import kernels
from quenchxy.dual_height import height_domain, potential_table
from quenchxy.graphs import build_box_lattice
from quenchxy.rng import stream


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(L):
    g = build_box_lattice(2, L, 1.0)
    indptr, indices, eid, _ = g.csr
    weight = np.ascontiguousarray(g.coupling[eid])
    phase = np.zeros(eid.size)
    order = np.arange(g.n_vertices, dtype=np.int64)
    theta0 = np.random.default_rng(0).uniform(0, 2 * np.pi, g.n_vertices)
    radius0 = np.ones(g.n_vertices)
    occ = (np.random.default_rng(1).random(g.n_vertices) < 0.75).astype(np.uint8)
    shape = np.array(g.meta["shape"], dtype=np.int64)
    dom = height_domain(2, 6)
    d_indptr, d_indices, d_type = dom.dual.csr
    table = np.zeros((3, potential_table(2, 1.0, 1.0).shape[1]))
    table[1:] = potential_table(2, 1.0, 1.0)

    def run(name, b, gen):
        if name == "heatbath_sweep":
            b.heatbath_sweep(indptr, indices, weight, phase, theta0.copy(), order, gen)
        elif name == "metropolis_sweep":
            b.metropolis_sweep(indptr, indices, weight, phase, theta0.copy(), order, 1.0, gen)
        elif name == "cluster_update x10":
            th = theta0.copy()
            for _ in range(10):
                b.cluster_update(indptr, indices, weight, th, gen)
        elif name == "fk_labels":
            b.fk_labels(g.n_vertices, g.eu, g.ev, g.coupling, theta0, 0.3, gen)
        elif name == "pregood_box":
            b.pregood_box(occ, shape, np.zeros(2, dtype=np.int64), int(shape[0]), 4)
        elif name == "height_sweep":
            b.height_sweep(d_indptr, d_indices, d_type, np.zeros(dom.dual.n_faces, dtype=np.int64), dom.free, table, 6, gen)
        elif name == "phi4_sweep":
            b.phi4_sweep(indptr, indices, weight, radius0.copy(), theta0.copy(), 1.0, 1.0, 0.0, 0.5, gen)

    names = [
        "heatbath_sweep",
        "metropolis_sweep",
        "cluster_update x10",
        "fk_labels",
        "pregood_box",
        "height_sweep",
        "phi4_sweep",
    ]
    return g.n_vertices, names, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=32, help="half-width of the square box")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    py = kernels.get_backend("python")
    cc = kernels.get_backend("compiled")
    n, names, run = cases(args.L)
    print(f"box {2 * args.L + 1}^2 = {n} sites, best of {args.repeat}")
    if cc is py:
        print("compiled extension missing; timing the Python backend only")
    print(f"{'kernel':<20}{'compiled ms':>14}{'python ms':>14}{'speedup':>10}")
    for name in names:
        tp = best_of(lambda: run(name, py, stream(0, "bench")), args.repeat)
        tc = best_of(lambda: run(name, cc, stream(0, "bench")), args.repeat) if cc is not py else float("nan")
        print(f"{name:<20}{1e3 * tc:>14.3f}{1e3 * tp:>14.3f}{tp / tc:>10.1f}")


if __name__ == "__main__":
    main()
