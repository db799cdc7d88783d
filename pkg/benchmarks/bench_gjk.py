"""Compiled vs pure GJK kernel timings on identical workloads.

Run as a script from the repository root:

    python benchmarks/bench_gjk.py [--pairs N] [--batch N] [--dims 2 3 6]

Both kernels see the same randomized polytope pairs (half overlapping,
half separated) and the same batched point-to-hull query.  Distances are
cross-checked and the worst discrepancy is printed next to the speedup,
so a kernel that got fast by being wrong shows its hand immediately.
"""

import argparse
import time

import numpy as np

from opaquereach.geometry import _gjk_py, backend_name
from opaquereach.geometry.gjk import _COMPILED_MAX_DIM

try:
    from opaquereach.geometry import _gjk_core
except ImportError:
    _gjk_core = None

EPS = 1e-10
REPEATS = 3


def make_pairs(rng, dim, count):
    pairs = []
    for i in range(count):
        nv_p = int(rng.integers(dim + 1, 3 * dim + 6))
        nv_q = int(rng.integers(dim + 1, 3 * dim + 6))
        p = rng.uniform(-1.0, 1.0, (nv_p, dim))
        q = rng.uniform(-1.0, 1.0, (nv_q, dim))
        if i % 2:
            q = q + 2.5
        pairs.append((p, q))
    return pairs


def time_pairs(mod, pairs):
    best = np.inf
    for _ in range(REPEATS):
        start = time.perf_counter()
        dists = [mod.gjk_pair(p, q, EPS)[0] for p, q in pairs]
        best = min(best, time.perf_counter() - start)
    return best, np.asarray(dists)


def time_batch(mod, pts, hull):
    best = np.inf
    for _ in range(REPEATS):
        start = time.perf_counter()
        dists = np.asarray(mod.point_hull_distances(pts, hull, EPS))
        best = min(best, time.perf_counter() - start)
    return best, dists


def main(argv=None):
    ap = argparse.ArgumentParser(
        description="time the compiled GJK kernel against the pure fallback")
    ap.add_argument("--pairs", type=int, default=600,
                    help="pair queries per dimension (default 600)")
    ap.add_argument("--batch", type=int, default=4000,
                    help="points in the batched hull query (default 4000)")
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 3, 6],
                    help="ambient dimensions to sweep")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    print(f"package default backend: {backend_name()}")
    if _gjk_core is None:
        print("compiled kernel not importable; timing the pure kernel alone")
    kernels = [("pure", _gjk_py)]
    if _gjk_core is not None:
        kernels.append(("compiled", _gjk_core))

    rng = np.random.default_rng(args.seed)
    print(f"{'dim':>4} {'kernel':>9} {'pairs/s':>10} {'batch pts/s':>12} "
          f"{'speedup':>8} {'max |diff|':>11}")
    worst = 0.0
    for dim in args.dims:
        if dim > _COMPILED_MAX_DIM:
            print(f"{dim:>4} exceeds the compiled kernel cap "
                  f"({_COMPILED_MAX_DIM}); skipping")
            continue
        pairs = make_pairs(rng, dim, args.pairs)
        hull = rng.uniform(-1.0, 1.0, (3 * dim + 8, dim))
        pts = rng.uniform(-2.0, 2.0, (args.batch, dim))
        rows = {}
        for name, mod in kernels:
            t_pair, d_pair = time_pairs(mod, pairs)
            t_batch, d_batch = time_batch(mod, pts, hull)
            rows[name] = (t_pair, t_batch, d_pair, d_batch)
        base_pair, base_batch = rows["pure"][0], rows["pure"][1]
        for name, (t_pair, t_batch, d_pair, d_batch) in rows.items():
            if name == "pure":
                speedup, diff = "1.0x", "-"
            else:
                gain = 0.5 * (base_pair / t_pair + base_batch / t_batch)
                delta = max(np.abs(d_pair - rows["pure"][2]).max(),
                            np.abs(d_batch - rows["pure"][3]).max())
                worst = max(worst, delta)
                speedup, diff = f"{gain:.1f}x", f"{delta:.1e}"
            print(f"{dim:>4} {name:>9} {args.pairs / t_pair:>10.0f} "
                  f"{args.batch / t_batch:>12.0f} {speedup:>8} {diff:>11}")
    if _gjk_core is not None:
        verdict = "agree" if worst <= 1e-8 else "DISAGREE"
        print(f"kernels {verdict}: worst distance discrepancy {worst:.2e}")
        if worst > 1e-8:
            raise SystemExit(1)


if __name__ == "__main__":
    main()
