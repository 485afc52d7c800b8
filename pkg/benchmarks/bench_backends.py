"""Time each hot kernel under numba and under the numpy fallback.

    python3 benchmarks/bench_backends.py [--samples N] [--repeat R]

Numba kernels are compiled (or loaded from cache) before timing.  Both
backends are checked for agreement on the benchmark inputs first.
"""
import argparse
import sys
import timeit

import numpy as np

from rho import _accel
from rho.mapping import IntervalTable, locate_numba, locate_numpy
from rho.objects import build_objects
from rho.ranker import _kernels as K
from rho.trace import AllocationEvent, AllocKind, Frame


def mapping_inputs(n_samples, n_objects, rng):
    events = []
    for k in range(n_objects):
        stack = (Frame(f"site{k}", k + 1), Frame("main", 0x10))
        for _ in range(4):
            t0 = int(rng.integers(0, 1_000_000))
            base = int(rng.integers(0, 1 << 30)) // 64 * 64
            events.append(AllocationEvent(AllocKind.MAP, t0, base, int(rng.integers(1 << 12, 1 << 22)), stack))
            events.append(AllocationEvent(AllocKind.UNMAP, t0 + int(rng.integers(1, 500_000)), base))
    events.sort(key=lambda e: (e.timestamp, e.kind is AllocKind.MAP))
    table = IntervalTable.from_objects(build_objects(events)[0])
    addr = rng.integers(0, 1 << 30, n_samples).astype(np.uint64)
    ts = rng.integers(0, 1_500_000, n_samples).astype(np.int64)
    return addr, ts, table


def ranker_inputs(n_groups, group_len, n_features, rng):
    ptr = np.arange(0, (n_groups + 1) * group_len, group_len, dtype=np.int64)
    labels = np.zeros(ptr[-1], dtype=np.int64)
    labels[ptr[:-1] + rng.integers(0, group_len, n_groups)] = 1
    scores = rng.normal(size=ptr[-1])
    X = np.round(rng.random((ptr[-1], n_features)), 3)
    return ptr, labels, scores, X


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--objects", type=int, default=40)
    ap.add_argument("--groups", type=int, default=37)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    addr, ts, table = mapping_inputs(args.samples, args.objects, rng)
    ptr, labels, scores, X = ranker_inputs(args.groups, 6, 22, rng)
    pos = K.positions(scores, ptr)
    disc = K.discount_table(6)
    grad, hess = K.lambdas_numba(scores, labels, ptr, pos, disc)
    idx = np.arange(len(labels), dtype=np.int64)
    split_args = (X, grad, hess, idx, grad.sum(), hess.sum(), 1, 0.0, 1e-12)
    tree_nodes = 63
    feat = np.where(np.arange(tree_nodes) < 31, rng.integers(0, 22, tree_nodes), -1).astype(np.int64)
    left = np.where(feat >= 0, 2 * np.arange(tree_nodes) + 1, -1).astype(np.int64)
    right = np.where(feat >= 0, 2 * np.arange(tree_nodes) + 2, -1).astype(np.int64)
    thr = rng.random(tree_nodes)
    val = rng.normal(size=tree_nodes)
    Xq = rng.random((args.samples // 4, 22))

    cases = [
        ("locate", f"{args.samples} samples, {len(table.base)} intervals",
         lambda: locate_numba(addr, ts, table), lambda: locate_numpy(addr, ts, table)),
        ("lambdas", f"{args.groups} groups x 6 rows",
         lambda: K.lambdas_numba(scores, labels, ptr, pos, disc),
         lambda: K.lambdas_numpy(scores, labels, ptr, pos, disc)),
        ("best_split", f"{len(idx)} rows x 22 features",
         lambda: K.best_split_numba(*split_args), lambda: K.best_split_numpy(*split_args)),
        ("traverse", f"{len(Xq)} rows, depth-5 tree",
         lambda: K.traverse_numba(Xq, feat, thr, left, right, val),
         lambda: K.traverse_numpy(Xq, feat, thr, left, right, val)),
    ]

    print(f"{'kernel':<12}{'input':<34}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, what, fast, slow in cases:
        a, b = fast(), slow()
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            np.testing.assert_allclose(np.asarray(x, float), np.asarray(y, float), rtol=1e-9)
        t_fast = min(timeit.repeat(fast, number=1, repeat=args.repeat)) * 1e3
        t_slow = min(timeit.repeat(slow, number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<12}{what:<34}{t_fast:>10.2f}{t_slow:>10.2f}{t_slow / t_fast:>8.1f}x")


if __name__ == "__main__":
    main()
