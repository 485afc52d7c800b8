"""Factory for the benchmark-suite workload used by the oracle evaluation.

Each group mixes a handful of object archetypes.  The group kind decides which
object the cost model will favour:

``load``   random reader with the most DRAM loads (LLC-miss ranking agrees)
``store``  irregular writer whose write-backs and TLB misses outweigh a
           reader with more DRAM loads
``tlb``    object with heavy DRAM-level TLB misses but fewer DRAM loads
``seq``    sequential streamer with the most DRAM loads loses to a random
           reader with fewer
"""
from __future__ import annotations

import numpy as np

from .generator import ObjectSpec, SuiteSpec, WorkloadSpec

KINDS = ("load", "store", "tlb", "seq")


def _jit(rng, lo=0.8, hi=1.25):
    return float(rng.uniform(lo, hi))


def _loads(rng, l1, dram, lfb=None, l2=None, l3=None):
    lfb = int(l1 * 0.3) if lfb is None else lfb
    l2 = int(l1 * 0.08) if l2 is None else l2
    l3 = int(l1 * 0.04) if l3 is None else l3
    return [int(l1 * _jit(rng)), int(lfb * _jit(rng)), int(l2 * _jit(rng)), int(l3 * _jit(rng)),
            int(dram * _jit(rng))]


def reader(rng, name, dram, seq=0.05, tlb=0.002, size=256 << 20):
    return ObjectSpec(name, int(size * _jit(rng)), _loads(rng, 2000, dram), int(100 * _jit(rng)),
                      load_sequentiality=seq, store_regularity=0.9, tlb_miss_dram_rate=tlb)


def streamer(rng, name, dram, seq=0.95, size=512 << 20):
    return ObjectSpec(name, int(size * _jit(rng)), _loads(rng, 1800, dram), int(150 * _jit(rng)),
                      load_sequentiality=seq, store_regularity=0.95, tlb_miss_dram_rate=0.002)


def writer(rng, name, stores, regularity, dram=50, tlb=0.002, size=128 << 20):
    return ObjectSpec(name, int(size * _jit(rng)), _loads(rng, 1500, dram), int(stores * _jit(rng)),
                      load_sequentiality=0.3, store_regularity=regularity, tlb_miss_dram_rate=tlb)


def tlb_heavy(rng, name, dram, rate, size=2 << 30):
    return ObjectSpec(name, int(size * _jit(rng)), _loads(rng, 1200, dram), int(200 * _jit(rng)),
                      load_sequentiality=0.1, store_regularity=0.8, tlb_miss_dram_rate=rate)


def cold(rng, name):
    return ObjectSpec(name, int((16 << 20) * _jit(rng)), _loads(rng, 150, 5), int(30 * _jit(rng)),
                      load_sequentiality=0.5, store_regularity=0.5, tlb_miss_dram_rate=0.0)


def make_group(kind: str, name: str, rng) -> WorkloadSpec:
    objs = []
    if kind == "load":
        objs = [reader(rng, "graph.h:210", dram=300),
                writer(rng, "pvector.h:31", stores=4000, regularity=0.95, dram=30),
                streamer(rng, "builder.h:88", dram=140)]
    elif kind == "store":
        objs = [reader(rng, "reader.h:285", dram=200),
                writer(rng, "bfs.cc:116", stores=6000, regularity=0.05, dram=60, tlb=0.012)]
        if rng.random() < 0.5:
            objs.append(writer(rng, "pvector.h:31", stores=3000, regularity=0.97, dram=20))
    elif kind == "tlb":
        objs = [reader(rng, "reader.h:285", dram=200),
                tlb_heavy(rng, "sliding_queue.h:40", dram=80, rate=0.12)]
        if rng.random() < 0.5:
            objs.append(streamer(rng, "builder.h:88", dram=100))
    elif kind == "seq":
        objs = [streamer(rng, "builder.h:88", dram=300),
                reader(rng, "graph.h:210", dram=200)]
        if rng.random() < 0.5:
            objs.append(writer(rng, "pvector.h:31", stores=2500, regularity=0.97, dram=20))
    else:
        raise ValueError(f"unknown group kind {kind!r}")
    if rng.random() < 0.5:
        objs.append(cold(rng, "util.h:12"))
    order = rng.permutation(len(objs))
    return WorkloadSpec(name, [objs[i] for i in order], threads=int(rng.integers(4, 17)),
                        duration_ns=int(rng.integers(5, 20)) * 1_000_000,
                        unmapped_loads=int(rng.integers(200, 800)), unmapped_stores=int(rng.integers(50, 200)))


def default_suite(n_groups: int = 30, seed: int = 7) -> SuiteSpec:
    """``n_groups`` groups cycling through the four kinds, jittered by ``seed``."""
    rng = np.random.default_rng(seed)
    groups = []
    for i in range(n_groups):
        kind = KINDS[i % len(KINDS)]
        groups.append(make_group(kind, f"g{i:02d}_{kind}", rng))
    return SuiteSpec(groups)
