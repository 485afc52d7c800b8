import math

import numpy as np
import pytest

from oracles import exhaustive_single_object_times
from rho.mapping import AppStats, MappingResult, ObjectStats
from rho.objects import LiveInterval, TrackedObject, track
from rho.placement import (CostModelConfig, GroupProfile, ObjectSpec, Placement, SpecInvalid, Tier, TradeoffEntry,
                           WorkloadSpec, baseline_llcm, default_suite, estimate_time, generate_trace,
                           ground_truth_labels, profile_trace, row_cost_ns, suite_from_dict, suite_to_dict,
                           tradeoff_entry, tradeoff_report)
from rho.placement.cost import MissingStats, modal_delta_fraction
from rho.trace import MemoryLevel, SampleKind, write_trace

CFG = CostModelConfig()


def fake_profile(stats, seq, reg, sizes=None):
    """Profile built straight from counters; the last row is unmapped traffic."""
    m = len(stats)
    sizes = sizes or [4096] * m
    objs = [TrackedObject(k + 1, f"o{k}", sizes[k], [LiveInterval(0, sizes[k], 0, 10)], sizes[k]) for k in range(m)]
    app = AppStats(sum(s.loads for s in stats), sum(s.latency for s in stats), sum(s.tlb_hit for s in stats),
                   sum(s.tlb_miss for s in stats), sum(s.stores for s in stats))
    mapping = MappingResult(objs, stats[:], app, np.zeros(0, np.int64), np.zeros(0, np.int64))
    return GroupProfile("g", objs, None, mapping, np.asarray(seq, float), np.asarray(reg, float), sum(sizes))


def random_stats(rng):
    return ObjectStats(rng.integers(0, 500, 5), rng.integers(0, 90_000, 5), rng.integers(0, 50, 5),
                       rng.integers(0, 50, 5), int(rng.integers(0, 500)))


def random_config(rng):
    dram_bw = float(rng.uniform(10, 200))
    return CostModelConfig(
        dram_load_ns=float(rng.uniform(20, 200)),
        pmem_random_read_multiplier=float(rng.uniform(1, 6)),
        pmem_sequential_read_multiplier=float(rng.uniform(1, 4)),
        dram_write_bw_gbps=dram_bw, pmem_write_bw_gbps=float(rng.uniform(1, dram_bw)),
        cache_hit_ns=tuple(rng.uniform(0.5, 50, 4)),
        tlb_miss_dram_penalty_ns=float(rng.uniform(10, 300)), pmem_tlb_multiplier=float(rng.uniform(1, 5)),
        writeback_line_bytes=int(rng.choice([32, 64, 128])))


def test_config_validation():
    with pytest.raises(ValueError):
        CostModelConfig(pmem_random_read_multiplier=0.5)
    with pytest.raises(ValueError):
        CostModelConfig(dram_load_ns=0)
    with pytest.raises(ValueError):
        CostModelConfig(pmem_write_bw_gbps=100)
    with pytest.raises(ValueError):
        CostModelConfig.from_dict({"bogus": 1})
    assert CostModelConfig.from_dict(CFG.to_dict()) == CFG


def test_monotone_over_random_configs():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        cfg = random_config(rng)
        m = int(rng.integers(1, 5))
        p = fake_profile([random_stats(rng) for _ in range(m)] + [random_stats(rng)],
                         rng.random(m + 1), rng.random(m + 1))
        p.objects = p.objects[:m]
        p.mapping.object_stats = p.mapping.object_stats[:m]
        sigs = p.signatures
        tiers = {s: (Tier.DRAM if rng.random() < 0.5 else Tier.PMEM) for s in sigs}
        base = estimate_time(p, Placement(dict(tiers)), cfg)
        for s in sigs:
            if tiers[s] is Tier.PMEM:
                assert estimate_time(p, Placement({**tiers, s: Tier.DRAM}), cfg) <= base
        assert estimate_time(p, Placement.uniform(sigs, Tier.DRAM), cfg) <= base
        assert estimate_time(p, Placement(dict(tiers), Tier.PMEM), cfg) >= base


def test_additive_per_object():
    rng = np.random.default_rng(12)
    stats = [random_stats(rng) for _ in range(4)]
    p = fake_profile(stats[:3], [0.1, 0.5, 0.9, 0.3], [0.2, 0.4, 0.6, 0.8])
    p.mapping.app = AppStats(*(sum(getattr(s, a) for s in stats) for a in ("loads", "latency", "tlb_hit",
                                                                           "tlb_miss", "stores")))
    pl = Placement({1: Tier.DRAM, 2: Tier.PMEM, 3: Tier.PMEM})
    parts = [row_cost_ns(p, 0, Tier.DRAM, CFG), row_cost_ns(p, 1, Tier.PMEM, CFG),
             row_cost_ns(p, 2, Tier.PMEM, CFG), row_cost_ns(p, 3, Tier.DRAM, CFG)]
    assert estimate_time(p, pl, CFG) == pytest.approx(math.fsum(parts) * 1e-9, rel=1e-12)
    assert p.row_stats(3) == stats[3]


def test_sequential_read_term():
    s = ObjectStats([0, 0, 0, 0, 1000], [0] * 5, [0] * 5, [0] * 5, 0)
    p = fake_profile([s], [1.0, 1.0], [1.0, 1.0])
    ratio = row_cost_ns(p, 0, Tier.PMEM, CFG) / row_cost_ns(p, 0, Tier.DRAM, CFG)
    assert ratio == CFG.pmem_sequential_read_multiplier


def test_missing_tier():
    p = fake_profile([ObjectStats()], [1, 1], [1, 1])
    with pytest.raises(MissingStats):
        estimate_time(p, Placement({}), CFG)


def test_modal_delta():
    keys = np.array([0, 0, 0, 0, 1, 2, 2])
    ts = np.array([3, 1, 2, 4, 0, 5, 6])
    addr = np.array([192, 64, 128, 256, 7, 10, 99], dtype=np.uint64)
    out = modal_delta_fraction(keys, ts, addr, 4)
    assert out.tolist() == [1.0, 1.0, 1.0, 1.0]
    addr[3] = 999
    assert modal_delta_fraction(keys, ts, addr, 4)[0] == pytest.approx(2 / 3)


# -- generator -------------------------------------------------------------------

def one_object(**kw):
    o = ObjectSpec("obj", 1 << 20, **kw)
    return WorkloadSpec("w", [o], threads=2, duration_ns=1_000_000)


def test_generator_realises_counts():
    t = generate_trace(one_object(loads=[1000, 0, 0, 0, 0]), seed=1)
    assert len(t.samples) == 1000
    assert all(s.kind is SampleKind.LOAD and s.level is MemoryLevel.L1 for s in t.samples)
    (o,), _ = track(t)
    iv = o.intervals[0]
    assert all(iv.base <= s.address < iv.base + iv.size and iv.t_start <= s.timestamp < iv.t_end for s in t.samples)


def test_generator_tlb_rate():
    t = generate_trace(one_object(loads=[5000, 0, 0, 0, 0], stores=5000, tlb_miss_dram_rate=0.5), seed=2)
    n = sum(1 for s in t.samples if s.tlb is not None and s.tlb.level is MemoryLevel.DRAM and not s.tlb.hit)
    assert abs(n - 5000) <= 50


def test_generator_is_deterministic():
    spec = default_suite(2, seed=3).groups[1]
    assert write_trace(generate_trace(spec, 9)) == write_trace(generate_trace(spec, 9))
    assert write_trace(generate_trace(spec, 9)) != write_trace(generate_trace(spec, 10))


def test_generator_sequentiality_is_measured():
    spec = one_object(loads=[0, 0, 0, 0, 2000], load_sequentiality=0.9, stores=2000, store_regularity=0.2)
    p = profile_trace(generate_trace(spec, 4))
    assert p.load_sequentiality[0] == pytest.approx(0.9, abs=0.02)
    assert p.store_regularity[0] == pytest.approx(0.2, abs=0.02)


def test_spec_validation_and_json():
    with pytest.raises(SpecInvalid):
        ObjectSpec("x y", 1 << 20).validate()
    with pytest.raises(SpecInvalid):
        ObjectSpec("x", 1 << 20, load_sequentiality=1.5).validate()
    suite = default_suite(4, seed=1)
    assert suite_from_dict(suite_to_dict(suite)) == suite
    with pytest.raises(SpecInvalid):
        suite_from_dict({"groups": [{"name": "g", "objects": [{"name": "a"}]}]})


# -- ground truth ----------------------------------------------------------------

def two_object_store_case():
    a = ObjectSpec("reader", 64 << 20, loads=[2000, 500, 100, 60, 400], stores=100, load_sequentiality=0.1)
    b = ObjectSpec("writer", 64 << 20, loads=[2000, 500, 100, 60, 250], stores=6000, store_regularity=0.05,
                   tlb_miss_dram_rate=0.01)
    return WorkloadSpec("bfs", [a, b], threads=4, duration_ns=2_000_000)


def test_irregular_writer_beats_reader():
    p = profile_trace(generate_trace(two_object_store_case(), 5))
    by_label = {o.label.split("+")[0]: i for i, o in enumerate(p.objects)}
    stats = p.mapping.object_stats
    assert stats[by_label["reader"]].llc_misses > stats[by_label["writer"]].llc_misses
    truth = ground_truth_labels(p, CFG)
    assert truth.top1 == by_label["writer"]
    assert baseline_llcm(stats, p.signatures)[0] == by_label["reader"]


def test_ground_truth_properties():
    for i, g in enumerate(default_suite(8, seed=2).groups):
        p = profile_trace(generate_trace(g, 50 + i))
        truth = ground_truth_labels(p, CFG)
        assert sum(truth.ranks.values()) == 1
        assert all(truth.all_dram <= t <= truth.all_pmem for t in truth.times.values())
        exhaustive = exhaustive_single_object_times(p, CFG)
        assert truth.times[truth.top1] == min(exhaustive[k] for k in truth.retained)
        e = tradeoff_entry(p, truth)
        assert e.slowdown >= 1.0 and e.memory_reduction >= 1.0
        assert e.slowdown == exhaustive[truth.top1] / truth.all_dram


def test_single_object_tradeoff():
    spec = one_object(loads=[100, 0, 0, 0, 10], stores=10)
    p = profile_trace(generate_trace(spec, 1))
    truth = ground_truth_labels(p, CFG)
    e = tradeoff_entry(p, truth)
    assert truth.ranks == {0: 1}
    assert (e.slowdown, e.memory_reduction) == (1.0, 1.0)


def test_baseline_llcm():
    s = [ObjectStats([0, 0, 0, 0, 20], [0] * 5, [0] * 5, [0] * 5, 0),
         ObjectStats([0, 0, 0, 0, 70], [0] * 5, [0] * 5, [0] * 5, 0)]
    assert baseline_llcm(s, [1, 2]) == [1, 0]
    assert baseline_llcm(s[:1], [5]) == [0]
    tie = [s[0], s[0]]
    assert baseline_llcm(tie, [9, 3]) == [1, 0]


def test_report_format():
    text = tradeoff_report([TradeoffEntry("g", 3.5, 121.0)])
    assert text == "group,slowdown,memory_reduction\ng,3.500000,121.000000\n"


def test_adversarial_groups_exist():
    groups = default_suite(30, seed=7).groups
    disagree = 0
    for i, g in enumerate(groups):
        p = profile_trace(generate_trace(g, 1000 + i))
        truth = ground_truth_labels(p, CFG)
        llcm = [k for k in baseline_llcm(p.mapping.object_stats, p.signatures) if k in truth.retained]
        disagree += llcm[0] != truth.top1
    assert disagree >= 5
