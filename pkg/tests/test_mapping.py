import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_counters, brute_map, random_trace
from rho.mapping import (AmbiguousMapping, IntervalTable, locate_numba, locate_numpy, map_samples,
                         stats_csv)
from rho.objects import build_objects, track
from rho.trace import AllocationEvent, AllocKind, Frame, MemoryLevel, MemorySample, SampleKind, sample_arrays


def obj(base=0x1000, size=0x100, t0=0, t1=50, name="f"):
    ev = [AllocationEvent(AllocKind.MAP, t0, base, size, (Frame(name, 1),)),
          AllocationEvent(AllocKind.UNMAP, t1, base)]
    return build_objects(ev)[0]


def load(t, addr, level=MemoryLevel.L1, lat=5):
    return MemorySample(SampleKind.LOAD, t, 0, addr, level, lat)


def test_containment_in_space_and_time():
    objs = obj()
    res = map_samples([load(5, 0x1010), load(60, 0x1010), load(5, 0x1100), load(50, 0x1000)], objs)
    assert res.assignment.tolist() == [0, -1, -1, -1]
    assert res.app.unmapped_samples == 3


def test_latest_allocation_wins_and_is_flagged():
    objs = obj(t0=0, t1=100, name="a") + obj(base=0x1080, t0=10, t1=100, name="b")
    res = map_samples([load(20, 0x1090), load(5, 0x1090)], objs)
    assert res.assignment.tolist() == [1, 0]
    assert res.ambiguous.tolist() == [0]
    with pytest.raises(AmbiguousMapping):
        map_samples([load(20, 0x1090)], objs, strict=True)


def test_counters():
    objs = obj()
    s = [load(1, 0x1000, MemoryLevel.DRAM, 300), load(2, 0x1001, MemoryLevel.L2, 14),
         MemorySample(SampleKind.STORE, 3, 0, 0x1002)]
    st_ = map_samples(s, objs).object_stats[0]
    assert st_.loads.tolist() == [0, 0, 1, 0, 1]
    assert st_.latency.tolist() == [0, 0, 14, 0, 300]
    assert (st_.stores, st_.llc_misses, st_.accesses) == (1, 1, 3)


def test_csv_has_header_and_rows():
    text = stats_csv(map_samples([load(1, 0x1000)], obj()))
    lines = text.splitlines()
    assert lines[0].startswith("object_id,label") and len(lines) == 2


def test_empty_inputs():
    res = map_samples([], [])
    assert res.assignment.size == 0 and res.app.unmapped_samples == 0
    res = map_samples([load(1, 0x1)], [])
    assert res.assignment.tolist() == [-1]


def test_top_of_address_space():
    top = (1 << 64) - 0x100
    objs = obj(base=top, size=0x100)
    res = map_samples([load(1, (1 << 64) - 1), load(1, top - 1)], objs)
    assert res.assignment.tolist() == [0, -1]


def check_against_oracle(seed, n_objects=20, n_samples=10_000):
    t = random_trace(seed, n_objects, n_samples)
    objs, _ = track(t)
    arrays = sample_arrays(t.samples)
    want, want_amb = brute_map(t.samples, objs)
    table = IntervalTable.from_objects(objs)
    for locator in (locate_numba, locate_numpy):
        got, amb = locator(arrays.address, arrays.timestamp, table)
        assert got.tolist() == want
        assert np.nonzero(amb)[0].tolist() == want_amb
    res = map_samples(arrays, objs)
    expect = brute_counters(t.samples, want, len(objs))
    for s, e in zip(res.object_stats, expect):
        assert s.loads.tolist() == e["loads"] and s.latency.tolist() == e["lat"]
        assert s.tlb_hit.tolist() == e["hit"] and s.tlb_miss.tolist() == e["miss"]
        assert s.stores == e["stores"]
    assert res.app.mapped_samples + res.app.unmapped_samples == len(t.samples)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_matches_brute_force(seed):
    check_against_oracle(seed, n_objects=12, n_samples=800)
