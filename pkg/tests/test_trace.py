import io

import pytest
from hypothesis import given, settings, strategies as st

from rho.trace import (AllocationEvent, AllocKind, Frame, MalformedLine, MemoryLevel, MemorySample,
                       SampleKind, TlbOutcome, TraceError, TraceFile, UnsupportedVersion, parse_trace,
                       sample_arrays, write_trace)


def one(line):
    return parse_trace(f"RHOTRACE 1\n{line}\n")


def test_load_line():
    s = one("L 100 7 0x1000 DRAM 300 DRAM:M").samples[0]
    assert s == MemorySample(SampleKind.LOAD, 100, 7, 0x1000, MemoryLevel.DRAM, 300,
                             TlbOutcome(MemoryLevel.DRAM, False))


def test_store_line_is_l1_without_tlb():
    s = one("S 100 7 0x1000 -").samples[0]
    assert s.kind is SampleKind.STORE and s.level is MemoryLevel.L1
    assert s.latency is None and s.tlb is None


def test_missing_latency():
    with pytest.raises(MalformedLine, match="expected 7 fields"):
        one("L 100 7 0x1000 DRAM")


@pytest.mark.parametrize("line", [
    "L 1 1 0x10 L9 5 -",
    "L 1 1 0x10 L1 0 -",
    "L -1 1 0x10 L1 5 -",
    "L 1 1 10 L1 5 -",
    "L 1 1 0x10 L1 5 L1:X",
    "A 1 0x10 0 f+0x1",
    "A 1 0x10 8 f",
    "Q 1 2",
    "F 1",
])
def test_bad_records(line):
    with pytest.raises(MalformedLine):
        one(line)


def test_error_carries_line_number():
    with pytest.raises(MalformedLine) as info:
        parse_trace("RHOTRACE 1\n# note\n\nS 1 1 0x1 -\nS x 1 0x1 -\n")
    assert info.value.lineno == 5


def test_header():
    with pytest.raises(UnsupportedVersion):
        parse_trace("RHOTRACE 2\n")
    with pytest.raises(MalformedLine):
        parse_trace("S 1 1 0x1 -\n")
    with pytest.raises(MalformedLine):
        parse_trace("")


def test_alloc_records():
    t = parse_trace("RHOTRACE 1\nA 5 0x2000 4096 alloc+0x4;main+0x10\nF 9 0x2000\n")
    a, f = t.alloc_events
    assert a.call_stack == (Frame("alloc", 4), Frame("main", 0x10))
    assert (a.size, f.kind, f.base) == (4096, AllocKind.UNMAP, 0x2000)


def test_empty_trace_writes_header_only():
    assert write_trace(TraceFile()) == "RHOTRACE 1\n"


def test_writer_keeps_stored_order():
    t = TraceFile(samples=[MemorySample(SampleKind.STORE, 9, 0, 0x10),
                           MemorySample(SampleKind.STORE, 3, 0, 0x20)])
    lines = write_trace(t).splitlines()[1:]
    assert lines == ["S 9 0 0x10 -", "S 3 0 0x20 -"]


def test_write_to_stream():
    buf = io.StringIO()
    assert write_trace(TraceFile(), buf) is None
    assert buf.getvalue() == "RHOTRACE 1\n"


def test_record_invariants():
    with pytest.raises(TraceError):
        MemorySample(SampleKind.STORE, 1, 1, 1, MemoryLevel.DRAM)
    with pytest.raises(TraceError):
        MemorySample(SampleKind.LOAD, 1, 1, 1, MemoryLevel.L1, None)
    with pytest.raises(TraceError):
        AllocationEvent(AllocKind.MAP, 1, 1, 16)


def test_sample_arrays_columns():
    t = one("L 4 1 0xff L3 50 L2:H")
    a = sample_arrays(t.samples + [MemorySample(SampleKind.STORE, 5, 1, 0x10)])
    assert a.is_load.tolist() == [True, False]
    assert a.tlb_level.tolist() == [2, -1]
    assert a.latency.tolist() == [50, 0]


# -- round-trip law --------------------------------------------------------------

u64 = st.integers(0, (1 << 64) - 1)
ts = st.integers(0, (1 << 63) - 1)
levels = st.sampled_from(list(MemoryLevel))
tlbs = st.none() | st.builds(TlbOutcome, levels, st.booleans())
loads = st.builds(MemorySample, st.just(SampleKind.LOAD), ts, st.integers(0, 1 << 20), u64, levels,
                  st.integers(1, 1 << 20), tlbs)
stores = st.builds(MemorySample, st.just(SampleKind.STORE), ts, st.integers(0, 1 << 20), u64,
                   st.just(MemoryLevel.L1), st.none(), tlbs)
symbols = st.text(st.sampled_from("abcdefgh_.:/0123456789"), min_size=1, max_size=12)
frames = st.builds(Frame, symbols, st.integers(0, 1 << 32))
maps = st.builds(AllocationEvent, st.just(AllocKind.MAP), ts, u64, st.integers(1, 1 << 40),
                 st.lists(frames, min_size=1, max_size=5).map(tuple))
unmaps = st.builds(AllocationEvent, st.just(AllocKind.UNMAP), ts, u64)
traces = st.builds(TraceFile, st.just(1), st.lists(loads | stores, max_size=30), st.lists(maps | unmaps, max_size=10))


@settings(max_examples=200, deadline=None)
@given(traces)
def test_round_trip(t):
    text = write_trace(t)
    back = parse_trace(text)
    assert back == t
    assert write_trace(back) == text
