"""Trace records and the line-based ``RHOTRACE 1`` text format.

A trace holds two streams: allocation events (``A``/``F`` lines) and sampled
memory accesses (``L``/``S`` lines).  Each stream keeps the order it was read
or built in; the writer emits all allocation events first, then all samples,
and never sorts.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Union

import numpy as np

FORMAT_MAGIC = "RHOTRACE"
FORMAT_VERSION = 1
_U64_MAX = (1 << 64) - 1


class MemoryLevel(enum.IntEnum):
    L1 = 0
    LFB = 1
    L2 = 2
    L3 = 3
    DRAM = 4

    @property
    def is_external(self) -> bool:
        return self is MemoryLevel.DRAM


LEVELS = tuple(MemoryLevel)
N_LEVELS = len(LEVELS)
_LEVEL_BY_NAME = {lv.name: lv for lv in LEVELS}


class SampleKind(enum.Enum):
    LOAD = "L"
    STORE = "S"


class AllocKind(enum.Enum):
    MAP = "A"
    UNMAP = "F"


class TraceError(ValueError):
    pass


class MalformedLine(TraceError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


class UnsupportedVersion(TraceError):
    pass


@dataclass(frozen=True)
class TlbOutcome:
    level: MemoryLevel
    hit: bool

    def __str__(self) -> str:
        return f"{self.level.name}:{'H' if self.hit else 'M'}"


@dataclass(frozen=True)
class MemorySample:
    kind: SampleKind
    timestamp: int
    thread_id: int
    address: int
    level: MemoryLevel = MemoryLevel.L1
    latency: Optional[int] = None
    tlb: Optional[TlbOutcome] = None

    def __post_init__(self):
        if self.kind is SampleKind.STORE:
            if self.level is not MemoryLevel.L1 or self.latency is not None:
                raise TraceError("store samples are fixed at L1 and carry no latency")
        elif self.latency is None or self.latency < 1:
            raise TraceError("load samples need a latency >= 1")


@dataclass(frozen=True)
class Frame:
    symbol: str
    offset: int

    def __str__(self) -> str:
        return f"{self.symbol}+0x{self.offset:x}"


@dataclass(frozen=True)
class AllocationEvent:
    """One ``mmap``/``munmap``.  ``call_stack`` is innermost frame first."""

    kind: AllocKind
    timestamp: int
    base: int
    size: Optional[int] = None
    call_stack: tuple[Frame, ...] = ()

    def __post_init__(self):
        if self.kind is AllocKind.MAP:
            if self.size is None or self.size <= 0:
                raise TraceError("map events need a positive size")
            if not self.call_stack:
                raise TraceError("map events need a non-empty call stack")
        elif self.size is not None or self.call_stack:
            raise TraceError("unmap events carry only base and timestamp")


@dataclass
class TraceFile:
    version: int = FORMAT_VERSION
    samples: list[MemorySample] = field(default_factory=list)
    alloc_events: list[AllocationEvent] = field(default_factory=list)

    def end_time(self) -> int:
        """Largest timestamp across both streams (0 for an empty trace)."""
        t = 0
        if self.samples:
            t = max(t, max(s.timestamp for s in self.samples))
        if self.alloc_events:
            t = max(t, max(e.timestamp for e in self.alloc_events))
        return t


# -- parsing -----------------------------------------------------------------

def _dec(tok: str, lineno: int, what: str) -> int:
    if not tok.isdigit():
        raise MalformedLine(lineno, f"bad {what} {tok!r}")
    v = int(tok)
    if v > _U64_MAX:
        raise MalformedLine(lineno, f"{what} out of range")
    return v


def _hex(tok: str, lineno: int, what: str) -> int:
    if not (tok.startswith("0x") or tok.startswith("0X")) or len(tok) < 3:
        raise MalformedLine(lineno, f"bad {what} {tok!r}: expected 0x-prefixed hex")
    try:
        v = int(tok[2:], 16)
    except ValueError:
        raise MalformedLine(lineno, f"bad {what} {tok!r}") from None
    if v > _U64_MAX:
        raise MalformedLine(lineno, f"{what} out of range")
    return v


def _level(tok: str, lineno: int) -> MemoryLevel:
    try:
        return _LEVEL_BY_NAME[tok]
    except KeyError:
        raise MalformedLine(lineno, f"unknown level {tok!r}") from None


def _tlb(tok: str, lineno: int) -> Optional[TlbOutcome]:
    if tok == "-":
        return None
    lvl, sep, outcome = tok.partition(":")
    if not sep or outcome not in ("H", "M"):
        raise MalformedLine(lineno, f"bad tlb field {tok!r}")
    return TlbOutcome(_level(lvl, lineno), outcome == "H")


def _frame(tok: str, lineno: int) -> Frame:
    symbol, sep, off = tok.rpartition("+0x")
    if not sep or not symbol:
        raise MalformedLine(lineno, f"bad frame {tok!r}: expected <symbol>+0x<offset>")
    try:
        offset = int(off, 16)
    except ValueError:
        raise MalformedLine(lineno, f"bad frame offset in {tok!r}") from None
    return Frame(symbol, offset)


_ARITY = {"A": 5, "F": 3, "L": 7, "S": 5}


def _parse_record(fields: list[str], lineno: int, trace: TraceFile) -> None:
    tag = fields[0]
    want = _ARITY.get(tag)
    if want is None:
        raise MalformedLine(lineno, f"unknown record tag {tag!r}")
    if len(fields) != want:
        raise MalformedLine(lineno, f"expected {want} fields, got {len(fields)}")
    ts = _dec(fields[1], lineno, "timestamp")
    if tag == "L":
        latency = _dec(fields[5], lineno, "latency")
        if latency < 1:
            raise MalformedLine(lineno, "latency must be >= 1")
        trace.samples.append(MemorySample(
            SampleKind.LOAD, ts, _dec(fields[2], lineno, "thread id"),
            _hex(fields[3], lineno, "address"), _level(fields[4], lineno),
            latency, _tlb(fields[6], lineno)))
    elif tag == "S":
        trace.samples.append(MemorySample(
            SampleKind.STORE, ts, _dec(fields[2], lineno, "thread id"),
            _hex(fields[3], lineno, "address"), MemoryLevel.L1, None,
            _tlb(fields[4], lineno)))
    elif tag == "A":
        size = _dec(fields[3], lineno, "size")
        if size == 0:
            raise MalformedLine(lineno, "size must be > 0")
        stack = tuple(_frame(f, lineno) for f in fields[4].split(";"))
        trace.alloc_events.append(AllocationEvent(
            AllocKind.MAP, ts, _hex(fields[2], lineno, "base"), size, stack))
    else:
        trace.alloc_events.append(AllocationEvent(
            AllocKind.UNMAP, ts, _hex(fields[2], lineno, "base")))


def parse_trace(source: Union[str, IO[str], Iterable[str]]) -> TraceFile:
    """Parse a v1 trace from a string, text stream, or iterable of lines."""
    lines = io.StringIO(source) if isinstance(source, str) else source
    trace: Optional[TraceFile] = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if trace is None:
            if fields[0] != FORMAT_MAGIC or len(fields) != 2:
                raise MalformedLine(lineno, f"expected header '{FORMAT_MAGIC} <version>'")
            version = _dec(fields[1], lineno, "version")
            if version != FORMAT_VERSION:
                raise UnsupportedVersion(f"trace version {version} (supported: {FORMAT_VERSION})")
            trace = TraceFile(version=version)
            continue
        _parse_record(fields, lineno, trace)
    if trace is None:
        raise MalformedLine(0, "missing header")
    return trace


def read_trace(path) -> TraceFile:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh)


# -- writing -----------------------------------------------------------------

def _format_event(e: AllocationEvent) -> str:
    if e.kind is AllocKind.MAP:
        stack = ";".join(str(f) for f in e.call_stack)
        return f"A {e.timestamp} 0x{e.base:x} {e.size} {stack}"
    return f"F {e.timestamp} 0x{e.base:x}"


def _format_sample(s: MemorySample) -> str:
    tlb = "-" if s.tlb is None else str(s.tlb)
    if s.kind is SampleKind.LOAD:
        return f"L {s.timestamp} {s.thread_id} 0x{s.address:x} {s.level.name} {s.latency} {tlb}"
    return f"S {s.timestamp} {s.thread_id} 0x{s.address:x} {tlb}"


def write_trace(trace: TraceFile, out: Optional[IO[str]] = None) -> Optional[str]:
    """Serialise ``trace``.  Returns the text when ``out`` is None."""
    buf = io.StringIO() if out is None else out
    buf.write(f"{FORMAT_MAGIC} {trace.version}\n")
    for e in trace.alloc_events:
        buf.write(_format_event(e))
        buf.write("\n")
    for s in trace.samples:
        buf.write(_format_sample(s))
        buf.write("\n")
    return buf.getvalue() if out is None else None


def save_trace(trace: TraceFile, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_trace(trace, fh)


# -- columnar view used by the kernels ---------------------------------------

@dataclass
class SampleArrays:
    """Column-wise copy of a sample list.

    ``tlb_level`` is -1 for samples without a TLB outcome.
    """

    is_load: np.ndarray
    timestamp: np.ndarray
    address: np.ndarray
    level: np.ndarray
    latency: np.ndarray
    tlb_level: np.ndarray
    tlb_hit: np.ndarray

    def __len__(self):
        return len(self.timestamp)


def sample_arrays(samples: list[MemorySample]) -> SampleArrays:
    n = len(samples)
    is_load = np.fromiter((s.kind is SampleKind.LOAD for s in samples), dtype=bool, count=n)
    ts = np.fromiter((s.timestamp for s in samples), dtype=np.int64, count=n)
    # addresses are u64 on the wire; uint64 keeps ordering intact above 2**63
    addr = np.fromiter((s.address for s in samples), dtype=np.uint64, count=n)
    level = np.fromiter((s.level for s in samples), dtype=np.int64, count=n)
    latency = np.fromiter((s.latency or 0 for s in samples), dtype=np.int64, count=n)
    tlb_level = np.fromiter((-1 if s.tlb is None else s.tlb.level for s in samples),
                            dtype=np.int64, count=n)
    tlb_hit = np.fromiter((s.tlb is not None and s.tlb.hit for s in samples), dtype=bool, count=n)
    return SampleArrays(is_load, ts, addr, level, latency, tlb_level, tlb_hit)
