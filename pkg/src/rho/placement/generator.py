"""Synthetic traces with controllable per-object access characteristics.

Counts in a spec are realised exactly.  In each object's access timeline the
first ``round(sequentiality * n)`` loads walk the object with a fixed 64-byte
stride and the rest land uniformly at random; stores do the same with
``store_regularity``.  Exactly ``round(tlb_miss_dram_rate * n)`` of the
object's samples (loads and stores) carry a DRAM-level TLB miss.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..trace import (AllocationEvent, AllocKind, Frame, MemoryLevel, MemorySample, SampleKind,
                     TlbOutcome, TraceFile)

STRIDE = 64
PAGE = 1 << 21
HEAP_BASE = 0x7F0000000000
STACK_BASE = 0x7FFD00000000
STACK_SIZE = 1 << 20

# (low, high) latency in cycles per level; DRAM splits by access pattern
_LATENCY = {
    MemoryLevel.L1: (4, 7),
    MemoryLevel.LFB: (8, 40),
    MemoryLevel.L2: (12, 17),
    MemoryLevel.L3: (40, 90),
}
_DRAM_SEQ_LATENCY = (180, 260)
_DRAM_RAND_LATENCY = (280, 420)
# TLB hit levels for samples that do not miss
_TLB_HIT_LEVELS = np.array([MemoryLevel.L1, MemoryLevel.L2, MemoryLevel.L3])
_TLB_HIT_P = np.array([0.85, 0.10, 0.05])


class SpecInvalid(ValueError):
    pass


@dataclass
class ObjectSpec:
    name: str
    size: int
    loads: list = field(default_factory=lambda: [0, 0, 0, 0, 0])  # L1, LFB, L2, L3, DRAM
    stores: int = 0
    load_sequentiality: float = 0.0
    store_regularity: float = 1.0
    tlb_miss_dram_rate: float = 0.0
    allocations: int = 1
    lifetime: tuple = (0.0, 1.0)
    freed: bool = True
    call_stack: Optional[list] = None

    def validate(self):
        if not self.name or any(c in self.name for c in " ;\t\n"):
            raise SpecInvalid(f"object name {self.name!r} must be non-empty without spaces or ';'")
        if self.size < STRIDE:
            raise SpecInvalid(f"{self.name}: size must be at least {STRIDE} bytes")
        if len(self.loads) != len(MemoryLevel) or any(c < 0 for c in self.loads) or self.stores < 0:
            raise SpecInvalid(f"{self.name}: counts must be non-negative, one load count per level")
        for attr in ("load_sequentiality", "store_regularity", "tlb_miss_dram_rate"):
            v = getattr(self, attr)
            if not 0.0 <= v <= 1.0:
                raise SpecInvalid(f"{self.name}: {attr} must lie in [0, 1]")
        lo, hi = self.lifetime
        if not 0.0 <= lo < hi <= 1.0:
            raise SpecInvalid(f"{self.name}: lifetime must satisfy 0 <= start < end <= 1")
        if self.allocations < 1:
            raise SpecInvalid(f"{self.name}: allocations must be >= 1")

    def frames(self) -> tuple[Frame, ...]:
        if self.call_stack:
            out = []
            for s in self.call_stack:
                sym, sep, off = s.rpartition("+0x")
                if not sep:
                    raise SpecInvalid(f"{self.name}: bad frame {s!r}")
                out.append(Frame(sym, int(off, 16)))
            return tuple(out)
        return (Frame(self.name, 0x10), Frame("main", 0x2A))


@dataclass
class WorkloadSpec:
    """One group (benchmark): its objects plus group-level settings."""

    name: str
    objects: list[ObjectSpec]
    threads: int = 4
    duration_ns: int = 10_000_000
    unmapped_loads: int = 0
    unmapped_stores: int = 0

    def validate(self):
        if not self.name or any(c in self.name for c in " ,/\\\t\n"):
            raise SpecInvalid(f"group name {self.name!r} is not a valid identifier")
        if not self.objects:
            raise SpecInvalid(f"group {self.name}: needs at least one object")
        if self.threads < 1 or self.duration_ns < 100:
            raise SpecInvalid(f"group {self.name}: threads >= 1 and duration_ns >= 100 required")
        if self.unmapped_loads < 0 or self.unmapped_stores < 0:
            raise SpecInvalid(f"group {self.name}: unmapped counts must be non-negative")
        names = [o.name for o in self.objects]
        if len(set(names)) != len(names):
            raise SpecInvalid(f"group {self.name}: object names must be unique")
        for o in self.objects:
            o.validate()


@dataclass
class SuiteSpec:
    groups: list[WorkloadSpec]

    def validate(self):
        names = [g.name for g in self.groups]
        if not names:
            raise SpecInvalid("suite has no groups")
        if len(set(names)) != len(names):
            raise SpecInvalid("group names must be unique")
        for g in self.groups:
            g.validate()


def _object_from_dict(d: dict) -> ObjectSpec:
    known = {f.name for f in dataclasses.fields(ObjectSpec)}
    extra = set(d) - known
    if extra:
        raise SpecInvalid(f"unknown object keys {sorted(extra)}")
    d = dict(d)
    if "lifetime" in d:
        d["lifetime"] = tuple(d["lifetime"])
    return ObjectSpec(**d)


def suite_from_dict(doc: dict) -> SuiteSpec:
    try:
        groups = []
        for g in doc["groups"]:
            g = dict(g)
            objs = [_object_from_dict(o) for o in g.pop("objects")]
            known = {f.name for f in dataclasses.fields(WorkloadSpec)} - {"objects"}
            extra = set(g) - known
            if extra:
                raise SpecInvalid(f"unknown group keys {sorted(extra)}")
            groups.append(WorkloadSpec(objects=objs, **g))
    except (KeyError, TypeError) as exc:
        raise SpecInvalid(f"malformed suite spec: {exc}") from None
    suite = SuiteSpec(groups)
    suite.validate()
    return suite


def suite_to_dict(suite: SuiteSpec) -> dict:
    def obj(o: ObjectSpec):
        d = dataclasses.asdict(o)
        d["lifetime"] = list(o.lifetime)
        if d["call_stack"] is None:
            del d["call_stack"]
        return d
    return {"groups": [{**{k: v for k, v in dataclasses.asdict(g).items() if k != "objects"},
                        "objects": [obj(o) for o in g.objects]} for g in suite.groups]}


def load_suite(path) -> SuiteSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecInvalid(f"suite spec is not valid JSON: {exc}") from None
    return suite_from_dict(doc)


def _addresses(rng, n, n_regular, bases, sizes, which):
    """Strided walk for the first ``n_regular`` accesses, uniform for the rest."""
    out = np.empty(n, dtype=np.uint64)
    k = np.arange(n_regular, dtype=np.int64)
    size = sizes[which]
    out[:n_regular] = bases[which[:n_regular]] + ((k * STRIDE) % size[:n_regular]).astype(np.uint64)
    words = size[n_regular:] // 8
    offs = (rng.random(n - n_regular) * words).astype(np.int64) * 8
    out[n_regular:] = bases[which[n_regular:]] + offs.astype(np.uint64)
    return out


def generate_trace(spec: WorkloadSpec, seed: int = 0) -> TraceFile:
    """Realise ``spec`` as a trace; identical (spec, seed) give identical traces."""
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence([seed & ((1 << 64) - 1)]))
    dur = spec.duration_ns
    events: list[tuple[int, int, AllocationEvent]] = []
    samples: list[tuple[int, MemorySample]] = []
    cursor = HEAP_BASE
    for o in spec.objects:
        stack = o.frames()
        t_lo, t_hi = int(o.lifetime[0] * dur), int(o.lifetime[1] * dur)
        edges = np.linspace(t_lo, t_hi, o.allocations + 1).astype(np.int64)
        span = -(-o.size // PAGE) * PAGE
        bases = []
        for a in range(o.allocations):
            base = cursor
            cursor += span + PAGE
            bases.append(base)
            start, end = int(edges[a]), int(edges[a + 1])
            events.append((start, 1, AllocationEvent(AllocKind.MAP, start, base, o.size, stack)))
            if o.freed or a < o.allocations - 1:
                events.append((end, 0, AllocationEvent(AllocKind.UNMAP, end, base)))
        bases = np.array(bases, dtype=np.uint64)
        sizes = np.full(o.allocations, o.size, dtype=np.int64)

        def times(n):
            # uniform over the live windows, sorted
            t = np.sort(rng.integers(t_lo, t_hi, size=n)) if n else np.zeros(0, dtype=np.int64)
            which = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, o.allocations - 1)
            return t, which

        n_loads = int(sum(o.loads))
        n_stores = int(o.stores)
        levels = np.repeat(np.arange(len(MemoryLevel)), o.loads)
        rng.shuffle(levels)
        lt, lw = times(n_loads)
        n_seq = int(round(o.load_sequentiality * n_loads))
        laddr = _addresses(rng, n_loads, n_seq, bases, sizes, lw)
        st, sw = times(n_stores)
        n_reg = int(round(o.store_regularity * n_stores))
        saddr = _addresses(rng, n_stores, n_reg, bases, sizes, sw)

        total = n_loads + n_stores
        n_miss = int(round(o.tlb_miss_dram_rate * total))
        miss = np.zeros(total, dtype=bool)
        miss[rng.permutation(total)[:n_miss]] = True
        hit_level = rng.choice(_TLB_HIT_LEVELS, size=total, p=_TLB_HIT_P)
        tids = rng.integers(0, spec.threads, size=total)
        is_seq = np.arange(n_loads) < n_seq
        lat = np.empty(n_loads, dtype=np.int64)
        for lv in MemoryLevel:
            sel = levels == lv
            if lv is MemoryLevel.DRAM:
                for mask, (lo, hi) in ((sel & is_seq, _DRAM_SEQ_LATENCY), (sel & ~is_seq, _DRAM_RAND_LATENCY)):
                    lat[mask] = rng.integers(lo, hi, size=int(mask.sum()))
            else:
                lo, hi = _LATENCY[lv]
                lat[sel] = rng.integers(lo, hi, size=int(sel.sum()))

        def tlb(k):
            if miss[k]:
                return TlbOutcome(MemoryLevel.DRAM, False)
            return TlbOutcome(MemoryLevel(int(hit_level[k])), True)

        for k in range(n_loads):
            samples.append((int(lt[k]), MemorySample(SampleKind.LOAD, int(lt[k]), int(tids[k]), int(laddr[k]),
                                                     MemoryLevel(int(levels[k])), int(lat[k]), tlb(k))))
        for k in range(n_stores):
            j = n_loads + k
            samples.append((int(st[k]), MemorySample(SampleKind.STORE, int(st[k]), int(tids[j]), int(saddr[k]),
                                                     MemoryLevel.L1, None, tlb(j))))

    # stack/global traffic outside every object
    for kind, n in ((SampleKind.LOAD, spec.unmapped_loads), (SampleKind.STORE, spec.unmapped_stores)):
        if not n:
            continue
        t = np.sort(rng.integers(0, dur, size=n))
        offs = rng.integers(0, STACK_SIZE // 8, size=n) * 8
        tids = rng.integers(0, spec.threads, size=n)
        lat = rng.integers(*_LATENCY[MemoryLevel.L1], size=n)
        for k in range(n):
            if kind is SampleKind.LOAD:
                s = MemorySample(kind, int(t[k]), int(tids[k]), STACK_BASE + int(offs[k]), MemoryLevel.L1,
                                 int(lat[k]), TlbOutcome(MemoryLevel.L1, True))
            else:
                s = MemorySample(kind, int(t[k]), int(tids[k]), STACK_BASE + int(offs[k]),
                                 tlb=TlbOutcome(MemoryLevel.L1, True))
            samples.append((int(t[k]), s))

    events.sort(key=lambda e: (e[0], e[1]))
    order = sorted(range(len(samples)), key=lambda i: samples[i][0])
    return TraceFile(samples=[samples[i][1] for i in order], alloc_events=[e[2] for e in events])
