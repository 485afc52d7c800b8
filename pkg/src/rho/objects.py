"""Allocation-site objects built from ``mmap``/``munmap`` events.

Objects are keyed by a 64-bit FNV-1a hash over the canonical string
``<size>|<stack height>|<frame>;<frame>;...`` where each frame renders as
``<symbol>+0x<offset>`` (innermost first).  Every ``mmap`` from the same
calling context with the same size lands in the same object.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .trace import AllocationEvent, AllocKind, TraceFile

log = logging.getLogger(__name__)

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class EmptyCallStack(ValueError):
    pass


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & _MASK64
    return h


def signature_key(size: int, frames: Sequence) -> str:
    return f"{size}|{len(frames)}|{';'.join(str(f) for f in frames)}"


def compute_signature(event: AllocationEvent) -> int:
    if event.kind is not AllocKind.MAP:
        raise ValueError("signatures are defined for map events only")
    if not event.call_stack:
        raise EmptyCallStack("map event without call stack")
    return fnv1a_64(signature_key(event.size, event.call_stack).encode("utf-8"))


def format_signature(sig: int) -> str:
    return f"0x{sig:016x}"


@dataclass
class LiveInterval:
    base: int
    size: int
    t_start: int
    t_end: Optional[int] = None
    closed_at_end: bool = False

    @property
    def is_open(self) -> bool:
        return self.t_end is None


@dataclass
class TrackedObject:
    signature: int
    label: str
    size: int
    intervals: list[LiveInterval] = field(default_factory=list)
    peak_footprint: int = 0

    @property
    def object_id(self) -> str:
        return format_signature(self.signature)


@dataclass
class TrackerDiagnostics:
    unmatched_unmaps: int = 0
    open_intervals_closed_at_end: int = 0
    distinct_signatures: int = 0
    map_events: int = 0

    def to_dict(self) -> dict:
        return {
            "unmatched_unmaps": self.unmatched_unmaps,
            "open_intervals_closed_at_end": self.open_intervals_closed_at_end,
            "distinct_signatures": self.distinct_signatures,
            "map_events": self.map_events,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def peak_live_bytes(intervals: Sequence[LiveInterval]) -> int:
    """Maximum of summed live sizes over time (half-open intervals, ends first)."""
    points = []
    for iv in intervals:
        if iv.t_end is not None and iv.t_end <= iv.t_start:
            continue
        points.append((iv.t_start, 1, iv.size))
        if iv.t_end is not None:
            points.append((iv.t_end, 0, -iv.size))
    points.sort()
    live = peak = 0
    for _, _, delta in points:
        live += delta
        peak = max(peak, live)
    return peak


def build_objects(events: Sequence[AllocationEvent], trace_end: Optional[int] = None):
    """Turn an ordered event stream into tracked objects.

    Intervals still open at the end are closed at ``trace_end + 1`` so that
    samples stamped exactly at ``trace_end`` stay inside them.  ``trace_end``
    defaults to the last event timestamp.

    Returns ``(objects, diagnostics)``; objects are in first-allocation order.
    """
    diag = TrackerDiagnostics()
    by_sig: dict[int, TrackedObject] = {}
    open_by_base: dict[int, list[LiveInterval]] = {}
    last_ts = 0
    for ev in events:
        last_ts = max(last_ts, ev.timestamp)
        if ev.kind is AllocKind.MAP:
            diag.map_events += 1
            sig = compute_signature(ev)
            obj = by_sig.get(sig)
            if obj is None:
                obj = TrackedObject(sig, str(ev.call_stack[0]), ev.size)
                by_sig[sig] = obj
            iv = LiveInterval(ev.base, ev.size, ev.timestamp)
            obj.intervals.append(iv)
            open_by_base.setdefault(ev.base, []).append(iv)
        else:
            stack = open_by_base.get(ev.base)
            if not stack:
                diag.unmatched_unmaps += 1
                log.debug("unmap of 0x%x at %d matches no live interval", ev.base, ev.timestamp)
                continue
            stack.pop().t_end = ev.timestamp
            if not stack:
                del open_by_base[ev.base]

    end = (last_ts if trace_end is None else max(trace_end, last_ts)) + 1
    for stack in open_by_base.values():
        for iv in stack:
            iv.t_end = end
            iv.closed_at_end = True
            diag.open_intervals_closed_at_end += 1

    objects = list(by_sig.values())
    for obj in objects:
        obj.peak_footprint = peak_live_bytes(obj.intervals)
    diag.distinct_signatures = len(objects)
    return objects, diag


def track(trace: TraceFile):
    """``build_objects`` with the trace end taken over both streams."""
    return build_objects(trace.alloc_events, trace.end_time())


def app_peak_footprint(objects: Sequence[TrackedObject]) -> int:
    return peak_live_bytes([iv for o in objects for iv in o.intervals])
