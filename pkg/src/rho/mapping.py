"""Attribute sampled accesses to tracked objects and accumulate counters.

A sample belongs to an object when one of the object's live intervals holds
the sample's address in ``[base, base+size)`` and its timestamp in
``[t_start, t_end)``.  When intervals of different objects both match, the
interval with the later ``t_start`` wins (event order breaks exact ties) and
the sample is reported as ambiguous.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _accel
from .objects import TrackedObject
from .trace import LEVELS, N_LEVELS, SampleArrays, sample_arrays


class AmbiguousMapping(RuntimeError):
    pass


class ObjectStats:
    """Per-level counters for one object (or the whole application)."""

    __slots__ = ("loads", "latency", "tlb_hit", "tlb_miss", "stores", "mapped_samples")

    def __init__(self, loads=None, latency=None, tlb_hit=None, tlb_miss=None, stores=0, mapped_samples=0):
        z = lambda a: np.zeros(N_LEVELS, dtype=np.int64) if a is None else np.asarray(a, dtype=np.int64)
        self.loads = z(loads)
        self.latency = z(latency)
        self.tlb_hit = z(tlb_hit)
        self.tlb_miss = z(tlb_miss)
        self.stores = int(stores)
        self.mapped_samples = int(mapped_samples)

    @property
    def total_loads(self) -> int:
        return int(self.loads.sum())

    @property
    def accesses(self) -> int:
        return self.total_loads + self.stores

    @property
    def llc_misses(self) -> int:
        return int(self.loads[-1])

    def _key(self):
        return (tuple(self.loads), tuple(self.latency), tuple(self.tlb_hit),
                tuple(self.tlb_miss), self.stores, self.mapped_samples)

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __repr__(self):
        return (f"{type(self).__name__}(loads={self.loads.tolist()}, latency={self.latency.tolist()}, "
                f"tlb_hit={self.tlb_hit.tolist()}, tlb_miss={self.tlb_miss.tolist()}, "
                f"stores={self.stores}, mapped_samples={self.mapped_samples})")


class AppStats(ObjectStats):
    """Totals over every sample, mapped or not."""

    __slots__ = ("unmapped_samples",)

    def __init__(self, *args, unmapped_samples=0, **kw):
        super().__init__(*args, **kw)
        self.unmapped_samples = int(unmapped_samples)

    def _key(self):
        return super()._key() + (self.unmapped_samples,)


@dataclass
class IntervalTable:
    """Live intervals of all objects, sorted by base address."""

    base: np.ndarray     # uint64
    last: np.ndarray     # uint64, inclusive last byte
    t_start: np.ndarray  # int64
    t_end: np.ndarray    # int64, exclusive
    obj: np.ndarray      # int64 index into the object list
    order: np.ndarray    # int64 position in allocation order
    max_size: int

    @classmethod
    def from_objects(cls, objects: Sequence[TrackedObject]) -> "IntervalTable":
        rows = []
        for oi, o in enumerate(objects):
            for iv in o.intervals:
                if iv.t_end is None:
                    raise ValueError("intervals must be closed before mapping")
                rows.append((iv.base, min(iv.base + iv.size - 1, (1 << 64) - 1), iv.t_start, iv.t_end, oi))
        # allocation order = t_start, then object/interval order for exact ties
        order = sorted(range(len(rows)), key=lambda k: (rows[k][2], k))
        rank = np.empty(len(rows), dtype=np.int64)
        rank[order] = np.arange(len(rows))
        if rows:
            base = np.array([r[0] for r in rows], dtype=np.uint64)
            last = np.array([r[1] for r in rows], dtype=np.uint64)
            t0 = np.array([r[2] for r in rows], dtype=np.int64)
            t1 = np.array([r[3] for r in rows], dtype=np.int64)
            obj = np.array([r[4] for r in rows], dtype=np.int64)
        else:
            base = last = np.zeros(0, dtype=np.uint64)
            t0 = t1 = obj = np.zeros(0, dtype=np.int64)
        by_base = np.argsort(base, kind="stable")
        max_size = min(int((last - base).max()) + 1, (1 << 64) - 1) if rows else 0
        return cls(base[by_base], last[by_base], t0[by_base], t1[by_base],
                   obj[by_base], rank[by_base], max_size)


# -- containment kernels -------------------------------------------------------

def _locate_loop(addr, ts, base, last, t0, t1, obj, order, max_size, out_obj, out_amb):
    n = addr.shape[0]
    for i in range(n):
        a = addr[i]
        t = ts[i]
        j = np.searchsorted(base, a, side="right") - 1
        best = -1
        best_t0 = -1
        best_ord = -1
        first = -1
        amb = False
        while j >= 0:
            if a - base[j] >= max_size:
                break
            if a <= last[j] and t >= t0[j] and t < t1[j]:
                o = obj[j]
                if first == -1:
                    first = o
                elif o != first:
                    amb = True
                if t0[j] > best_t0 or (t0[j] == best_t0 and order[j] > best_ord):
                    best = o
                    best_t0 = t0[j]
                    best_ord = order[j]
            j -= 1
        out_obj[i] = best
        out_amb[i] = amb


_locate_numba_kernel = _accel.njit(_locate_loop)


def locate_numba(addr, ts, table: IntervalTable):
    out_obj = np.full(len(addr), -1, dtype=np.int64)
    out_amb = np.zeros(len(addr), dtype=np.bool_)
    if len(table.base) and len(addr):
        _locate_numba_kernel(addr, ts, table.base, table.last, table.t_start, table.t_end,
                             table.obj, table.order, np.uint64(table.max_size), out_obj, out_amb)
    return out_obj, out_amb


def locate_numpy(addr, ts, table: IntervalTable):
    n = len(addr)
    out_obj = np.full(n, -1, dtype=np.int64)
    out_amb = np.zeros(n, dtype=bool)
    if not len(table.base) or not n:
        return out_obj, out_amb
    hi = np.searchsorted(table.base, addr, side="right")
    span = np.uint64(table.max_size - 1)
    lower = np.where(addr >= span, addr - span, np.uint64(0))
    lo = np.searchsorted(table.base, lower, side="left")
    width = hi - lo
    best_t0 = np.full(n, -1, dtype=np.int64)
    best_ord = np.full(n, -1, dtype=np.int64)
    first = np.full(n, -1, dtype=np.int64)
    for k in range(int(width.max()) if n else 0):
        live = np.nonzero(width > k)[0]
        j = hi[live] - 1 - k
        hit = ((addr[live] <= table.last[j]) & (ts[live] >= table.t_start[j]) & (ts[live] < table.t_end[j]))
        live, j = live[hit], j[hit]
        o = table.obj[j]
        fresh = first[live] == -1
        first[live[fresh]] = o[fresh]
        out_amb[live[~fresh & (first[live] != o)]] = True
        t0, od = table.t_start[j], table.order[j]
        better = (t0 > best_t0[live]) | ((t0 == best_t0[live]) & (od > best_ord[live]))
        sel = live[better]
        out_obj[sel] = o[better]
        best_t0[sel] = t0[better]
        best_ord[sel] = od[better]
    return out_obj, out_amb


locate = locate_numba if _accel.USE_NUMBA else locate_numpy


# -- aggregation -----------------------------------------------------------------

@dataclass
class MappingResult:
    objects: list[TrackedObject]
    object_stats: list[ObjectStats]
    app: AppStats
    assignment: np.ndarray   # object index per sample, -1 when unmapped
    ambiguous: np.ndarray    # sample indices that matched several objects

    @property
    def unmapped_stats(self) -> ObjectStats:
        """Counters of the samples that no object claimed."""
        loads = self.app.loads - sum((s.loads for s in self.object_stats), np.zeros(N_LEVELS, np.int64))
        lat = self.app.latency - sum((s.latency for s in self.object_stats), np.zeros(N_LEVELS, np.int64))
        hit = self.app.tlb_hit - sum((s.tlb_hit for s in self.object_stats), np.zeros(N_LEVELS, np.int64))
        miss = self.app.tlb_miss - sum((s.tlb_miss for s in self.object_stats), np.zeros(N_LEVELS, np.int64))
        stores = self.app.stores - sum(s.stores for s in self.object_stats)
        return ObjectStats(loads, lat, hit, miss, stores, self.app.unmapped_samples)


def _counts(index, weights, n_rows):
    return np.bincount(index, weights=weights, minlength=n_rows * N_LEVELS).reshape(n_rows, N_LEVELS)


def accumulate(arrays: SampleArrays, assignment: np.ndarray, n_objects: int):
    """Counters per object (rows 0..n-1) plus a trailing row for unmapped samples."""
    rows = n_objects + 1
    row = np.where(assignment < 0, n_objects, assignment)
    ld = arrays.is_load
    loads = np.bincount(row[ld] * N_LEVELS + arrays.level[ld], minlength=rows * N_LEVELS)
    lat = np.zeros(rows * N_LEVELS, dtype=np.int64)
    np.add.at(lat, row[ld] * N_LEVELS + arrays.level[ld], arrays.latency[ld])
    has_tlb = arrays.tlb_level >= 0
    h = has_tlb & arrays.tlb_hit
    m = has_tlb & ~arrays.tlb_hit
    hits = np.bincount(row[h] * N_LEVELS + arrays.tlb_level[h], minlength=rows * N_LEVELS)
    misses = np.bincount(row[m] * N_LEVELS + arrays.tlb_level[m], minlength=rows * N_LEVELS)
    stores = np.bincount(row[~ld], minlength=rows)
    shape = (rows, N_LEVELS)
    return (loads.reshape(shape).astype(np.int64), lat.reshape(shape), hits.reshape(shape).astype(np.int64),
            misses.reshape(shape).astype(np.int64), stores.astype(np.int64))


def map_samples(samples, objects: Sequence[TrackedObject], strict: bool = False,
                locator=None) -> MappingResult:
    """Map samples to objects.

    ``samples`` is a list of :class:`MemorySample` or a prebuilt
    :class:`SampleArrays`.  With ``strict=True`` an ambiguous sample raises
    :class:`AmbiguousMapping` instead of being reported.
    """
    arrays = samples if isinstance(samples, SampleArrays) else sample_arrays(samples)
    table = IntervalTable.from_objects(objects)
    assignment, amb = (locator or locate)(arrays.address, arrays.timestamp, table)
    amb_idx = np.nonzero(amb)[0]
    if strict and len(amb_idx):
        raise AmbiguousMapping(f"{len(amb_idx)} samples fall into intervals of several objects")
    m = len(objects)
    loads, lat, hits, misses, stores = accumulate(arrays, assignment, m)
    per_obj = [ObjectStats(loads[i], lat[i], hits[i], misses[i], stores[i], loads[i].sum() + stores[i])
               for i in range(m)]
    unmapped = int(np.count_nonzero(assignment < 0))
    app = AppStats(loads.sum(0), lat.sum(0), hits.sum(0), misses.sum(0), stores.sum(),
                   len(arrays) - unmapped, unmapped_samples=unmapped)
    return MappingResult(list(objects), per_obj, app, assignment, amb_idx)


STATS_HEADER = (["object_id", "label", "mapped_samples", "stores"]
                + [f"{k}_{lv.name.lower()}" for k in ("loads", "latency", "tlb_hit", "tlb_miss") for lv in LEVELS])


def stats_csv(result: MappingResult) -> str:
    """Raw per-object counters, one row per object."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_HEADER)
    for o, s in zip(result.objects, result.object_stats):
        w.writerow([o.object_id, o.label, s.mapped_samples, s.stores,
                    *s.loads.tolist(), *s.latency.tolist(), *s.tlb_hit.tolist(), *s.tlb_miss.tolist()])
    return buf.getvalue()
