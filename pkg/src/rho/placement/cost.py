"""Additive DRAM/PMEM cost model used as the ground-truth oracle.

Per object, with samples counted from the trace:

* cache-hit loads pay a fixed per-level cost in either tier;
* DRAM-level loads pay ``dram_load_ns``, times a PMEM read multiplier that
  blends the sequential and random multipliers by the object's measured load
  sequentiality;
* stores produce ``stores * (1 - store_regularity)`` estimated write-backs,
  each moving ``writeback_line_bytes`` at the tier's write bandwidth;
* DRAM-level TLB misses pay a page-walk penalty, scaled on PMEM.

Regularity of a stream is the fraction of consecutive address deltas (in
timestamp order) equal to the most common delta; a stream with fewer than two
accesses counts as fully regular.  This model is a deliberate simplification
meant to rank placements consistently, not to predict real run times.
"""
from __future__ import annotations

import dataclasses
import enum
import io
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from ..features import DEFAULT_THRESHOLD, filter_objects, label_ranks
from ..mapping import MappingResult, map_samples
from ..objects import TrackedObject, TrackerDiagnostics, app_peak_footprint, track
from ..trace import MemoryLevel, SampleArrays, TraceFile, sample_arrays


class Tier(enum.Enum):
    DRAM = "DRAM"
    PMEM = "PMEM"


class MissingStats(KeyError):
    pass


@dataclass(frozen=True)
class CostModelConfig:
    dram_load_ns: float = 80.0
    pmem_random_read_multiplier: float = 3.0
    pmem_sequential_read_multiplier: float = 2.0
    dram_write_bw_gbps: float = 80.0
    pmem_write_bw_gbps: float = 14.0
    cache_hit_ns: tuple = (1.0, 1.0, 4.0, 30.0)  # L1, LFB, L2, L3
    tlb_miss_dram_penalty_ns: float = 100.0
    pmem_tlb_multiplier: float = 3.0
    writeback_line_bytes: int = 64

    def __post_init__(self):
        object.__setattr__(self, "cache_hit_ns", tuple(float(x) for x in self.cache_hit_ns))
        if len(self.cache_hit_ns) != 4:
            raise ValueError("cache_hit_ns needs one cost per level L1, LFB, L2, L3")
        positive = [self.dram_load_ns, self.pmem_random_read_multiplier, self.pmem_sequential_read_multiplier,
                    self.dram_write_bw_gbps, self.pmem_write_bw_gbps, self.tlb_miss_dram_penalty_ns,
                    self.pmem_tlb_multiplier, self.writeback_line_bytes, *self.cache_hit_ns]
        if any(not (v > 0) for v in positive):
            raise ValueError("cost model parameters must be positive")
        if min(self.pmem_random_read_multiplier, self.pmem_sequential_read_multiplier,
               self.pmem_tlb_multiplier) < 1:
            raise ValueError("PMEM multipliers must be >= 1")
        if self.pmem_write_bw_gbps > self.dram_write_bw_gbps:
            raise ValueError("PMEM write bandwidth cannot exceed DRAM's")

    @classmethod
    def from_dict(cls, d: Mapping) -> "CostModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown cost model keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["cache_hit_ns"] = list(self.cache_hit_ns)
        return d


@dataclass
class Placement:
    tiers: dict[int, Tier]
    unmapped: Tier = Tier.DRAM

    @classmethod
    def only_in_dram(cls, signatures: Sequence[int], chosen: Optional[int]) -> "Placement":
        return cls({s: (Tier.DRAM if s == chosen else Tier.PMEM) for s in signatures})

    @classmethod
    def uniform(cls, signatures: Sequence[int], tier: Tier) -> "Placement":
        return cls({s: tier for s in signatures})


def modal_delta_fraction(keys: np.ndarray, ts: np.ndarray, addr: np.ndarray, n_keys: int) -> np.ndarray:
    """Regularity of each key's address stream; 1.0 for streams shorter than 2."""
    out = np.ones(n_keys)
    if len(keys) < 2:
        return out
    order = np.lexsort((np.arange(len(keys)), ts, keys))
    k = keys[order]
    a = addr[order].astype(np.uint64)
    same = k[1:] == k[:-1]
    kk = k[1:][same]
    dd = (a[1:] - a[:-1]).view(np.int64)[same]
    if not len(kk):
        return out
    pairs, counts = np.unique(np.stack([kk, dd], axis=1), axis=0, return_counts=True)
    modal = np.zeros(n_keys, dtype=np.int64)
    np.maximum.at(modal, pairs[:, 0], counts)
    n_deltas = np.bincount(kk, minlength=n_keys)
    has = n_deltas > 0
    out[has] = modal[has] / n_deltas[has]
    return out


@dataclass
class GroupProfile:
    """Everything the oracle needs from one trace.

    Row ``i < len(objects)`` is object ``i``; the extra last row collects
    unmapped samples.
    """

    name: str
    objects: list[TrackedObject]
    diagnostics: TrackerDiagnostics
    mapping: MappingResult
    load_sequentiality: np.ndarray
    store_regularity: np.ndarray
    app_peak: int

    @property
    def signatures(self) -> list[int]:
        return [o.signature for o in self.objects]

    def row_stats(self, i: int):
        if i == len(self.objects):
            return self.mapping.unmapped_stats
        return self.mapping.object_stats[i]


def profile_trace(trace: TraceFile, name: str = "", arrays: Optional[SampleArrays] = None) -> GroupProfile:
    objects, diag = track(trace)
    arrays = arrays if arrays is not None else sample_arrays(trace.samples)
    mapping = map_samples(arrays, objects)
    m = len(objects)
    rows = np.where(mapping.assignment < 0, m, mapping.assignment)
    ld = arrays.is_load
    seq = modal_delta_fraction(rows[ld], arrays.timestamp[ld], arrays.address[ld], m + 1)
    reg = modal_delta_fraction(rows[~ld], arrays.timestamp[~ld], arrays.address[~ld], m + 1)
    return GroupProfile(name, objects, diag, mapping, seq, reg, app_peak_footprint(objects))


def pmem_read_multiplier(seq_fraction: float, cfg: CostModelConfig) -> float:
    return (seq_fraction * cfg.pmem_sequential_read_multiplier
            + (1.0 - seq_fraction) * cfg.pmem_random_read_multiplier)


def row_cost_ns(profile: GroupProfile, row: int, tier: Tier, cfg: CostModelConfig) -> float:
    """Cost in ns of one object's (or the unmapped row's) sampled accesses on ``tier``."""
    s = profile.row_stats(row)
    pmem = tier is Tier.PMEM
    cache = math.fsum(float(s.loads[v]) * cfg.cache_hit_ns[v] for v in range(4))
    mult = pmem_read_multiplier(float(profile.load_sequentiality[row]), cfg) if pmem else 1.0
    dram_loads = float(s.loads[MemoryLevel.DRAM]) * cfg.dram_load_ns * mult
    writebacks = s.stores * (1.0 - float(profile.store_regularity[row]))
    bw = cfg.pmem_write_bw_gbps if pmem else cfg.dram_write_bw_gbps  # GB/s == bytes/ns
    wb = writebacks * cfg.writeback_line_bytes / bw
    tlb = float(s.tlb_miss[MemoryLevel.DRAM]) * cfg.tlb_miss_dram_penalty_ns * (cfg.pmem_tlb_multiplier if pmem else 1.0)
    return math.fsum((cache, dram_loads, wb, tlb))


def estimate_time(profile: GroupProfile, placement: Placement, cfg: CostModelConfig = CostModelConfig()) -> float:
    """Estimated execution time in seconds for ``placement``."""
    parts = []
    for i, o in enumerate(profile.objects):
        try:
            tier = placement.tiers[o.signature]
        except KeyError:
            raise MissingStats(f"placement has no tier for object {o.object_id}") from None
        parts.append(row_cost_ns(profile, i, tier, cfg))
    parts.append(row_cost_ns(profile, len(profile.objects), placement.unmapped, cfg))
    return math.fsum(parts) * 1e-9


@dataclass
class GroundTruth:
    group: str
    retained: list[int]                 # object indices that passed the filter
    times: dict[int, float]             # object index -> seconds, that object alone in DRAM
    ranks: dict[int, int]
    all_dram: float
    all_pmem: float
    hottest_overall: int                # argmin over every object, filtered or not
    filtered_hottest: bool = False

    @property
    def top1(self) -> int:
        return next(i for i, r in self.ranks.items() if r == 1)


def ground_truth_labels(profile: GroupProfile, cfg: CostModelConfig = CostModelConfig(),
                        threshold: float = DEFAULT_THRESHOLD, retained: Optional[Sequence[int]] = None) -> GroundTruth:
    """Time each retained object alone in DRAM (rest in PMEM); fastest is rank 1."""
    objs = profile.objects
    if retained is None:
        retained = filter_objects(profile.mapping.object_stats, profile.mapping.app, threshold)
    sigs = profile.signatures
    all_times = {i: estimate_time(profile, Placement.only_in_dram(sigs, sigs[i]), cfg) for i in range(len(objs))}
    times = {i: all_times[i] for i in retained}
    ranks = label_ranks([times[i] for i in retained], [objs[i].peak_footprint for i in retained],
                        [objs[i].signature for i in retained])
    overall = min(all_times, key=lambda i: (all_times[i], objs[i].peak_footprint, objs[i].signature))
    return GroundTruth(
        profile.name, list(retained), times, dict(zip(retained, ranks)),
        estimate_time(profile, Placement.uniform(sigs, Tier.DRAM), cfg),
        estimate_time(profile, Placement.uniform(sigs, Tier.PMEM), cfg),
        overall, overall not in retained,
    )


def baseline_llcm(stats, signatures: Sequence[int]) -> list[int]:
    """Object indices by descending DRAM-level load count, signature ascending on ties."""
    return sorted(range(len(stats)), key=lambda i: (-stats[i].llc_misses, signatures[i]))


@dataclass
class TradeoffEntry:
    group: str
    slowdown: float
    memory_reduction: float


def tradeoff_entry(profile: GroupProfile, truth: GroundTruth, chosen: Optional[int] = None,
                   cfg: CostModelConfig = CostModelConfig()) -> TradeoffEntry:
    """Slowdown and footprint reduction of keeping only ``chosen`` (default: true Top 1) in DRAM."""
    i = truth.top1 if chosen is None else chosen
    t = truth.times.get(i)
    if t is None:
        sigs = profile.signatures
        t = estimate_time(profile, Placement.only_in_dram(sigs, sigs[i]), cfg)
    total_fp = sum(o.peak_footprint for o in profile.objects)
    fp = profile.objects[i].peak_footprint
    return TradeoffEntry(truth.group, t / truth.all_dram, total_fp / fp if fp else float("inf"))


def tradeoff_report(entries: Sequence[TradeoffEntry]) -> str:
    buf = io.StringIO()
    buf.write("group,slowdown,memory_reduction\n")
    for e in entries:
        buf.write(f"{e.group},{e.slowdown:.6f},{e.memory_reduction:.6f}\n")
    return buf.getvalue()
