"""Feature rows: application distributions, object shares and their products.

Each object row carries 21 derived products (app share x object share, paired
by name) plus ``mem_footprint``; those 22 columns are the model input.  The raw
application and object columns ride along in the CSV for inspection only.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .mapping import AppStats, ObjectStats
from .trace import LEVELS

_KINDS = ("loads", "lat", "tlb_hit", "tlb_miss")
PAIRED_NAMES = tuple(f"{k}_{lv.name.lower()}" for k in _KINDS for lv in LEVELS) + ("stores",)
FEATURE_NAMES = PAIRED_NAMES + ("mem_footprint",)
N_PAIRED = len(PAIRED_NAMES)
N_FEATURES = len(FEATURE_NAMES)

# feature groups for ablation
FEATURE_GROUPS = {
    "access": tuple(n for n in PAIRED_NAMES if n.startswith("loads_")),
    "lat": tuple(n for n in PAIRED_NAMES if n.startswith("lat_")),
    "tlb": tuple(n for n in PAIRED_NAMES if n.startswith("tlb_")),
    "stores": ("stores",),
    "footprint": ("mem_footprint",),
}
REFINED_GROUPS = {
    "tlb_miss_only": tuple(n for n in PAIRED_NAMES if n.startswith("tlb_miss_")),
    "external_access_only": ("loads_dram",),
}

DEFAULT_THRESHOLD = 0.10
CSV_VERSION = 1
RAW_NAMES = tuple(f"{n}_a" for n in PAIRED_NAMES) + tuple(f"{n}_o" for n in PAIRED_NAMES) + ("llc_misses",)
DATASET_HEADER = ("group", "object_id", "label", "rank") + FEATURE_NAMES


class FeatureError(ValueError):
    pass


class EmptyTrace(FeatureError):
    pass


class NoObjectsRetained(FeatureError):
    pass


def _share(num, den) -> np.ndarray:
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


def app_features(app: AppStats) -> np.ndarray:
    """Per-level distributions of the application's own samples (21 values)."""
    if app.total_loads + app.stores == 0:
        raise EmptyTrace("trace has no load or store samples")
    tlb_total = app.tlb_hit.sum() + app.tlb_miss.sum()
    return np.concatenate([
        _share(app.loads, app.loads.sum()),
        _share(app.latency, app.latency.sum()),
        _share(app.tlb_hit, tlb_total),
        _share(app.tlb_miss, tlb_total),
        [_share(app.stores, app.total_loads + app.stores)],
    ])


def object_features(obj: ObjectStats, app: AppStats, footprint: int, app_peak: int) -> np.ndarray:
    """Object's share of each application counter, then normalised footprint (22 values)."""
    return np.concatenate([
        _share(obj.loads, app.loads),
        _share(obj.latency, app.latency),
        _share(obj.tlb_hit, app.tlb_hit),
        _share(obj.tlb_miss, app.tlb_miss),
        [_share(obj.stores, app.stores)],
        [_share(footprint, app_peak)],
    ])


def derive_products(app21, obj21) -> np.ndarray:
    app21 = np.asarray(app21, dtype=np.float64)
    obj21 = np.asarray(obj21, dtype=np.float64)
    if app21.shape != obj21.shape:
        raise FeatureError("app and object vectors must pair up")
    return app21 * obj21


def access_share(obj: ObjectStats, app: AppStats) -> float:
    total = app.total_loads + app.stores
    return (obj.total_loads + obj.stores) / total if total else 0.0


def filter_objects(stats: Sequence[ObjectStats], app: AppStats,
                   threshold: float = DEFAULT_THRESHOLD) -> list[int]:
    """Indices of objects whose load+store share reaches ``threshold`` (inclusive)."""
    if app.total_loads + app.stores == 0:
        raise EmptyTrace("trace has no load or store samples")
    total = app.total_loads + app.stores
    # integer comparison avoids float noise at the boundary
    keep = [i for i, s in enumerate(stats) if (s.total_loads + s.stores) >= threshold * total - 1e-9 * total]
    if not keep:
        raise NoObjectsRetained(f"no object reaches {threshold:.2%} of application accesses")
    return keep


def label_ranks(times: Sequence[float], footprints: Sequence[int], signatures: Sequence) -> list[int]:
    """Binary relevance: the fastest object-in-DRAM time gets 1.

    Ties go to the smaller footprint, then to the smaller signature.
    """
    if not times:
        return []
    if any(t <= 0 for t in times):
        raise FeatureError("execution times must be positive")
    best = min(range(len(times)), key=lambda i: (times[i], footprints[i], signatures[i]))
    return [int(i == best) for i in range(len(times))]


@dataclass
class FeatureRow:
    group: str
    object_id: str
    label: str
    features: np.ndarray
    rank: int
    raw: Optional[np.ndarray] = None
    share: float = field(default=0.0, compare=False)


def make_row(group: str, object_id: str, label: str, obj: ObjectStats, app: AppStats,
             footprint: int, app_peak: int, rank: int = 0) -> FeatureRow:
    a = app_features(app)
    o = object_features(obj, app, footprint, app_peak)
    feats = np.concatenate([derive_products(a, o[:N_PAIRED]), o[N_PAIRED:]])
    raw = np.concatenate([a, o[:N_PAIRED], [obj.llc_misses]])
    return FeatureRow(group, object_id, label, feats, rank, raw, access_share(obj, app))


# -- dataset CSV -------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.6f}"


def order_group_rows(rows: Sequence[FeatureRow]) -> list[FeatureRow]:
    return sorted(rows, key=lambda r: (-r.share, int(r.object_id, 16)))


def emit_dataset(groups: Iterable[Sequence[FeatureRow]], raw: bool = True) -> str:
    """CSV text for labelled groups; groups and rows keep their given order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DATASET_HEADER + (RAW_NAMES if raw else ()))
    for rows in groups:
        ranks = [r.rank for r in rows]
        if rows and sum(ranks) != 1:
            raise FeatureError(f"group {rows[0].group!r} needs exactly one rank-1 row")
        for r in rows:
            line = [r.group, r.object_id, r.label, r.rank] + [_fmt(v) for v in r.features]
            if raw:
                if r.raw is None:
                    raise FeatureError("raw columns requested but missing")
                line += [_fmt(v) for v in r.raw[:-1]] + [str(int(r.raw[-1]))]
            w.writerow(line)
    return buf.getvalue()


def parse_dataset(text: str) -> list[FeatureRow]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise FeatureError("empty dataset") from None
    if header[:len(DATASET_HEADER)] != DATASET_HEADER:
        raise FeatureError("dataset header does not match the v1 layout")
    has_raw = len(header) > len(DATASET_HEADER)
    if has_raw and header[len(DATASET_HEADER):] != RAW_NAMES:
        raise FeatureError("unexpected raw columns")
    rows = []
    nf = len(DATASET_HEADER)
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(header):
            raise FeatureError(f"line {lineno}: expected {len(header)} columns")
        feats = np.array([float(v) for v in rec[4:nf]])
        raw = np.array([float(v) for v in rec[nf:]]) if has_raw else None
        rows.append(FeatureRow(rec[0], rec[1], rec[2], feats, int(rec[3]), raw))
    return rows


def read_dataset(path) -> list[FeatureRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_dataset(fh.read())


def group_rows(rows: Iterable[FeatureRow]) -> dict[str, list[FeatureRow]]:
    """Rows by group id, groups in first-seen order."""
    out: dict[str, list[FeatureRow]] = {}
    for r in rows:
        out.setdefault(r.group, []).append(r)
    return out


# -- times files -------------------------------------------------------------

TIMES_HEADER = ("group", "object_id", "time_s")


def emit_times(entries: Iterable[tuple[str, str, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMES_HEADER)
    for g, oid, t in entries:
        w.writerow([g, oid, repr(float(t))])
    return buf.getvalue()


def parse_times(text: str) -> dict[str, dict[str, float]]:
    """``{group: {object key: seconds}}``; object key is a signature or a label."""
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader, ()))
    if header != TIMES_HEADER:
        raise FeatureError(f"times file header must be {','.join(TIMES_HEADER)}")
    out: dict[str, dict[str, float]] = {}
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != 3:
            raise FeatureError(f"times line {lineno}: expected 3 columns")
        try:
            t = float(rec[2])
        except ValueError:
            raise FeatureError(f"times line {lineno}: bad time {rec[2]!r}") from None
        out.setdefault(rec[0], {})[rec[1]] = t
    return out
