"""Trace -> objects -> mapped stats -> labelled feature rows, for one group."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional

from .features import (DEFAULT_THRESHOLD, FeatureError, FeatureRow, filter_objects, label_ranks, make_row,
                       order_group_rows)
from .placement.cost import CostModelConfig, GroundTruth, GroupProfile, ground_truth_labels, profile_trace
from .trace import TraceFile

log = logging.getLogger(__name__)


@dataclass
class GroupResult:
    name: str
    profile: GroupProfile
    rows: list[FeatureRow]
    times: dict[str, float]            # object_id -> seconds for retained objects
    truth: Optional[GroundTruth] = None

    def diagnostics(self) -> dict:
        d = {"group": self.name, **self.profile.diagnostics.to_dict(),
             "ambiguous_samples": int(len(self.profile.mapping.ambiguous)),
             "unmapped_samples": self.profile.mapping.app.unmapped_samples,
             "retained_objects": len(self.rows)}
        if self.truth is not None:
            d["hottest_filtered_out"] = self.truth.filtered_hottest
        return d


def _lookup(times: Mapping[str, float], obj) -> float:
    for key in (obj.object_id, obj.label):
        if key in times:
            return times[key]
    raise FeatureError(f"no time given for object {obj.object_id} ({obj.label})")


def build_group(trace: TraceFile, name: str, cfg: CostModelConfig = CostModelConfig(),
                threshold: float = DEFAULT_THRESHOLD,
                times: Optional[Mapping[str, float]] = None) -> GroupResult:
    """Label with the cost-model oracle, or with measured ``times`` when given.

    ``times`` maps object signature (``0x...``) or label to seconds.
    """
    profile = profile_trace(trace, name)
    mapping = profile.mapping
    retained = filter_objects(mapping.object_stats, mapping.app, threshold)
    objs = profile.objects
    truth = None
    if times is None:
        truth = ground_truth_labels(profile, cfg, retained=retained)
        t_by_idx = truth.times
        ranks = truth.ranks
        if truth.filtered_hottest:
            log.warning("group %s: oracle-hottest object %s fell below the %.0f%% filter",
                        name, objs[truth.hottest_overall].object_id, threshold * 100)
    else:
        t_by_idx = {i: _lookup(times, objs[i]) for i in retained}
        r = label_ranks([t_by_idx[i] for i in retained], [objs[i].peak_footprint for i in retained],
                        [objs[i].signature for i in retained])
        ranks = dict(zip(retained, r))
    rows = [make_row(name, objs[i].object_id, objs[i].label, mapping.object_stats[i], mapping.app,
                     objs[i].peak_footprint, profile.app_peak, ranks[i]) for i in retained]
    rows = order_group_rows(rows)  # descending access share, then signature
    return GroupResult(name, profile, rows, {objs[i].object_id: t_by_idx[i] for i in retained}, truth)
