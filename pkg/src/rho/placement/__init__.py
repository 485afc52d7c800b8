"""Cost-model oracle, synthetic workloads and the LLC-miss baseline."""
from .cost import (
    CostModelConfig,
    GroundTruth,
    GroupProfile,
    MissingStats,
    Placement,
    Tier,
    TradeoffEntry,
    baseline_llcm,
    estimate_time,
    ground_truth_labels,
    modal_delta_fraction,
    profile_trace,
    row_cost_ns,
    tradeoff_entry,
    tradeoff_report,
)
from .generator import ObjectSpec, SpecInvalid, SuiteSpec, WorkloadSpec, generate_trace, load_suite, suite_from_dict, suite_to_dict
from .suite import default_suite
