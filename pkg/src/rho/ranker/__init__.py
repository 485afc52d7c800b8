"""LambdaMART gradient-boosted ranker, cross-validation and ablation."""
from .model import (
    AblationRow,
    DegenerateDataset,
    EmptySubset,
    FeatureMismatch,
    GbdtRankerModel,
    GroupRanking,
    RankerError,
    RankerHyperparams,
    SchemaMismatch,
    ablate,
    ablation_csv,
    evaluate_rankings,
    hottest_of,
    llcm_rankings,
    load_model,
    loocv,
    model_digest,
    predict,
    rank_group,
    save_model,
    standard_subsets,
    subset_columns,
    train,
)
from .tree import RegressionTree, grow_tree
