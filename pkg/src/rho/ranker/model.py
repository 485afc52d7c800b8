"""Gradient-boosted LambdaMART ranker over listwise groups."""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .. import metrics
from ..features import FEATURE_GROUPS, FEATURE_NAMES, REFINED_GROUPS, FeatureRow, group_rows
from . import _kernels
from .tree import RegressionTree, grow_tree

log = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1


class RankerError(ValueError):
    pass


class DegenerateDataset(RankerError):
    pass


class FeatureMismatch(RankerError):
    pass


class SchemaMismatch(RankerError):
    pass


class EmptySubset(RankerError):
    pass


@dataclass(frozen=True)
class RankerHyperparams:
    learning_rate: float = 0.03
    max_depth: int = 6
    n_trees: int = 100
    min_samples_leaf: int = 1
    seed: int = 0
    reg_lambda: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must fit in 64 bits")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")


@dataclass
class GbdtRankerModel:
    trees: list[RegressionTree]
    learning_rate: float
    feature_names: tuple[str, ...]
    base_score: float = 0.0
    metadata: dict = field(default_factory=dict)

    def staged_scores(self, X) -> Iterable[np.ndarray]:
        s = np.full(X.shape[0], self.base_score)
        yield s.copy()
        for tree in self.trees:
            s += self.learning_rate * tree.predict(X)
            yield s.copy()

    def score_matrix(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise FeatureMismatch(f"model expects {len(self.feature_names)} features")
        s = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            s += self.learning_rate * tree.predict(X)
        return s


@dataclass
class GroupRanking:
    group: str
    object_ids: list[str]
    scores: list[float]

    @property
    def top1(self) -> str:
        return self.object_ids[0]


def _sig(oid: str) -> int:
    return int(oid, 16)


def columns_for(names: Sequence[str]) -> list[int]:
    try:
        return [FEATURE_NAMES.index(n) for n in names]
    except ValueError as exc:
        raise FeatureMismatch(str(exc)) from None


def _matrix(rows: Sequence[FeatureRow], cols: Sequence[int]) -> np.ndarray:
    if not rows:
        return np.zeros((0, len(cols)))
    full = np.array([r.features for r in rows], dtype=np.float64)
    if full.shape[1] != len(FEATURE_NAMES):
        raise FeatureMismatch(f"rows carry {full.shape[1]} features, expected {len(FEATURE_NAMES)}")
    return np.ascontiguousarray(full[:, cols])


def _canonical(rows: Sequence[FeatureRow]):
    """Groups sorted by id, rows by signature; returns (rows, group_ptr)."""
    grouped = group_rows(rows)
    ordered, ptr = [], [0]
    for gid in sorted(grouped):
        members = sorted(grouped[gid], key=lambda r: _sig(r.object_id))
        ordered.extend(members)
        ptr.append(len(ordered))
    return ordered, np.array(ptr, dtype=np.int64)


def _validate_groups(rows, ptr):
    if len(ptr) - 1 < 2:
        raise DegenerateDataset("training needs at least 2 groups")
    for g in range(len(ptr) - 1):
        members = rows[ptr[g]:ptr[g + 1]]
        if len(members) < 2:
            raise DegenerateDataset(f"group {members[0].group!r} has fewer than 2 rows")
        if sum(r.rank for r in members) != 1:
            raise DegenerateDataset(f"group {members[0].group!r} needs exactly one rank-1 row")


def dataset_digest(X, labels, ptr) -> str:
    h = hashlib.sha256()
    for a in (np.ascontiguousarray(X, dtype=np.float64), labels.astype(np.int64), ptr.astype(np.int64)):
        h.update(a.tobytes())
    return h.hexdigest()


def train(rows: Sequence[FeatureRow], hp: RankerHyperparams = RankerHyperparams(),
          feature_names: Optional[Sequence[str]] = None) -> GbdtRankerModel:
    """Fit a LambdaMART ensemble on ``rows`` (all groups).

    ``feature_names`` restricts the model to a column subset; other columns
    are never read.
    """
    names = tuple(FEATURE_NAMES if feature_names is None else feature_names)
    if not names:
        raise EmptySubset("no features selected")
    cols = columns_for(names)
    ordered, ptr = _canonical(rows)
    _validate_groups(ordered, ptr)
    X = _matrix(ordered, cols)
    labels = np.array([r.rank for r in ordered], dtype=np.int64)
    disc = _kernels.discount_table(int(np.diff(ptr).max()))
    scores = np.zeros(len(ordered))
    trees = []
    for _ in range(hp.n_trees):
        pos = _kernels.positions(scores, ptr)
        grad, hess = _kernels.lambdas(scores, labels, ptr, pos, disc, hp.sigma)
        tree = grow_tree(X, grad, hess, hp.max_depth, hp.min_samples_leaf, hp.reg_lambda)
        trees.append(tree)
        scores += hp.learning_rate * tree.predict(X)
    meta = {
        "hyperparams": asdict(hp),
        "seed": hp.seed,
        "dataset_digest": dataset_digest(X, labels, ptr),
        "n_groups": int(len(ptr) - 1),
        "n_rows": int(len(ordered)),
    }
    log.debug("trained %d trees on %d groups", len(trees), len(ptr) - 1)
    return GbdtRankerModel(trees, hp.learning_rate, names, 0.0, meta)


def rank_group(group: str, object_ids: Sequence[str], scores) -> GroupRanking:
    order = sorted(range(len(object_ids)), key=lambda i: (-scores[i], _sig(object_ids[i])))
    return GroupRanking(group, [object_ids[i] for i in order], [float(scores[i]) for i in order])


def predict(model: GbdtRankerModel, rows: Sequence[FeatureRow]) -> GroupRanking:
    """Rank the rows of one group by descending score (signature breaks ties)."""
    if not rows:
        raise RankerError("cannot rank an empty group")
    cols = columns_for(model.feature_names)
    scores = model.score_matrix(_matrix(rows, cols))
    return rank_group(rows[0].group, [r.object_id for r in rows], scores)


def loocv(rows: Sequence[FeatureRow], hp: RankerHyperparams = RankerHyperparams(),
          feature_names: Optional[Sequence[str]] = None) -> dict[str, GroupRanking]:
    """Leave-one-group-out: each group ranked by a model trained on the rest."""
    grouped = group_rows(rows)
    if len(grouped) < 3:
        raise DegenerateDataset("leave-one-out needs at least 3 groups")
    out = {}
    for gid, held_out in grouped.items():
        train_rows = [r for g, rs in grouped.items() if g != gid for r in rs]
        model = train(train_rows, hp, feature_names)
        out[gid] = predict(model, held_out)
    return out


# -- evaluation helpers ---------------------------------------------------------

def hottest_of(rows: Sequence[FeatureRow]) -> str:
    hot = [r.object_id for r in rows if r.rank == 1]
    if len(hot) != 1:
        raise DegenerateDataset(f"group {rows[0].group!r} needs exactly one rank-1 row")
    return hot[0]


def evaluate_rankings(rankings: Mapping[str, GroupRanking], rows: Sequence[FeatureRow],
                      times: Optional[Mapping[str, Mapping[str, float]]] = None) -> metrics.Summary:
    grouped = group_rows(rows)
    evals = []
    for gid, members in grouped.items():
        rk = rankings[gid]
        evals.append(metrics.evaluate_group(gid, rk.object_ids, hottest_of(members),
                                            None if times is None else times[gid]))
    return metrics.summarize(evals)


def llcm_rankings(rows: Sequence[FeatureRow]) -> dict[str, GroupRanking]:
    """Baseline order per group from the raw LLC-miss column of the dataset."""
    out = {}
    for gid, members in group_rows(rows).items():
        if any(r.raw is None for r in members):
            raise FeatureMismatch("the LLC-miss baseline needs the raw dataset columns")
        misses = [float(r.raw[-1]) for r in members]
        out[gid] = rank_group(gid, [r.object_id for r in members], misses)
    return out


# -- feature-group ablation -------------------------------------------------------

BASE_GROUP_ORDER = ("access", "lat", "tlb", "stores", "footprint")


def standard_subsets(sizes=(1, 2, 3), refined: bool = True) -> list[tuple[str, ...]]:
    out = [c for k in sizes for c in itertools.combinations(BASE_GROUP_ORDER, k)]
    if refined:
        out += [(name,) for name in REFINED_GROUPS]
    return out


def subset_columns(subset: Sequence[str]) -> tuple[str, ...]:
    if not subset:
        raise EmptySubset("empty feature subset")
    table = {**FEATURE_GROUPS, **REFINED_GROUPS}
    names = set()
    for g in subset:
        if g not in table:
            raise EmptySubset(f"unknown feature group {g!r}")
        names.update(table[g])
    return tuple(n for n in FEATURE_NAMES if n in names)


@dataclass
class AblationRow:
    subset: str
    accuracy: float
    mrr: float
    accumulated_loss: float


def ablate(rows: Sequence[FeatureRow], hp: RankerHyperparams,
           times: Mapping[str, Mapping[str, float]],
           subsets: Optional[Sequence[Sequence[str]]] = None) -> list[AblationRow]:
    """LOOCV per feature-group subset, sorted by ascending accumulated loss."""
    subsets = standard_subsets() if subsets is None else subsets
    out = []
    for subset in subsets:
        rk = loocv(rows, hp, subset_columns(subset))
        s = evaluate_rankings(rk, rows, times)
        out.append(AblationRow("+".join(subset), s.accuracy, s.mrr, s.accumulated_loss.total))
    return sorted(out, key=lambda r: r.accumulated_loss)


def ablation_csv(table: Sequence[AblationRow]) -> str:
    lines = ["subset,accuracy,mrr,accumulated_loss"]
    lines += [f"{r.subset},{r.accuracy:.4f},{r.mrr:.4f},{r.accumulated_loss:.2f}" for r in table]
    return "\n".join(lines) + "\n"


# -- persistence ---------------------------------------------------------------

def model_to_dict(model: GbdtRankerModel) -> dict:
    return {
        "version": MODEL_SCHEMA_VERSION,
        "feature_names": list(model.feature_names),
        "learning_rate": model.learning_rate,
        "base_score": model.base_score,
        "trees": [{"nodes": t.to_nodes()} for t in model.trees],
        "metadata": model.metadata,
    }


def save_model(model: GbdtRankerModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":")) + "\n"


def load_model(text: str) -> GbdtRankerModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"model is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("version") != MODEL_SCHEMA_VERSION:
        raise SchemaMismatch("unsupported model schema version")
    try:
        names = tuple(doc["feature_names"])
        unknown = [n for n in names if n not in FEATURE_NAMES]
        if unknown:
            raise SchemaMismatch(f"unknown features {unknown}")
        trees = [RegressionTree.from_nodes(t["nodes"]) for t in doc["trees"]]
        for t in trees:
            if t.n_nodes == 0 or (t.feature >= len(names)).any():
                raise SchemaMismatch("tree references a feature outside the model")
            inner = t.feature >= 0
            if inner.any() and ((t.left[inner] <= 0) | (t.right[inner] <= 0) |
                                (t.left[inner] >= t.n_nodes) | (t.right[inner] >= t.n_nodes)).any():
                raise SchemaMismatch("tree child index out of range")
        return GbdtRankerModel(trees, float(doc["learning_rate"]), names,
                               float(doc["base_score"]), dict(doc.get("metadata", {})))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaMismatch):
            raise
        raise SchemaMismatch(f"malformed model document: {exc}") from None


def model_digest(model: GbdtRankerModel) -> str:
    return hashlib.sha256(save_model(model).encode("utf-8")).hexdigest()
