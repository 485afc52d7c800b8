"""Ranking quality and placement-cost metrics for Top-1 object prediction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence


class MetricError(ValueError):
    pass


class NotInList(MetricError):
    pass


class EmptyInput(MetricError):
    pass


class InvalidTimes(MetricError):
    pass


class NoRelevant(MetricError):
    pass


@dataclass
class GroupEvaluation:
    group: str
    order: list
    hottest: str
    reciprocal_rank: float
    top1_hit: bool
    performance_loss_pct: float = 0.0
    t_predicted: Optional[float] = None
    t_best: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "predicted_top1": self.order[0],
            "hottest": self.hottest,
            "reciprocal_rank": round(self.reciprocal_rank, 6),
            "top1_hit": self.top1_hit,
            "performance_loss_pct": round(self.performance_loss_pct, 2),
            "order": list(self.order),
        }


def reciprocal_rank(order: Sequence, hottest) -> float:
    try:
        return 1.0 / (list(order).index(hottest) + 1)
    except ValueError:
        raise NotInList(f"{hottest!r} is not in the ranking") from None


def mrr(evals: Sequence) -> float:
    """Mean of reciprocal ranks; accepts evaluations or bare numbers."""
    if not evals:
        raise EmptyInput("mrr of no groups")
    rr = [e.reciprocal_rank if isinstance(e, GroupEvaluation) else float(e) for e in evals]
    return math.fsum(rr) / len(rr)


def top1_accuracy(evals: Sequence) -> float:
    if not evals:
        raise EmptyInput("accuracy of no groups")
    hits = [e.top1_hit if isinstance(e, GroupEvaluation) else bool(e) for e in evals]
    return sum(hits) / len(hits)


def performance_loss(t_predicted: float, t_best: float) -> float:
    """Percent slowdown of the predicted Top-1 placement relative to the best one."""
    if t_best <= 0:
        raise InvalidTimes("best time must be positive")
    if t_predicted < t_best:
        raise InvalidTimes(f"predicted time {t_predicted} beats the best time {t_best}")
    return 100.0 * (t_predicted - t_best) / t_best


@dataclass
class AccumulatedLoss:
    total: float
    mean: float
    std: float
    misses: int = 0

    def to_dict(self) -> dict:
        return {"total": round(self.total, 2), "mean": round(self.mean, 2),
                "std": round(self.std, 2), "misses": self.misses}


def accumulated_loss(evals: Sequence) -> AccumulatedLoss:
    """Sum, mean and population std of losses over the missed groups only.

    ``evals`` holds :class:`GroupEvaluation` records or plain loss percentages
    (zero meaning a hit).
    """
    losses = []
    for e in evals:
        if isinstance(e, GroupEvaluation):
            if not e.top1_hit:
                losses.append(e.performance_loss_pct)
        elif e:
            losses.append(float(e))
    if not losses:
        return AccumulatedLoss(0.0, 0.0, 0.0, 0)
    total = math.fsum(losses)
    mean = total / len(losses)
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in losses) / len(losses))
    return AccumulatedLoss(total, mean, std, len(losses))


def ndcg(order: Sequence, labels: Mapping) -> float:
    """NDCG of a full ranking with gain ``2**rel - 1`` and discount ``1/log2(pos+1)``."""
    rels = [labels[o] for o in order]
    if not any(rels):
        raise NoRelevant("ranking has no relevant item")
    dcg = math.fsum((2 ** r - 1) / math.log2(i + 2) for i, r in enumerate(rels))
    ideal = sorted(rels, reverse=True)
    idcg = math.fsum((2 ** r - 1) / math.log2(i + 2) for i, r in enumerate(ideal))
    return dcg / idcg


def evaluate_group(group: str, order: Sequence, hottest, times: Optional[Mapping] = None) -> GroupEvaluation:
    rr = reciprocal_rank(order, hottest)
    hit = order[0] == hottest
    loss, tp, tb = 0.0, None, None
    if times is not None:
        tp, tb = times[order[0]], times[hottest]
        loss = 0.0 if hit else performance_loss(tp, tb)
    return GroupEvaluation(group, list(order), hottest, rr, hit, loss, tp, tb)


@dataclass
class Summary:
    accuracy: float
    mrr: float
    accumulated_loss: AccumulatedLoss
    hits: int
    groups: int
    evaluations: list = field(default_factory=list, repr=False)

    def to_dict(self, per_group: bool = True) -> dict:
        out = {
            "accuracy": round(self.accuracy, 4),
            "mrr": round(self.mrr, 4),
            "accumulated_loss": self.accumulated_loss.to_dict(),
            "hits": self.hits,
            "groups": self.groups,
        }
        if per_group:
            out["per_group"] = [e.to_dict() for e in self.evaluations]
        return out


def summarize(evals: Sequence[GroupEvaluation]) -> Summary:
    return Summary(top1_accuracy(evals), mrr(evals), accumulated_loss(evals),
                   sum(e.top1_hit for e in evals), len(evals), list(evals))
