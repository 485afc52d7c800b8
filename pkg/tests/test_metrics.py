import math

import pytest
from hypothesis import given, strategies as st

from oracles import ndcg_ref
from rho.metrics import (EmptyInput, InvalidTimes, NoRelevant, NotInList, accumulated_loss, evaluate_group,
                         mrr, ndcg, performance_loss, reciprocal_rank, summarize, top1_accuracy)


def test_reciprocal_rank():
    assert reciprocal_rank(["h", "b", "c"], "h") == 1
    assert reciprocal_rank(["a", "h", "c"], "h") == 0.5
    assert reciprocal_rank(["a", "b", "h", "d", "e"], "h") == 1 / 3
    with pytest.raises(NotInList):
        reciprocal_rank(["a"], "h")


def test_mrr():
    assert mrr([1, 1, 0.5, 0.5]) == 0.75
    assert mrr([1] * 7) == 1.0
    with pytest.raises(EmptyInput):
        mrr([])


def test_mrr_shape_is_representable():
    # 26 hits and 11 misses at positions chosen to land on 0.84
    rr = [1.0] * 26 + [0.5] * 8 + [1 / 3] * 2 + [0.25]
    assert round(mrr(rr), 2) == 0.84


def test_accuracy():
    assert round(top1_accuracy([True] * 26 + [False] * 11), 4) == 0.7027
    assert round(top1_accuracy([True] * 34 + [False] * 3), 4) == 0.9189
    assert top1_accuracy([False] * 5) == 0


def test_performance_loss():
    assert performance_loss(60, 40) == 50.0
    assert performance_loss(40, 40) == 0.0
    assert performance_loss(55, 50) == pytest.approx(10.0)
    with pytest.raises(InvalidTimes):
        performance_loss(30, 40)
    with pytest.raises(InvalidTimes):
        performance_loss(1, 0)


def test_accumulated_loss():
    assert accumulated_loss([0, 0]).total == 0
    a = accumulated_loss([50.0, 0, 10.0])
    assert (a.total, a.mean, a.misses) == (60.0, 30.0, 2)
    assert a.std == 20.0


def test_accumulated_loss_eleven_misses():
    # 135% over eleven misses, mean 12.27, std 10.18
    x = [34.2, 29.19, 19.65, 12.01, 8.19, 7.24, 6.29, 5.33, 5.09, 4.38, 3.43]
    a = accumulated_loss(x)
    assert round(a.total) == 135 and a.misses == 11
    assert (round(a.mean, 2), round(a.std, 2)) == (12.27, 10.18)


@given(st.lists(st.floats(0, 500), max_size=20), st.lists(st.floats(0, 500), max_size=20))
def test_accumulated_loss_is_additive(a, b):
    assert accumulated_loss(a + b).total == pytest.approx(accumulated_loss(a).total + accumulated_loss(b).total)


def test_ndcg():
    assert ndcg(["h", "x"], {"h": 1, "x": 0}) == 1.0
    assert ndcg(["x", "h", "y"], {"h": 1, "x": 0, "y": 0}) == pytest.approx(0.6309, abs=1e-4)
    assert ndcg(["a", "b", "c", "h"], {"h": 1, "a": 0, "b": 0, "c": 0}) == pytest.approx(0.4307, abs=1e-4)
    assert ndcg(["x", "h"], {"h": 1, "x": 0}) == 1 / math.log2(3)
    with pytest.raises(NoRelevant):
        ndcg(["a"], {"a": 0})


@given(st.lists(st.integers(0, 3), min_size=1, max_size=12).filter(any))
def test_ndcg_matches_reference(rels):
    order = list(range(len(rels)))
    got = ndcg(order, dict(enumerate(rels)))
    assert got == pytest.approx(ndcg_ref(rels), rel=1e-12)
    assert 0 < got <= 1


def test_evaluate_group_and_summary():
    times = {"a": 60.0, "b": 40.0}
    miss = evaluate_group("g1", ["a", "b"], "b", times)
    hit = evaluate_group("g2", ["b", "a"], "b", times)
    assert miss.performance_loss_pct == 50.0 and miss.reciprocal_rank == 0.5
    assert hit.performance_loss_pct == 0.0 and hit.top1_hit
    s = summarize([miss, hit])
    assert (s.accuracy, s.mrr, s.hits, s.groups) == (0.5, 0.75, 1, 2)
    assert s.accumulated_loss.total == 50.0
    d = s.to_dict()
    assert set(d) >= {"accuracy", "mrr", "accumulated_loss", "hits"}
