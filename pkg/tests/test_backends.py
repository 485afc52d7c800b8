import os
import subprocess
import sys

import numpy as np
import pytest

from rho import _accel
from rho.ranker import RankerHyperparams, model_digest, train
from rho.ranker import _kernels as K

from test_ranker import separable


def random_groups(rng, n_groups=20, max_len=9):
    sizes = rng.integers(2, max_len + 1, n_groups)
    ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    labels = np.zeros(ptr[-1], dtype=np.int64)
    for a, b in zip(ptr[:-1], ptr[1:]):
        labels[rng.integers(a, b)] = 1
    return ptr, labels


def test_flag_selects_numpy():
    env = {**os.environ, "RHO_DISABLE_NUMBA": "1"}
    out = subprocess.run([sys.executable, "-c", "from rho import _accel; print(_accel.backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_lambdas_agree():
    rng = np.random.default_rng(0)
    for _ in range(20):
        ptr, labels = random_groups(rng)
        s = rng.normal(size=len(labels))
        pos = K.positions(s, ptr)
        disc = K.discount_table(int(np.diff(ptr).max()))
        g1, h1 = K.lambdas_numba(s, labels, ptr, pos, disc)
        g2, h2 = K.lambdas_numpy(s, labels, ptr, pos, disc)
        np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(h1, h2, rtol=1e-12, atol=1e-15)


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_split_and_traverse_agree():
    rng = np.random.default_rng(1)
    for _ in range(30):
        X = np.round(rng.random((80, 6)), 2)
        g, h = rng.normal(size=80), rng.random(80) + 1e-3
        idx = np.sort(rng.choice(80, size=50, replace=False)).astype(np.int64)
        args = (X, g, h, idx, g[idx].sum(), h[idx].sum(), 1, 0.0, 1e-12)
        f1, t1, gain1 = K.best_split_numba(*args)
        f2, t2, gain2 = K.best_split_numpy(*args)
        assert (f1, t1) == (f2, t2)
        assert gain1 == pytest.approx(gain2, rel=1e-9)
    rows = separable(seed=3)
    m = train(rows, RankerHyperparams(n_trees=5))
    Xq = np.round(rng.random((200, 22)), 1)
    for t in m.trees:
        a = K.traverse_numba(Xq, t.feature, t.threshold, t.left, t.right, t.value)
        b = K.traverse_numpy(Xq, t.feature, t.threshold, t.left, t.right, t.value)
        assert (a == b).all()


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_training_agrees_across_backends(monkeypatch):
    rows = separable(n_groups=10, size=5, seed=8)
    hp = RankerHyperparams(n_trees=20)
    fast = train(rows, hp)
    monkeypatch.setattr(K, "lambdas", K.lambdas_numpy)
    monkeypatch.setattr(K, "best_split", K.best_split_numpy)
    monkeypatch.setattr(K, "traverse", K.traverse_numpy)
    slow = train(rows, hp)
    X = np.array([r.features for r in rows])
    np.testing.assert_allclose(fast.score_matrix(X), slow.score_matrix(X), rtol=1e-9, atol=1e-12)
    for a, b in zip(fast.trees, slow.trees):
        assert (a.feature == b.feature).all()
    assert isinstance(model_digest(slow), str)
