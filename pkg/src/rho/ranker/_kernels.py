"""Inner loops of the ranker, each in a numba and a numpy flavour.

Both flavours accumulate in the same order (row sums are sequential), so the
only cross-backend differences come from transcendental functions and stay
at the ulp level.
"""
import numpy as np

from .. import _accel

HESS_FLOOR = 1e-6
# split gains this close to the best count as ties; the first (feature, position) wins,
# so rounding noise from summation order cannot pick the split
TIE_RTOL = 1e-9


def positions(scores, group_ptr):
    """1-based rank of every row inside its group: score descending, row order on ties."""
    n = len(scores)
    group_of = np.repeat(np.arange(len(group_ptr) - 1), np.diff(group_ptr))
    order = np.lexsort((np.arange(n), -scores, group_of))
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n) - group_ptr[group_of[order]] + 1
    return pos


def discount_table(max_len):
    """``1 / log2(p + 1)`` for p = 0..max_len (index 0 unused)."""
    p = np.arange(max_len + 1, dtype=np.float64)
    out = np.zeros(max_len + 1)
    out[1:] = 1.0 / np.log2(p[1:] + 1.0)
    return out


# -- LambdaMART gradients ---------------------------------------------------

def _lambdas_loop(scores, labels, group_ptr, pos, disc, sigma, grad, hess):
    n_groups = group_ptr.shape[0] - 1
    for g in range(n_groups):
        a = group_ptr[g]
        b = group_ptr[g + 1]
        m = b - a
        gains = np.empty(m)
        for k in range(m):
            gains[k] = 2.0 ** labels[a + k] - 1.0
        ideal = np.sort(gains)[::-1]
        idcg = 0.0
        for k in range(m):
            idcg += ideal[k] * disc[k + 1]
        if idcg <= 0.0:
            continue
        w = np.zeros((m, m))
        u = np.zeros((m, m))
        for i in range(m):
            for j in range(m):
                if labels[a + i] > labels[a + j]:
                    dn = abs((gains[i] - gains[j]) * (disc[pos[a + i]] - disc[pos[a + j]])) / idcg
                    rho = 0.5 * (1.0 - np.tanh(0.5 * sigma * (scores[a + i] - scores[a + j])))
                    w[i, j] = sigma * dn * rho
                    u[i, j] = sigma * sigma * dn * rho * (1.0 - rho)
        for r in range(m):
            out_w = 0.0
            out_u = 0.0
            for j in range(m):
                out_w += w[r, j]
                out_u += u[r, j]
            in_w = 0.0
            in_u = 0.0
            for i in range(m):
                in_w += w[i, r]
                in_u += u[i, r]
            grad[a + r] = in_w - out_w
            hess[a + r] = out_u + in_u


_lambdas_kernel = _accel.njit(_lambdas_loop)


def lambdas_numba(scores, labels, group_ptr, pos, disc, sigma=1.0):
    grad = np.zeros(len(scores))
    hess = np.zeros(len(scores))
    _lambdas_kernel(scores, labels, group_ptr, pos, disc, float(sigma), grad, hess)
    return grad, np.maximum(hess, HESS_FLOOR)


def lambdas_numpy(scores, labels, group_ptr, pos, disc, sigma=1.0):
    grad = np.zeros(len(scores))
    hess = np.zeros(len(scores))
    for g in range(len(group_ptr) - 1):
        a, b = group_ptr[g], group_ptr[g + 1]
        y = labels[a:b]
        gains = 2.0 ** y - 1.0
        ideal = np.sort(gains)[::-1]
        idcg = np.cumsum(ideal * disc[1:b - a + 1])[-1]
        if idcg <= 0.0:
            continue
        d = disc[pos[a:b]]
        s = scores[a:b]
        pair = y[:, None] > y[None, :]
        dn = np.abs((gains[:, None] - gains[None, :]) * (d[:, None] - d[None, :])) / idcg
        rho = 0.5 * (1.0 - np.tanh(0.5 * sigma * (s[:, None] - s[None, :])))
        w = np.where(pair, sigma * dn * rho, 0.0)
        u = np.where(pair, sigma * sigma * dn * rho * (1.0 - rho), 0.0)
        out_w = np.cumsum(w, axis=1)[:, -1]
        in_w = np.cumsum(w.T, axis=1)[:, -1]
        out_u = np.cumsum(u, axis=1)[:, -1]
        in_u = np.cumsum(u.T, axis=1)[:, -1]
        grad[a:b] = in_w - out_w
        hess[a:b] = out_u + in_u
    return grad, np.maximum(hess, HESS_FLOOR)


# -- exact greedy split search ---------------------------------------------------

def _split_loop(X, grad, hess, idx, g_sum, h_sum, min_leaf, reg_lambda, min_gain, tie_rtol):
    n = idx.shape[0]
    n_feat = X.shape[1]
    parent = g_sum * g_sum / (h_sum + reg_lambda)
    gains = np.full((n_feat, max(n - 1, 0)), -np.inf)
    thr = np.zeros((n_feat, max(n - 1, 0)))
    vals = np.empty(n)
    top = -np.inf
    for f in range(n_feat):
        for k in range(n):
            vals[k] = X[idx[k], f]
        order = np.argsort(vals, kind="mergesort")
        gl = 0.0
        hl = 0.0
        for k in range(n - 1):
            r = idx[order[k]]
            gl += grad[r]
            hl += hess[r]
            v0 = vals[order[k]]
            v1 = vals[order[k + 1]]
            if not v0 < v1:
                continue
            if k + 1 < min_leaf or n - k - 1 < min_leaf:
                continue
            gr = g_sum - gl
            hr = h_sum - hl
            gain = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent
            gains[f, k] = gain
            t = 0.5 * (v0 + v1)
            thr[f, k] = t if v0 < t else v1
            if gain > top:
                top = gain
    if not top > min_gain:
        return -1, 0.0, min_gain
    floor = top - tie_rtol * abs(top)
    for f in range(n_feat):
        for k in range(n - 1):
            if gains[f, k] >= floor and gains[f, k] > min_gain:
                return f, thr[f, k], gains[f, k]
    return -1, 0.0, min_gain


_split_kernel = _accel.njit(_split_loop)


def best_split_numba(X, grad, hess, idx, g_sum, h_sum, min_leaf, reg_lambda, min_gain):
    f, t, gain = _split_kernel(X, grad, hess, idx, g_sum, h_sum, min_leaf, reg_lambda, min_gain, TIE_RTOL)
    return int(f), float(t), float(gain)


def best_split_numpy(X, grad, hess, idx, g_sum, h_sum, min_leaf, reg_lambda, min_gain):
    n = len(idx)
    if n < 2:
        return (-1, 0.0, min_gain)
    parent = g_sum * g_sum / (h_sum + reg_lambda)
    k = np.arange(n - 1)
    size_ok = (k + 1 >= min_leaf) & (n - k - 1 >= min_leaf)
    gi, hi = grad[idx], hess[idx]
    vals = X[idx].T
    order = np.argsort(vals, axis=1, kind="stable")
    sv = np.take_along_axis(vals, order, axis=1)
    gl = np.cumsum(gi[order], axis=1)[:, :-1]
    hl = np.cumsum(hi[order], axis=1)[:, :-1]
    gr = g_sum - gl
    hr = h_sum - hl
    gains = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent
    ok = size_ok & (sv[:, :-1] < sv[:, 1:])
    gains = np.where(ok, gains, -np.inf)
    top = gains.max()
    if not top > min_gain:
        return (-1, 0.0, min_gain)
    pick = (gains >= top - TIE_RTOL * abs(top)) & (gains > min_gain)
    f, j = np.unravel_index(int(np.argmax(pick)), pick.shape)
    v0, v1 = sv[f, j], sv[f, j + 1]
    t = 0.5 * (v0 + v1)
    return (int(f), float(t if v0 < t else v1), float(gains[f, j]))


# -- tree traversal ---------------------------------------------------------------

def _traverse_loop(X, feature, threshold, left, right, value, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]


_traverse_kernel = _accel.njit(_traverse_loop)


def traverse_numba(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    _traverse_kernel(X, feature, threshold, left, right, value, out)
    return out


def traverse_numpy(X, feature, threshold, left, right, value):
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    while True:
        inner = feature[node] >= 0
        if not inner.any():
            break
        r, nd = rows[inner], node[inner]
        go_left = X[r, feature[nd]] < threshold[nd]
        node[inner] = np.where(go_left, left[nd], right[nd])
    return value[node]


if _accel.USE_NUMBA:
    lambdas, best_split, traverse = lambdas_numba, best_split_numba, traverse_numba
else:
    lambdas, best_split, traverse = lambdas_numpy, best_split_numpy, traverse_numpy
