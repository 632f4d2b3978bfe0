"""Hot numeric kernels: CART regression tree fitting and forest prediction.

These run thousands of times per optimizer iteration inside the look-ahead
planner (one forest refit per speculated branch), so they are JIT-compiled
with numba by default. Set JOBTUNER_BACKEND=numpy to run the same kernel
source through the pure-NumPy/Python path (slow, dependency free, used as a
correctness reference); JOBTUNER_BACKEND=numba forces the JIT and raises if
numba is unavailable.

Configuration features take few distinct values per column (discrete levels,
one-hot indicators), so split search buckets samples by per-column value rank
instead of sorting: O(m * d) per node. Rank tables are built once per feature
matrix with `rank_encode`. Trees are stored as flat parallel arrays (feature,
threshold, left, right, value); feature < 0 marks a leaf. Tie-breaks are
deterministic: lowest feature index, then lowest threshold.
"""
from __future__ import annotations

import os

import numpy as np

BACKEND_ENV_VAR = "JOBTUNER_BACKEND"


def rank_encode(X: np.ndarray):
    """Per-column rank encoding of a feature matrix.

    Returns (ranks, values, n_distinct): ranks[i, j] is the index of X[i, j]
    in the sorted distinct values of column j, stored in values[j, :n_distinct[j]].
    """
    n, d = X.shape
    ranks = np.empty((n, d), dtype=np.int64)
    n_distinct = np.empty(d, dtype=np.int64)
    kmax = 1
    cols = []
    for j in range(d):
        vals, inv = np.unique(X[:, j], return_inverse=True)
        ranks[:, j] = inv
        n_distinct[j] = len(vals)
        kmax = max(kmax, len(vals))
        cols.append(vals)
    values = np.zeros((d, kmax))
    for j in range(d):
        values[j, : n_distinct[j]] = cols[j]
    return ranks, values, n_distinct


def _fit_tree(ranks, values, n_distinct, rows, y, sample, min_leaf,
              feat, thr, left, right, value,
              order, buf, cnt, ysum, y2sum, stack_node, stack_lo, stack_hi):
    # ranks/values/n_distinct: rank tables for the full feature matrix;
    # rows: global row of each training sample; y: target per training sample;
    # sample: bootstrap positions into rows/y. Iterative depth-first build.
    m0 = sample.shape[0]
    d = ranks.shape[1]
    for i in range(m0):
        order[i] = sample[i]
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = m0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo
        s = 0.0
        s2 = 0.0
        for i in range(lo, hi):
            yi = y[order[i]]
            s += yi
            s2 += yi * yi
        mean = s / m
        sse = s2 - s * s / m
        value[node] = mean
        feat[node] = -1
        if m < 2 * min_leaf or sse <= 1e-14 * s2:
            continue
        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        for j in range(d):
            k = n_distinct[j]
            if k < 2:
                continue
            # cnt/ysum/y2sum arrive zeroed; accumulate, scan, then clean up
            # only the rank range this node actually touches
            rmin = k
            rmax = -1
            for i in range(lo, hi):
                p = order[i]
                r = ranks[rows[p], j]
                if r < rmin:
                    rmin = r
                if r > rmax:
                    rmax = r
                cnt[r] += 1
                ysum[r] += y[p]
                y2sum[r] += y[p] * y[p]
            if rmax > rmin:
                # scan boundaries between consecutive ranks present in this node
                nl = 0
                sl = 0.0
                prev = -1
                for r in range(rmin, rmax + 1):
                    if cnt[r] == 0:
                        continue
                    if prev >= 0 and nl >= min_leaf and m - nl >= min_leaf:
                        sr = s - sl
                        gain = sse - (s2 - sl * sl / nl - sr * sr / (m - nl))
                        # gain = sse_parent - (sse_left + sse_right), larger is better
                        if gain > best_gain:
                            best_gain = gain
                            best_feat = j
                            best_thr = 0.5 * (values[j, prev] + values[j, r])
                    nl += cnt[r]
                    sl += ysum[r]
                    prev = r
            for r in range(rmin, rmax + 1):
                cnt[r] = 0
                ysum[r] = 0.0
                y2sum[r] = 0.0
        if best_feat < 0:
            continue
        # partition order[lo:hi] stably around the chosen threshold
        nl = 0
        nr = 0
        for i in range(lo, hi):
            p = order[i]
            if values[best_feat, ranks[rows[p], best_feat]] <= best_thr:
                buf[nl] = p
                nl += 1
        for i in range(lo, hi):
            p = order[i]
            if values[best_feat, ranks[rows[p], best_feat]] > best_thr:
                buf[nl + nr] = p
                nr += 1
        for i in range(m):
            order[lo + i] = buf[i]
        feat[node] = best_feat
        thr[node] = best_thr
        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        left[node] = lchild
        right[node] = rchild
        stack_node[top] = lchild
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        top += 1
        stack_node[top] = rchild
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        top += 1
    return n_nodes


def _fit_forest(ranks, values, n_distinct, rows, y, boot, min_leaf):
    n_trees, n = boot.shape
    kmax = values.shape[1]
    max_nodes = 2 * n + 1
    feat = np.full((n_trees, max_nodes), -1, dtype=np.int64)
    thr = np.zeros((n_trees, max_nodes))
    left = np.zeros((n_trees, max_nodes), dtype=np.int64)
    right = np.zeros((n_trees, max_nodes), dtype=np.int64)
    value = np.zeros((n_trees, max_nodes))
    order = np.empty(n, dtype=np.int64)
    buf = np.empty(n, dtype=np.int64)
    cnt = np.zeros(kmax, dtype=np.int64)
    ysum = np.zeros(kmax)
    y2sum = np.zeros(kmax)
    stack_node = np.empty(max_nodes + 1, dtype=np.int64)
    stack_lo = np.empty(max_nodes + 1, dtype=np.int64)
    stack_hi = np.empty(max_nodes + 1, dtype=np.int64)
    for t in range(n_trees):
        _fit_tree(ranks, values, n_distinct, rows, y, boot[t], min_leaf,
                  feat[t], thr[t], left[t], right[t], value[t],
                  order, buf, cnt, ysum, y2sum, stack_node, stack_lo, stack_hi)
    return feat, thr, left, right, value


_U_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_U_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix3(z):
    # SplitMix64 finalizer (z already offset by the golden increment)
    z = (z ^ (z >> np.uint64(30))) * _U_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U_MIX2
    return z ^ (z >> np.uint64(31))


def _fill_bootstrap(seed, boot):
    # identical stream to seeds.bootstrap_indices (kept in lockstep by tests)
    n_trees, n = boot.shape
    base = _mix3(seed + _U_GOLDEN)
    un = np.uint64(n)
    for t in range(n_trees):
        tree_seed = _mix3((base ^ np.uint64(t)) + _U_GOLDEN)
        for i in range(n):
            z = tree_seed + _U_GOLDEN * np.uint64(i + 1)
            boot[t, i] = np.int64(_mix3(z) % un)


def _fit_predict_rows(ranks, values, n_distinct, rows, y, seed, n_trees, min_leaf,
                      X, cand, sigma_floor):
    # Fused fit + predict for speculative models: generate the bootstrap,
    # fit the forest and return (mu, sigma) over the candidate rows in one
    # call, discarding the trees.
    n = rows.shape[0]
    kmax = values.shape[1]
    max_nodes = 2 * n + 1
    boot = np.empty((n_trees, n), dtype=np.int64)
    _fill_bootstrap(seed, boot)
    feat = np.full((n_trees, max_nodes), -1, dtype=np.int64)
    thr = np.zeros((n_trees, max_nodes))
    left = np.zeros((n_trees, max_nodes), dtype=np.int64)
    right = np.zeros((n_trees, max_nodes), dtype=np.int64)
    value = np.zeros((n_trees, max_nodes))
    order = np.empty(n, dtype=np.int64)
    buf = np.empty(n, dtype=np.int64)
    cnt = np.zeros(kmax, dtype=np.int64)
    ysum = np.zeros(kmax)
    y2sum = np.zeros(kmax)
    stack_node = np.empty(max_nodes + 1, dtype=np.int64)
    stack_lo = np.empty(max_nodes + 1, dtype=np.int64)
    stack_hi = np.empty(max_nodes + 1, dtype=np.int64)
    for t in range(n_trees):
        _fit_tree(ranks, values, n_distinct, rows, y, boot[t], min_leaf,
                  feat[t], thr[t], left[t], right[t], value[t],
                  order, buf, cnt, ysum, y2sum, stack_node, stack_lo, stack_hi)
    m = cand.shape[0]
    mu = np.empty(m)
    sd = np.empty(m)
    preds = np.empty(n_trees)
    for q in range(m):
        r = cand[q]
        for t in range(n_trees):
            node = 0
            while feat[t, node] >= 0:
                if X[r, feat[t, node]] <= thr[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            preds[t] = value[t, node]
        s = 0.0
        for t in range(n_trees):
            s += preds[t]
        mean = s / n_trees
        acc = 0.0
        for t in range(n_trees):
            dlt = preds[t] - mean
            acc += dlt * dlt
        mu[q] = mean
        sdq = np.sqrt(acc / (n_trees - 1))
        sd[q] = sdq if sdq > sigma_floor else sigma_floor
    return mu, sd


def _fit_predict_batch(ranks, values, n_distinct, rows, ys, seeds, n_trees,
                       min_leaf, X, cand, floors):
    # Fit one forest per row of ys (shared training rows, different targets
    # and bootstrap seeds) and predict all candidate rows for each: the K
    # sibling branches of one planner expansion in a single call.
    n_batch = ys.shape[0]
    n = rows.shape[0]
    m = cand.shape[0]
    kmax = values.shape[1]
    max_nodes = 2 * n + 1
    boot = np.empty((n_trees, n), dtype=np.int64)
    feat = np.empty((n_trees, max_nodes), dtype=np.int64)
    thr = np.zeros((n_trees, max_nodes))
    left = np.zeros((n_trees, max_nodes), dtype=np.int64)
    right = np.zeros((n_trees, max_nodes), dtype=np.int64)
    value = np.zeros((n_trees, max_nodes))
    order = np.empty(n, dtype=np.int64)
    buf = np.empty(n, dtype=np.int64)
    cnt = np.zeros(kmax, dtype=np.int64)
    ysum = np.zeros(kmax)
    y2sum = np.zeros(kmax)
    stack_node = np.empty(max_nodes + 1, dtype=np.int64)
    stack_lo = np.empty(max_nodes + 1, dtype=np.int64)
    stack_hi = np.empty(max_nodes + 1, dtype=np.int64)
    mu = np.empty((n_batch, m))
    sd = np.empty((n_batch, m))
    preds = np.empty(n_trees)
    for b in range(n_batch):
        _fill_bootstrap(seeds[b], boot)
        y = ys[b]
        for t in range(n_trees):
            _fit_tree(ranks, values, n_distinct, rows, y, boot[t], min_leaf,
                      feat[t], thr[t], left[t], right[t], value[t],
                      order, buf, cnt, ysum, y2sum, stack_node, stack_lo, stack_hi)
        floor = floors[b]
        for q in range(m):
            r = cand[q]
            for t in range(n_trees):
                node = 0
                while feat[t, node] >= 0:
                    if X[r, feat[t, node]] <= thr[t, node]:
                        node = left[t, node]
                    else:
                        node = right[t, node]
                preds[t] = value[t, node]
            s = 0.0
            for t in range(n_trees):
                s += preds[t]
            mean = s / n_trees
            acc = 0.0
            for t in range(n_trees):
                dlt = preds[t] - mean
                acc += dlt * dlt
            mu[b, q] = mean
            sdq = np.sqrt(acc / (n_trees - 1))
            sd[b, q] = sdq if sdq > floor else floor
    return mu, sd


def _tree_predictions(feat, thr, left, right, value, Xq):
    # per-tree predictions: (n_query, n_trees)
    n_trees = feat.shape[0]
    m = Xq.shape[0]
    out = np.empty((m, n_trees))
    for q in range(m):
        for t in range(n_trees):
            node = 0
            while feat[t, node] >= 0:
                if Xq[q, feat[t, node]] <= thr[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[q, t] = value[t, node]
    return out


def _forest_mean_std(feat, thr, left, right, value, Xq):
    # ensemble mean and sample std (ddof=1) per query point
    n_trees = feat.shape[0]
    m = Xq.shape[0]
    mu = np.empty(m)
    sd = np.empty(m)
    preds = np.empty(n_trees)
    for q in range(m):
        for t in range(n_trees):
            node = 0
            while feat[t, node] >= 0:
                if Xq[q, feat[t, node]] <= thr[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            preds[t] = value[t, node]
        s = 0.0
        for t in range(n_trees):
            s += preds[t]
        mean = s / n_trees
        acc = 0.0
        for t in range(n_trees):
            dlt = preds[t] - mean
            acc += dlt * dlt
        mu[q] = mean
        sd[q] = np.sqrt(acc / (n_trees - 1))
    return mu, sd


def _forest_mean_std_rows(feat, thr, left, right, value, X, rows):
    # same as _forest_mean_std but gathers query rows from X inline
    n_trees = feat.shape[0]
    m = rows.shape[0]
    mu = np.empty(m)
    sd = np.empty(m)
    preds = np.empty(n_trees)
    for q in range(m):
        r = rows[q]
        for t in range(n_trees):
            node = 0
            while feat[t, node] >= 0:
                if X[r, feat[t, node]] <= thr[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            preds[t] = value[t, node]
        s = 0.0
        for t in range(n_trees):
            s += preds[t]
        mean = s / n_trees
        acc = 0.0
        for t in range(n_trees):
            dlt = preds[t] - mean
            acc += dlt * dlt
        mu[q] = mean
        sd[q] = np.sqrt(acc / (n_trees - 1))
    return mu, sd


def _select_backend() -> str:
    requested = os.environ.get(BACKEND_ENV_VAR, "auto").lower()
    if requested not in ("auto", "numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV_VAR} must be auto, numba or numpy, not {requested!r}")
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _select_backend()

if BACKEND == "numba":
    from numba import njit

    _fit_tree = njit(cache=True, nogil=True)(_fit_tree)
    _fit_forest = njit(cache=True, nogil=True)(_fit_forest)
    _mix3 = njit(cache=True, nogil=True)(_mix3)
    _fill_bootstrap = njit(cache=True, nogil=True)(_fill_bootstrap)
    _fit_predict_rows = njit(cache=True, nogil=True)(_fit_predict_rows)
    _fit_predict_batch = njit(cache=True, nogil=True)(_fit_predict_batch)
    _tree_predictions = njit(cache=True, nogil=True)(_tree_predictions)
    _forest_mean_std = njit(cache=True, nogil=True)(_forest_mean_std)
    _forest_mean_std_rows = njit(cache=True, nogil=True)(_forest_mean_std_rows)

fit_forest = _fit_forest
fit_predict_rows = _fit_predict_rows
fit_predict_batch = _fit_predict_batch
tree_predictions = _tree_predictions
forest_mean_std = _forest_mean_std
forest_mean_std_rows = _forest_mean_std_rows


def warmup():
    """Force JIT compilation on tiny inputs (no-op for the numpy backend)."""
    X = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0]])
    y = np.array([1.0, 2.0, 3.0, 4.0])
    rows = np.arange(4, dtype=np.int64)
    boot = np.array([[0, 1, 2, 3], [3, 2, 1, 0]], dtype=np.int64)
    ranks, values, n_distinct = rank_encode(X)
    forest = fit_forest(ranks, values, n_distinct, rows, y, boot, 2)
    tree_predictions(*forest, X)
    forest_mean_std(*forest, X)
    forest_mean_std_rows(*forest, X, rows)
    fit_predict_rows(ranks, values, n_distinct, rows, y, np.uint64(7), 2, 2, X, rows, 1e-9)
    fit_predict_batch(ranks, values, n_distinct, rows, np.stack((y, y + 1.0)),
                      np.array([7, 8], dtype=np.uint64), 2, 2, X, rows,
                      np.array([1e-9, 1e-9]))
