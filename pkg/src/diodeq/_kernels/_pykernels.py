"""Pure numpy versions of the compiled kernels (used when the extension is absent)."""
import numpy as np


def _distances(train, queries, p):
    diff = np.abs(queries[:, None, :] - train[None, :, :])
    if np.isinf(p):
        return diff.max(axis=2) if diff.shape[2] else np.zeros(diff.shape[:2])
    if p == 1.0:
        return diff.sum(axis=2)
    if p == 2.0:
        return np.sqrt((diff * diff).sum(axis=2))
    if p == 4.0:
        sq = diff * diff
        return np.power((sq * sq).sum(axis=2), 0.25)
    return np.power(np.power(diff, p).sum(axis=2), 1.0 / p)


def knn_search(train, queries, k, p, chunk=512):
    """k nearest training rows per query; ties go to the lower row index."""
    train = np.ascontiguousarray(train, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    m = queries.shape[0]
    idx = np.empty((m, k), dtype=np.int64)
    dist = np.empty((m, k), dtype=np.float64)
    for start in range(0, m, chunk):
        d = _distances(train, queries[start:start + chunk], p)
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        idx[start:start + chunk] = order
        dist[start:start + chunk] = np.take_along_axis(d, order, axis=1)
    return idx, dist


def best_split(X, y, order, min_leaf):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, nf = X.shape
    if n < 2 * min_leaf or n < 2:
        return -1, 0.0, 0.0
    best = (-np.inf, -1, 0.0)
    sizes = np.arange(1, n)
    for f in range(nf):
        xs = X[order[:, f], f]
        ys = y[order[:, f]]
        csum = np.cumsum(ys)
        left = csum[:-1]
        right = csum[-1] - left
        score = left * left / sizes + right * right / (n - sizes)
        ok = (sizes >= min_leaf) & (n - sizes >= min_leaf) & (xs[:-1] < xs[1:])
        if not ok.any():
            continue
        cand = np.where(ok, score, -np.inf)
        i = int(np.argmax(cand))
        if cand[i] > best[0]:
            thr = 0.5 * (xs[i] + xs[i + 1])
            if thr >= xs[i + 1]:  # adjacent floats: midpoint rounds up
                thr = xs[i]
            best = (cand[i], f, thr)
    if best[1] < 0:
        return -1, 0.0, 0.0
    total = 0.0
    for v in y:
        total += v
    return int(best[1]), float(best[2]), float(best[0] - total * total / n)
