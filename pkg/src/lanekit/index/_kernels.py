"""Hot loops for the index layer.

Every ranking key is computed the same way: float32 components widened to
float64 and accumulated in dimension order. L2 keys are squared distances;
inner-product keys are negated similarities so "smaller is better" holds for
both. Ties always break on the smaller id. The numpy twins below repeat the
exact same operation order, which keeps both paths bit-identical.
"""

from __future__ import annotations

import numpy as np

from lanekit._jit import njit, pick

METRIC_L2 = 0
METRIC_IP = 1


# -- distance keys -----------------------------------------------------------


@njit
def _key_row(vectors, row, q, metric):
    acc = 0.0
    d = q.shape[0]
    if metric == 0:
        for j in range(d):
            t = np.float64(vectors[row, j]) - q[j]
            acc += t * t
        return acc
    for j in range(d):
        acc += np.float64(vectors[row, j]) * q[j]
    return -acc


@njit
def _key_between(vectors, a, b, metric):
    acc = 0.0
    d = vectors.shape[1]
    if metric == 0:
        for j in range(d):
            t = np.float64(vectors[a, j]) - np.float64(vectors[b, j])
            acc += t * t
        return acc
    for j in range(d):
        acc += np.float64(vectors[a, j]) * np.float64(vectors[b, j])
    return -acc


@njit
def _keys_rows_numba(vectors, rows, q, metric):
    out = np.empty(rows.shape[0], dtype=np.float64)
    for t in range(rows.shape[0]):
        out[t] = _key_row(vectors, rows[t], q, metric)
    return out


def _keys_rows_numpy(vectors, rows, q, metric):
    X = vectors[rows].astype(np.float64)
    acc = np.zeros(X.shape[0], dtype=np.float64)
    if metric == METRIC_L2:
        for j in range(X.shape[1]):
            t = X[:, j] - q[j]
            acc += t * t
        return acc
    for j in range(X.shape[1]):
        acc += X[:, j] * q[j]
    return -acc


@njit
def _keys_all_numba(vectors, q, metric):
    n = vectors.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = _key_row(vectors, i, q, metric)
    return out


def _keys_all_numpy(vectors, q, metric):
    return _keys_rows_numpy(vectors, slice(None), q, metric)


keys_rows = pick(_keys_rows_numba, _keys_rows_numpy)
keys_all = pick(_keys_all_numba, _keys_all_numpy)


def topk_order(keys: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` smallest keys, sorted by ``(key, index)``."""
    n = keys.shape[0]
    k = min(k, n)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k < n:
        kth = np.partition(keys, k - 1)[k - 1]
        cand = np.flatnonzero(keys <= kth)
    else:
        cand = np.arange(n)
    order = cand[np.lexsort((cand, keys[cand]))]
    return order[:k].astype(np.int64)


def topk_ids(ids: np.ndarray, keys: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` of arbitrary ``(id, key)`` pairs by ``(key, id)``."""
    if ids.size == 0 or k <= 0:
        return ids[:0], keys[:0]
    order = np.lexsort((ids, keys))[:k]
    return ids[order], keys[order]


# -- pair heaps ---------------------------------------------------------------
# Min-heap over (key, id). A max-heap is the same structure holding (-key, -id).


@njit
def _less(ka, ia, kb, ib):
    return ka < kb or (ka == kb and ia < ib)


@njit
def _heap_push(hk, hi, n, k, i):
    pos = n
    hk[pos] = k
    hi[pos] = i
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(hk[pos], hi[pos], hk[parent], hi[parent]):
            hk[pos], hk[parent] = hk[parent], hk[pos]
            hi[pos], hi[parent] = hi[parent], hi[pos]
            pos = parent
        else:
            break
    return n + 1


@njit
def _heap_pop(hk, hi, n):
    n -= 1
    hk[0] = hk[n]
    hi[0] = hi[n]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= n:
            break
        c = left
        right = left + 1
        if right < n and _less(hk[right], hi[right], hk[left], hi[left]):
            c = right
        if _less(hk[c], hi[c], hk[pos], hi[pos]):
            hk[pos], hk[c] = hk[c], hk[pos]
            hi[pos], hi[c] = hi[c], hi[pos]
            pos = c
        else:
            break
    return n


# -- HNSW ---------------------------------------------------------------------


@njit
def _greedy(vectors, links, counts, layer, q, metric, cur, curk):
    visits = 0
    changed = True
    while changed:
        changed = False
        for t in range(counts[layer, cur]):
            nb = links[layer, cur, t]
            kk = _key_row(vectors, nb, q, metric)
            visits += 1
            if _less(kk, nb, curk, cur):
                curk = kk
                cur = nb
                changed = True
    return cur, curk, visits


@njit
def _search_layer(
    vectors, links, counts, layer, q, metric, entries, n_entries, ef,
    visited, stamp, cand_k, cand_i, res_k, res_i,
):
    """Beam search on one layer. Leaves the beam in the (negated) result heap."""
    visits = 0
    nc = 0
    nr = 0
    for t in range(n_entries):
        e = entries[t]
        if visited[e] == stamp:
            continue
        visited[e] = stamp
        kk = _key_row(vectors, e, q, metric)
        visits += 1
        nc = _heap_push(cand_k, cand_i, nc, kk, e)
        nr = _heap_push(res_k, res_i, nr, -kk, -e)
        if nr > ef:
            nr = _heap_pop(res_k, res_i, nr)
    while nc > 0:
        ck = cand_k[0]
        ci = cand_i[0]
        if nr >= ef and _less(-res_k[0], -res_i[0], ck, ci):
            break
        nc = _heap_pop(cand_k, cand_i, nc)
        for t in range(counts[layer, ci]):
            nb = links[layer, ci, t]
            if visited[nb] == stamp:
                continue
            visited[nb] = stamp
            kk = _key_row(vectors, nb, q, metric)
            visits += 1
            if nr < ef or _less(kk, nb, -res_k[0], -res_i[0]):
                nc = _heap_push(cand_k, cand_i, nc, kk, nb)
                nr = _heap_push(res_k, res_i, nr, -kk, -nb)
                if nr > ef:
                    nr = _heap_pop(res_k, res_i, nr)
    return nr, visits


@njit
def _drain_sorted(res_k, res_i, nr, out_k, out_i):
    """Empty the result heap into ascending ``(key, id)`` order."""
    n = nr
    for t in range(nr - 1, -1, -1):
        out_k[t] = -res_k[0]
        out_i[t] = -res_i[0]
        n = _heap_pop(res_k, res_i, n)
    return nr


@njit
def _sort_pairs(ks, ids, n):
    # insertion sort; n is at most 2*graph_degree + 1
    for a in range(1, n):
        k = ks[a]
        i = ids[a]
        b = a - 1
        while b >= 0 and _less(k, i, ks[b], ids[b]):
            ks[b + 1] = ks[b]
            ids[b + 1] = ids[b]
            b -= 1
        ks[b + 1] = k
        ids[b + 1] = i


@njit
def _hnsw_build(vectors, levels, metric, degree, ef_construction, links, counts):
    n, d = vectors.shape
    cap0 = links.shape[2]
    visited = np.zeros(n, dtype=np.int32)
    stamp = 0
    cand_k = np.empty(n + 1, dtype=np.float64)
    cand_i = np.empty(n + 1, dtype=np.int64)
    res_k = np.empty(ef_construction + 2, dtype=np.float64)
    res_i = np.empty(ef_construction + 2, dtype=np.int64)
    w_k = np.empty(ef_construction + 2, dtype=np.float64)
    w_i = np.empty(ef_construction + 2, dtype=np.int64)
    entries = np.empty(ef_construction + 2, dtype=np.int64)
    nb_k = np.empty(cap0 + 1, dtype=np.float64)
    nb_i = np.empty(cap0 + 1, dtype=np.int64)
    q = np.empty(d, dtype=np.float64)

    entry = 0
    max_level = levels[0]
    for i in range(1, n):
        for j in range(d):
            q[j] = vectors[i, j]
        li = levels[i]
        cur = entry
        curk = _key_row(vectors, cur, q, metric)
        for layer in range(max_level, li, -1):
            cur, curk, _ = _greedy(vectors, links, counts, layer, q, metric, cur, curk)
        entries[0] = cur
        n_entries = 1
        top = li if li < max_level else max_level
        for layer in range(top, -1, -1):
            stamp += 1
            nr, _ = _search_layer(
                vectors, links, counts, layer, q, metric, entries, n_entries,
                ef_construction, visited, stamp, cand_k, cand_i, res_k, res_i,
            )
            _drain_sorted(res_k, res_i, nr, w_k, w_i)
            mmax = cap0 if layer == 0 else degree
            m = degree if degree < nr else nr
            for t in range(m):
                links[layer, i, t] = w_i[t]
            counts[layer, i] = m
            for t in range(m):
                nb = w_i[t]
                c = counts[layer, nb]
                if c < mmax:
                    links[layer, nb, c] = i
                    counts[layer, nb] = c + 1
                    continue
                # full: keep the mmax closest of (existing links + i)
                for s in range(c):
                    other = links[layer, nb, s]
                    nb_i[s] = other
                    nb_k[s] = _key_between(vectors, nb, other, metric)
                nb_i[c] = i
                nb_k[c] = w_k[t]
                _sort_pairs(nb_k, nb_i, c + 1)
                for s in range(mmax):
                    links[layer, nb, s] = nb_i[s]
                counts[layer, nb] = mmax
            for t in range(nr):
                entries[t] = w_i[t]
            n_entries = nr
        if li > max_level:
            entry = i
            max_level = li
    return entry, max_level


@njit
def _hnsw_search(vectors, links, counts, entry, max_level, metric, q, ef, start_node):
    """Descend greedily, then beam-search layer 0 with width ``ef``.

    ``start_node >= 0`` skips the descent and starts layer 0 there.
    Returns ``(keys, ids, distance_evaluations)``.
    """
    n = vectors.shape[0]
    visits = 0
    if start_node >= 0:
        cur = start_node
    else:
        cur = entry
        curk = _key_row(vectors, cur, q, metric)
        visits += 1
        for layer in range(max_level, 0, -1):
            cur, curk, v = _greedy(vectors, links, counts, layer, q, metric, cur, curk)
            visits += v
    visited = np.zeros(n, dtype=np.int32)
    cand_k = np.empty(n + 1, dtype=np.float64)
    cand_i = np.empty(n + 1, dtype=np.int64)
    res_k = np.empty(ef + 2, dtype=np.float64)
    res_i = np.empty(ef + 2, dtype=np.int64)
    entries = np.empty(1, dtype=np.int64)
    entries[0] = cur
    nr, v = _search_layer(
        vectors, links, counts, 0, q, metric, entries, 1, ef,
        visited, 1, cand_k, cand_i, res_k, res_i,
    )
    visits += v
    out_k = np.empty(nr, dtype=np.float64)
    out_i = np.empty(nr, dtype=np.int64)
    _drain_sorted(res_k, res_i, nr, out_k, out_i)
    return out_k, out_i, visits


# Graph kernels have no vectorized form; with numba disabled the same
# functions simply run as Python.
hnsw_build = _hnsw_build
hnsw_search = _hnsw_search


# -- k-means / IVF ---------------------------------------------------------------


@njit
def _assign_numba(X, C, metric):
    n = X.shape[0]
    nlist, d = C.shape
    labels = np.empty(n, dtype=np.int64)
    q = np.empty(d, dtype=np.float64)
    for i in range(n):
        for j in range(d):
            q[j] = X[i, j]
        best = _key_row(C, 0, q, metric)
        arg = 0
        for c in range(1, nlist):
            kk = _key_row(C, c, q, metric)
            if kk < best:
                best = kk
                arg = c
        labels[i] = arg
    return labels


def _assign_numpy(X, C, metric, block=2048):
    n = X.shape[0]
    C64 = C.astype(np.float64)
    labels = np.empty(n, dtype=np.int64)
    for s in range(0, n, block):
        Xb = X[s : s + block].astype(np.float64)
        acc = np.zeros((Xb.shape[0], C64.shape[0]), dtype=np.float64)
        if metric == METRIC_L2:
            for j in range(C64.shape[1]):
                t = C64[None, :, j] - Xb[:, j, None]
                acc += t * t
        else:
            for j in range(C64.shape[1]):
                acc += C64[None, :, j] * Xb[:, j, None]
            acc = -acc
        labels[s : s + block] = np.argmin(acc, axis=1)
    return labels


@njit
def _centroid_sums_numba(X, labels, nlist):
    d = X.shape[1]
    sums = np.zeros((nlist, d), dtype=np.float64)
    cnt = np.zeros(nlist, dtype=np.int64)
    for i in range(X.shape[0]):
        c = labels[i]
        cnt[c] += 1
        for j in range(d):
            sums[c, j] += np.float64(X[i, j])
    return sums, cnt


def _centroid_sums_numpy(X, labels, nlist):
    sums = np.zeros((nlist, X.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, X.astype(np.float64))
    cnt = np.bincount(labels, minlength=nlist).astype(np.int64)
    return sums, cnt


assign_nearest = pick(_assign_numba, _assign_numpy)
centroid_sums = pick(_centroid_sums_numba, _centroid_sums_numpy)


@njit
def _mark_reachable(links, counts, start, seen):
    """Flood layer 0 from ``start``, marking into ``seen``. Returns nodes newly marked."""
    n = seen.shape[0]
    stack = np.empty(n, dtype=np.int64)
    top = 0
    added = 0
    if seen[start]:
        return 0
    seen[start] = True
    added += 1
    stack[top] = start
    top += 1
    while top > 0:
        top -= 1
        u = stack[top]
        for t in range(counts[0, u]):
            v = links[0, u, t]
            if not seen[v]:
                seen[v] = True
                added += 1
                stack[top] = v
                top += 1
    return added


mark_reachable = _mark_reachable
