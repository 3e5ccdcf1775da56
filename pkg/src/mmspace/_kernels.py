"""Compiled inner loops shared by the ball-index based modules.

All kernels take the per-row distance order of a space (``order[x]`` lists the
points by increasing distance from ``x``) together with a boolean mask marking
the last position of each tie group, i.e. the positions at which a closed ball
is complete.
"""
import numba
import numpy as np
from numba import njit, prange

# the TBB layer is probed first by default and warns on old TBB installs
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True)
def _fenwick_add(tree, i, v):
    n = tree.shape[0]
    i += 1
    while i <= n:
        tree[i - 1] += v
        i += i & (-i)


@njit(cache=True)
def _fenwick_sum(tree, i):
    # sum of entries [0, i)
    s = 0.0
    while i > 0:
        s += tree[i - 1]
        i -= i & (-i)
    return s


@njit(cache=True)
def oscillation_profiles(order, is_end, offsets, f, w):
    """Mean oscillation of ``f`` on every closed ball of every point.

    Returns ``(m, maxdev)`` aligned with the flat breakpoint layout described
    by ``offsets``: ``m`` is the mean oscillation of the ball, ``maxdev`` is
    ``max |f(y) - f(x)|`` over the ball.
    """
    n = order.shape[0]
    total = offsets[n]
    m_out = np.zeros(total)
    dev_out = np.zeros(total)

    rank_order = np.argsort(f, kind="mergesort")
    fs = f[rank_order]
    rank = np.empty(n, dtype=np.int64)
    for r in range(n):
        rank[rank_order[r]] = r

    tw = np.zeros(n)
    tg = np.zeros(n)
    for x in range(n):
        tw[:] = 0.0
        tg[:] = 0.0
        fx = f[x]
        W = 0.0
        G = 0.0
        fmin = fx
        fmax = fx
        maxdev = 0.0
        k = offsets[x]
        for pos in range(n):
            i = order[x, pos]
            gi = f[i] - fx
            _fenwick_add(tw, rank[i], w[i])
            _fenwick_add(tg, rank[i], w[i] * gi)
            W += w[i]
            G += w[i] * gi
            if f[i] < fmin:
                fmin = f[i]
            if f[i] > fmax:
                fmax = f[i]
            if abs(gi) > maxdev:
                maxdev = abs(gi)
            if is_end[x, pos]:
                if fmax > fmin:
                    a = G / W
                    idx = np.searchsorted(fs, a + fx, side="right")
                    wb = _fenwick_sum(tw, idx)
                    gb = _fenwick_sum(tg, idx)
                    s = a * wb - gb + (G - gb) - a * (W - wb)
                    val = s / W
                    m_out[k] = val if val > 0.0 else 0.0
                dev_out[k] = maxdev
                k += 1
    return m_out, dev_out


@njit(cache=True)
def group_end_cumsum(order, is_end, values):
    """Row-wise prefix sums of ``values`` in distance order, read at the end
    of each tie group, then scattered back to original column order.

    ``out[x, y]`` is the sum of ``values`` over the closed ball centred at
    ``x`` with radius ``dist[x, y]``.
    """
    n = order.shape[0]
    out = np.empty((n, n))
    cum = np.empty(n)
    for x in range(n):
        s = 0.0
        for pos in range(n):
            s += values[order[x, pos]]
            cum[pos] = s
        current = cum[n - 1]
        for pos in range(n - 1, -1, -1):
            if is_end[x, pos]:
                current = cum[pos]
            out[x, order[x, pos]] = current
    return out


@njit(cache=True)
def rowwise_lookup(radii, offsets, r):
    """Flat index of the last breakpoint ``<= r[x]`` for every row ``x``."""
    n = offsets.shape[0] - 1
    out = np.empty(n, dtype=np.int64)
    for x in range(n):
        lo = offsets[x]
        hi = offsets[x + 1]
        j = np.searchsorted(radii[lo:hi], r[x], side="right") - 1
        if j < 0:
            j = 0
        out[x] = lo + j
    return out


@njit(cache=True)
def triangle_violation_exhaustive(dist, a0):
    """Largest ratio ``dist[i,k] / (a0 (dist[i,j] + dist[j,k]))`` over all
    triples with distinct ``i, k``."""
    n = dist.shape[0]
    worst = 0.0
    for j in range(n):
        for i in range(n):
            dij = dist[i, j]
            for k in range(i + 1, n):
                rhs = a0 * (dij + dist[j, k])
                if rhs > 0.0:
                    q = dist[i, k] / rhs
                    if q > worst:
                        worst = q
    return worst


@njit(cache=True, parallel=True)
def pair_violation(f, dist, h):
    """max_{i != j} |f_i - f_j| / (dist_ij (h_i + h_j)) with 0/0 := 0 and
    x/0 := inf."""
    n = f.shape[0]
    row = np.zeros(n)
    for i in prange(n):
        worst = 0.0
        for j in range(n):
            if j == i:
                continue
            num = abs(f[i] - f[j])
            if num == 0.0:
                continue
            den = dist[i, j] * (h[i] + h[j])
            if den <= 0.0:
                worst = np.inf
                break
            q = num / den
            if q > worst:
                worst = q
        row[i] = worst
    return row.max() if n > 0 else 0.0


@njit(cache=True)
def raise_to_feasible(c, h):
    """One Gauss-Seidel pass ``h_i <- max(h_i, max_j c_ij - h_j)``.

    Raising ``h_i`` never breaks a satisfied pair, so after visiting ``i``
    every pair involving ``i`` stays satisfied: one pass gives a feasible
    point.
    """
    n = h.shape[0]
    out = h.copy()
    for i in range(n):
        need = out[i]
        for j in range(n):
            if j != i:
                v = c[i, j] - out[j]
                if v > need:
                    need = v
        out[i] = need
    return out
