"""Brute-force reference computations, independent of the fast paths.

These exist to cross-check the production code on small inputs: none of them
touches the ball index, the profile kernel or the interior-point solver.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .space import Space

__all__ = ["enumeration_oracle", "brute_oscillation", "quadrature_level_measure"]


def _constraints(space: Space, f: np.ndarray):
    n = space.n
    rows, rhs = [], []
    for i, j in combinations(range(n), 2):
        c = abs(f[i] - f[j]) / space.dist[i, j]
        if c > 0:
            a = np.zeros(n)
            a[i] = a[j] = 1.0
            rows.append(a)
            rhs.append(c)
    # h_k >= 0 written as e_k . h >= 0
    for k in range(n):
        a = np.zeros(n)
        a[k] = 1.0
        rows.append(a)
        rhs.append(0.0)
    return np.array(rows), np.array(rhs)


def enumeration_oracle(space: Space, f, p: float) -> float:
    """Hajlasz norm of ``f`` by exhaustive active-set enumeration.

    ``p = 1``: the optimum of the linear program is attained at a vertex, so
    every choice of ``n`` linearly independent active constraints is tried.
    ``p = 2``: for every subset of constraints held with equality, minimise
    ``sum w h^2`` on that affine set through its KKT system; the optimum is
    the least objective among the feasible candidates.  Only for ``n <= 4``.
    """
    f = np.asarray(f, dtype=float)
    n = space.n
    if n > 4:
        raise ValueError("enumeration oracle is limited to n <= 4")
    if p not in (1.0, 2.0):
        raise ValueError("enumeration oracle supports p in {1, 2}")
    A, b = _constraints(space, f)
    w = space.weight
    m = A.shape[0]
    best = np.inf

    def feasible(h):
        return np.all(A @ h >= b - 1e-12 * max(1.0, np.abs(b).max()))

    if p == 1.0:
        for act in combinations(range(m), n):
            As = A[list(act)]
            if abs(np.linalg.det(As)) < 1e-12:
                continue
            h = np.linalg.solve(As, b[list(act)])
            if feasible(h):
                best = min(best, float(w @ h))
        return best

    for size in range(0, m + 1):
        for act in combinations(range(m), size):
            As = A[list(act)]
            if size and np.linalg.matrix_rank(As) < size:
                continue
            # stationarity 2 W h = As^T mu, equality As h = b_S
            K = np.zeros((n + size, n + size))
            K[:n, :n] = 2.0 * np.diag(w)
            K[:n, n:] = -As.T
            K[n:, :n] = As
            rhs = np.concatenate([np.zeros(n), b[list(act)]])
            sol = np.linalg.solve(K, rhs)
            h = sol[:n]
            if feasible(h):
                best = min(best, float(w @ (h * h)))
    return float(np.sqrt(best))


def brute_oscillation(space: Space, f, x: int, t) -> np.ndarray:
    """``m_f(x, t)`` for an array of radii by direct membership tests."""
    f = np.asarray(f, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    member = space.dist[x][None, :] <= t[:, None]
    w = member * space.weight[None, :]
    mass = w.sum(axis=1)
    avg = (w @ f) / mass
    return (w * np.abs(f[None, :] - avg[:, None])).sum(axis=1) / mass


def quadrature_level_measure(space: Space, f, p: float, kappa,
                             points: int = 10_000, strict: bool = True):
    """``nu_p({m_f > kappa})`` by midpoint quadrature on a log-spaced grid.

    The grid spans from half the smallest distance (below which every ball
    is a singleton) to ``10^4`` diameters; the remaining tail is integrated
    in closed form using the full-ball oscillation.  ``kappa`` may be an
    array, in which case an array is returned.
    """
    kap = np.atleast_1d(np.asarray(kappa, dtype=float))
    d = space.dist[space.dist > 0]
    lo, hi = 0.5 * d.min(), 1e4 * d.max()
    edges = np.geomspace(lo, hi, points + 1)
    mid = np.sqrt(edges[:-1] * edges[1:])
    dnu = mid ** (-p - 1.0) * np.diff(edges)
    total = np.zeros_like(kap)
    for x in range(space.n):
        m = brute_oscillation(space, f, x, np.append(mid, hi))
        hit = m[:, None] > kap[None, :] if strict else m[:, None] >= kap[None, :]
        inner = dnu @ hit[:-1]
        tail = np.where(hit[-1], hi ** (-p) / p, 0.0)
        total += space.weight[x] * (inner + tail)
    return total if np.ndim(kappa) else float(total[0])
