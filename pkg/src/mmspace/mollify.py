"""t-nets, Lipschitz partitions of unity and the ball-average mollifier.

``Phi_t f(x) = sum_i phi_i(x) <f>_{B(x_i, t)}`` where ``{x_i}`` is a maximal
``t``-separated set and ``phi_i`` are normalised piecewise-linear bumps equal
to one on ``B(x_i, t)`` and vanishing outside ``B(x_i, (1 + gamma) t)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .norms import weak_norm
from .oscillation import as_field, ball_averages, profiles
from .space import Space

__all__ = [
    "Partition",
    "MollifierReport",
    "t_net",
    "partition",
    "mollify",
    "verify_mollifier_bounds",
    "DEFAULT_GAMMA",
    "CLOSE_PAIR_FACTOR",
]

DEFAULT_GAMMA = 1.0
CLOSE_PAIR_FACTOR = 2.0


def t_net(space: Space, t: float, seed: Optional[int] = None) -> np.ndarray:
    """Greedy maximal ``t``-separated set.

    Points are scanned in index order (or a seeded random order) and accepted
    when at distance ``>= t`` from every accepted point.  Returns the accepted
    indices sorted.
    """
    if not t > 0:
        raise ValueError("net scale t must be positive")
    n = space.n
    scan = np.arange(n) if seed is None else np.random.default_rng(seed).permutation(n)
    covered = np.zeros(n, dtype=bool)
    centers = []
    for x in scan:
        if covered[x]:
            continue
        centers.append(x)
        covered |= space.dist[x] < t
    return np.sort(np.array(centers, dtype=np.int64))


@dataclass
class Partition:
    """Partition of unity at scale ``t``; ``phi[i, x] = phi_i(x)``."""

    t: float
    gamma: float
    centers: np.ndarray
    phi: sp.csr_matrix
    space: Space = field(repr=False)

    @cached_property
    def lipschitz_constant(self) -> float:
        """Measured ``C`` with ``|phi_i(x) - phi_i(y)| <= (C / t) dist(x, y)``."""
        dist = self.space.dist
        worst = 0.0
        for i in range(self.phi.shape[0]):
            row = self.phi.getrow(i)
            supp = row.indices
            vals = row.toarray().ravel()
            diff = np.abs(vals[supp][:, None] - vals[None, :])
            d = dist[supp]
            ok = d > 0
            if ok.any():
                worst = max(worst, float((diff[ok] / d[ok]).max()))
        return worst * self.t

    def sums(self) -> np.ndarray:
        return np.asarray(self.phi.sum(axis=0)).ravel()


def partition(space: Space, t: float, gamma: float = DEFAULT_GAMMA,
              seed: Optional[int] = None) -> Partition:
    """Normalised clamp bumps ``clip((1 + gamma - dist/t) / gamma, 0, 1)``
    around a greedy ``t``-net."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    centers = t_net(space, t, seed)
    bump = np.clip((1.0 + gamma - space.dist[centers] / t) / gamma, 0.0, 1.0)
    total = bump.sum(axis=0)
    # every point lies within t of a centre, where the bump equals one
    assert np.all(total >= 1.0), "t-net is not maximal"
    phi = sp.csr_matrix(bump / total)
    return Partition(float(t), float(gamma), centers, phi, space)


def mollify(space: Space, f, t: float, gamma: float = DEFAULT_GAMMA,
            part: Optional[Partition] = None) -> np.ndarray:
    """``Phi_t f``: partition-weighted ball averages at scale ``t``."""
    f = as_field(space, f)
    if part is None:
        part = partition(space, t, gamma)
    avgs = ball_averages(space, f, part.t, part.centers)
    return np.asarray(part.phi.T @ avgs).ravel()


@dataclass
class MollifierReport:
    """Largest observed ratios of the mollifier estimates.

    ``ratio_a``: ``|Phi f(x) - Phi f(y)| t / (dist m_f(x, b t))`` over
    ``dist(x, y) <= a t``.
    ``ratio_b``: ``m_{Phi f}(z, r) t / (min(r, t) m_f(z, c max(r, t)))``.
    ``ratio_c``: ``m_{Phi f}(z, r)`` against the ``L^p`` average of
    ``m_f(., r)`` over ``B(z, c lam max(r, t))``.
    ``ratio_d``: weak norm of ``m_{Phi f}`` over that of ``m_f``.
    ``0/0`` terms are skipped; ``x/0`` terms are counted in ``infinite``.
    """

    t: float
    gamma: float
    p: float
    a: float
    b: float
    c: float
    lam: float
    ratio_a: float
    ratio_b: float
    ratio_c: float
    ratio_d: float
    infinite: dict
    partition_constant: float
    n_centers: int

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            head, *rest = k.split("_")
            out[head + "".join(w.capitalize() for w in rest)] = (
                dict(v) if isinstance(v, dict) else v)
        return out


def _max_ratio(num: np.ndarray, den: np.ndarray):
    """Max of ``num / den`` skipping 0/0; returns (max, count of x/0)."""
    zero = den <= 0
    bad = zero & (num > 0)
    ok = ~zero
    best = float((num[ok] / den[ok]).max()) if ok.any() else 0.0
    return best, int(bad.sum())


def verify_mollifier_bounds(space: Space, f, t: float, gamma: float = DEFAULT_GAMMA,
                            r_grid=None, p: float = 2.0, lam: float = 1.0,
                            a: float = CLOSE_PAIR_FACTOR) -> MollifierReport:
    """Measure the constants in the mollifier estimates for one field.

    Uses ``b = 1 + gamma + 2a`` and ``c = max(1 + b, 3 + 2 gamma)``.  The
    default ``r_grid`` is ``t * 2^j`` for ``j = -2..2``.
    """
    f = as_field(space, f)
    if not t > 0:
        raise ValueError("t must be positive")
    b = 1.0 + gamma + 2.0 * a
    c = max(1.0 + b, 3.0 + 2.0 * gamma)
    lam_t = max(2.0, lam)
    r_grid = t * 2.0 ** np.arange(-2, 3) if r_grid is None else np.asarray(r_grid, float)

    part = partition(space, t, gamma)
    g = mollify(space, f, t, gamma, part)
    pf = profiles(space, f)
    pg = profiles(space, g)
    infinite = {}

    # (a) close pairs
    dist = space.dist
    close = (dist <= a * t) & (dist > 0)
    rows, cols = np.nonzero(close)
    mfb = pf.at(b * t)
    num = np.abs(g[rows] - g[cols]) * t
    den = dist[rows, cols] * mfb[rows]
    ratio_a, infinite["a"] = _max_ratio(num, den)

    # (b) and (c) over every centre and scale
    rb, rc, inf_b, inf_c = 0.0, 0.0, 0, 0
    for r in r_grid:
        mg = pg.at(r)
        lo, hi = min(r, t), max(r, t)
        q, k = _max_ratio(mg * t, lo * pf.at(c * hi))
        rb, inf_b = max(rb, q), inf_b + k
        avg = ball_averages(space, pf.at(r) ** p, c * lam_t * hi) ** (1.0 / p)
        q, k = _max_ratio(mg, avg)
        rc, inf_c = max(rc, q), inf_c + k
    infinite["b"], infinite["c"] = inf_b, inf_c

    # (d) weak norms
    wf, _ = weak_norm(space, f, p)
    wg, _ = weak_norm(space, g, p)
    ratio_d, infinite["d"] = _max_ratio(np.array([wg]), np.array([wf]))

    return MollifierReport(float(t), float(gamma), float(p), float(a), b, c, lam_t,
                           ratio_a, rb, rc, ratio_d, infinite,
                           part.lipschitz_constant, int(part.centers.shape[0]))
