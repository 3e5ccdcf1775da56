"""Besov-type double sums and the weak-type norm of mean oscillations.

``nu_p`` is the measure ``dmu(x) dt / t^(p+1)`` on ``X x (0, inf)``.  Because
``t -> m_f(x, t)`` is a step function, the ``nu_p`` measure of any super-level
set is a finite sum of closed-form interval integrals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oscillation import as_field, profiles
from .space import Space

__all__ = [
    "KappaCurve",
    "besov_seminorm",
    "commutator_besov",
    "interval_weights",
    "level_measure",
    "weak_norm",
    "kappa_curve_tail",
    "DEFAULT_TAIL_WINDOW",
]

DEFAULT_TAIL_WINDOW = 0.05
_BLOCK = 512


def _pair_sum(space: Space, f: np.ndarray, kernel) -> float:
    """``sum_{i != j} w_i w_j |f_i - f_j|^p / kernel(i, j)`` in row blocks."""
    n = space.n
    w = space.weight
    total = 0.0
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        num, den = kernel(lo, hi)
        rows = np.arange(lo, hi)
        den[rows - lo, rows] = 1.0
        term = num / den
        term[rows - lo, rows] = 0.0
        total += float(w[lo:hi] @ term @ w)
    return total


def besov_seminorm(space: Space, f, s: float, p: float, kernel: str = "V",
                   d: float | None = None) -> float:
    """Double-sum Besov seminorm with weight ``V(x, y)`` or ``dist^d``.

    ``[sum_{i != j} w_i w_j |f_i - f_j|^p / (dist_ij^(s p) lambda_ij)]^(1/p)``
    over ordered pairs, where ``lambda_ij = mu(B(x_i, dist_ij))`` for
    ``kernel="V"`` and ``dist_ij^d`` for ``kernel="power"``.
    """
    f = as_field(space, f)
    if not 0.0 < s <= 1.0:
        raise ValueError("smoothness s must lie in (0, 1]")
    if not p >= 1.0:
        raise ValueError("p must be >= 1")
    dist = space.dist
    if kernel == "V":
        vol = space.volume_matrix

        def lam(lo, hi):
            return vol[lo:hi]
    elif kernel == "power":
        if d is None or not d > 0:
            raise ValueError("power kernel needs a positive exponent d")

        def lam(lo, hi):
            return dist[lo:hi] ** d
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    def k(lo, hi):
        num = np.abs(f[lo:hi, None] - f[None, :]) ** p
        return num, dist[lo:hi] ** (s * p) * lam(lo, hi)

    return _pair_sum(space, f, k) ** (1.0 / p)


def commutator_besov(space: Space, f, p: float) -> float:
    """``[sum_{i != j} w_i w_j |f_i - f_j|^p / V(x_i, x_j)^2]^(1/p)``."""
    f = as_field(space, f)
    if not p >= 1.0:
        raise ValueError("p must be >= 1")
    vol = space.volume_matrix

    def k(lo, hi):
        return np.abs(f[lo:hi, None] - f[None, :]) ** p, vol[lo:hi] ** 2

    return _pair_sum(space, f, k) ** (1.0 / p)


def interval_weights(space: Space, p: float) -> np.ndarray:
    """``nu_p`` mass of ``{x} x [d_k, d_{k+1})`` for every flat slot.

    Equals ``w_x (d_k^-p - d_{k+1}^-p) / p`` and ``w_x d_m^-p / p`` on the
    last, unbounded interval.  The slot at ``t = 0`` gets weight 0: the
    singleton ball has zero oscillation, so it never meets a level set.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    cache = space.__dict__.setdefault("_interval_weight_cache", {})
    if p in cache:
        return cache[p]
    idx = space.index
    radii = idx.radii
    nxt = np.empty_like(radii)
    nxt[:-1] = radii[1:]
    last = idx.offsets[1:] - 1
    nxt[last] = np.inf
    with np.errstate(divide="ignore"):
        lo_term = np.where(radii > 0, radii ** -p, 0.0)
        hi_term = np.where(np.isfinite(nxt), nxt ** -p, 0.0)
    owner = np.repeat(np.arange(space.n), np.diff(idx.offsets))
    wts = space.weight[owner] * (lo_term - hi_term) / p
    wts[radii == 0] = 0.0
    cache[p] = wts
    return wts


def level_measure(space: Space, f, p: float, kappa: float, strict: bool = True) -> float:
    """``nu_p({m_f > kappa})``, or ``{m_f >= kappa}`` when ``strict`` is False."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    m = profiles(space, f).m
    wts = interval_weights(space, p)
    hit = m > kappa if strict else m >= kappa
    return float(wts[hit].sum())


@dataclass
class KappaCurve:
    """Distinct positive oscillation values with their level measures
    ``nu_p({m_f >= v})`` and scores ``v * nu^(1/p)``."""

    p: float
    values: np.ndarray
    level_measure: np.ndarray
    score: np.ndarray

    @property
    def weak_norm(self) -> float:
        return float(self.score.max()) if self.score.size else 0.0

    def __len__(self):
        return self.values.shape[0]


def weak_norm(space: Space, f, p: float):
    """``sup_{kappa > 0} kappa * nu_p({m_f > kappa})^(1/p)`` and its curve.

    ``kappa -> nu_p({m_f > kappa})`` is a right-continuous step function that
    only jumps at values taken by ``m_f``, so the supremum is the left limit
    at one of those values, i.e. ``v * nu_p({m_f >= v})^(1/p)``.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    m = profiles(space, f).m
    wts = interval_weights(space, p)
    pos = m > 0
    ms, ws = m[pos], wts[pos]
    if ms.size == 0:
        empty = np.zeros(0)
        return 0.0, KappaCurve(p, empty, empty, empty)
    order = np.argsort(ms, kind="stable")
    ms, ws = ms[order], ws[order]
    tail = np.cumsum(ws[::-1])[::-1]
    values, first = np.unique(ms, return_index=True)
    nu = tail[first]
    score = values * nu ** (1.0 / p)
    curve = KappaCurve(p, values, nu, score)
    return curve.weak_norm, curve


def kappa_curve_tail(curve: KappaCurve, h: float = DEFAULT_TAIL_WINDOW) -> float:
    """Score at the smallest curve value ``>= h * max value``.

    A resolution-tied stand-in for ``liminf_{kappa -> 0}``: on a finite space
    the literal limit degenerates, so the window excludes oscillation values
    below what the discretisation can resolve.
    """
    if len(curve) == 0:
        return 0.0
    j = np.searchsorted(curve.values, h * curve.values[-1], side="left")
    return float(curve.score[min(j, len(curve) - 1)])
