"""Ball averages, mean oscillations, discrete pointwise Lipschitz constants
and centred maximal functions.

All quantities use closed balls and are evaluated exactly from the ball index:
on a finite space ``t -> m_f(x, t)`` is constant on every interval between
consecutive distances from ``x``.
"""
from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .space import Space

__all__ = [
    "DEFAULT_WINDOW",
    "as_field",
    "Profiles",
    "OscillationProfile",
    "profiles",
    "profile",
    "ball_average",
    "ball_averages",
    "mean_oscillation",
    "lip_hat",
    "g_hat",
    "maximal",
]

DEFAULT_WINDOW = 3
_CACHE_SIZE = 16


def as_field(space: Space, f) -> np.ndarray:
    f = np.ascontiguousarray(f, dtype=float).reshape(-1)
    if f.shape[0] != space.n:
        raise ValueError(f"field has {f.shape[0]} values for a space of {space.n} points")
    if not np.all(np.isfinite(f)):
        raise ValueError("field values must be finite")
    return f


@dataclass(frozen=True)
class OscillationProfile:
    """``values[k] = m_f(x, t)`` for ``t`` in ``[breakpoints[k], breakpoints[k+1])``."""

    point: int
    breakpoints: np.ndarray
    values: np.ndarray

    def __call__(self, t: float) -> float:
        k = np.searchsorted(self.breakpoints, t, side="right") - 1
        return float(self.values[max(k, 0)])


class Profiles:
    """Mean-oscillation profiles of one field at every point of a space.

    ``m`` and ``maxdev`` follow the flat breakpoint layout of
    :class:`~mmspace.space.BallIndex`.
    """

    def __init__(self, space: Space, f: np.ndarray):
        self.space = space
        self.f = f
        idx = space.index
        self.m, self.maxdev = _kernels.oscillation_profiles(
            idx.order, idx.is_end, idx.offsets, f, space.weight)

    @property
    def radii(self) -> np.ndarray:
        return self.space.index.radii

    @property
    def offsets(self) -> np.ndarray:
        return self.space.index.offsets

    def of(self, x: int) -> OscillationProfile:
        lo, hi = self.offsets[x], self.offsets[x + 1]
        return OscillationProfile(int(x), self.radii[lo:hi].copy(), self.m[lo:hi].copy())

    def at(self, r) -> np.ndarray:
        """``m_f(x, r)`` for every point ``x`` (``r`` scalar or per point)."""
        return self.m[self.space.index.slots(r)]

    def point_ids(self) -> np.ndarray:
        """Point id of every flat slot."""
        return np.repeat(np.arange(self.space.n), np.diff(self.offsets))


def _cache(space: Space) -> OrderedDict:
    return space.__dict__.setdefault("_profile_cache", OrderedDict())


def profiles(space: Space, f) -> Profiles:
    """Profiles of ``f`` at all points, memoised per space."""
    f = as_field(space, f)
    key = hashlib.sha1(f.tobytes()).hexdigest()
    cache = _cache(space)
    if key in cache:
        cache.move_to_end(key)
        return cache[key]
    prof = Profiles(space, f)
    cache[key] = prof
    while len(cache) > _CACHE_SIZE:
        cache.popitem(last=False)
    return prof


def profile(space: Space, f, x: int) -> OscillationProfile:
    return profiles(space, f).of(x)


def mean_oscillation(space: Space, f, x: int, t: float) -> float:
    """``m_f(x, t)``, the mean absolute deviation of ``f`` on ``B(x, t)``."""
    if t < 0:
        raise ValueError("radius must be nonnegative")
    prof = profiles(space, f)
    return float(prof.m[space.index.slot(x, t)])


def ball_average(space: Space, f, x: int, t: float) -> float:
    if t < 0:
        raise ValueError("radius must be nonnegative")
    f = as_field(space, f)
    idx = space.index
    k = idx.slot(x, t)
    members = idx.order[x, :idx.ends[k]]
    return float(np.dot(space.weight[members], f[members]) / idx.mass[k])


def ball_averages(space: Space, f, t, centers=None) -> np.ndarray:
    """Averages of ``f`` over ``B(c, t)`` for each centre ``c``."""
    f = as_field(space, f)
    idx = space.index
    centers = np.arange(space.n) if centers is None else np.asarray(centers, dtype=int)
    t = np.broadcast_to(np.asarray(t, dtype=float), centers.shape)
    cnt = np.array([np.searchsorted(idx.sdist[c], tc, side="right")
                    for c, tc in zip(centers, t)], dtype=int)
    wf = (space.weight * f)[idx.order[centers]]
    sums = np.cumsum(wf, axis=1)[np.arange(len(centers)), cnt - 1]
    return sums / idx.cummass[centers, cnt - 1]


def _window_slots(space: Space, window: int):
    if window < 1:
        raise ValueError("window must be >= 1")
    off = space.index.offsets
    lo, hi = off[:-1], off[1:]
    cols = lo[:, None] + np.arange(1, window + 1)[None, :]
    valid = cols < hi[:, None]
    return np.where(valid, cols, 0), valid


def _reduce_window(ratios, valid, variant):
    if variant == "liminf":
        out = np.where(valid, ratios, np.inf).min(axis=1)
    elif variant == "limsup":
        out = np.where(valid, ratios, -np.inf).max(axis=1)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    out[~valid.any(axis=1)] = 0.0
    return out


def lip_hat(space: Space, f, x=None, window: int = DEFAULT_WINDOW,
            variant: str = "liminf"):
    """Discrete pointwise Lipschitz constant.

    Minimum over the first ``window`` nonzero breakpoints ``d_k`` of
    ``max_{dist(x,y) <= d_k} |f(x) - f(y)| / d_k``.  ``variant="limsup"``
    takes the maximum instead.  Returns an array over all points when ``x``
    is None.
    """
    prof = profiles(space, f)
    cols, valid = _window_slots(space, window)
    ratios = prof.maxdev[cols] / np.where(valid, prof.radii[cols], 1.0)
    out = _reduce_window(ratios, valid, variant)
    return out if x is None else float(out[x])


def g_hat(space: Space, f, x=None, window: int = DEFAULT_WINDOW,
          variant: str = "liminf"):
    """Discrete counterpart of ``liminf_{t->0} m_f(x, t) / t`` over the same
    window as :func:`lip_hat`, which makes ``g_hat <= 2 lip_hat`` exact."""
    prof = profiles(space, f)
    cols, valid = _window_slots(space, window)
    ratios = prof.m[cols] / np.where(valid, prof.radii[cols], 1.0)
    out = _reduce_window(ratios, valid, variant)
    return out if x is None else float(out[x])


def maximal(space: Space, h, q: float = 1.0) -> np.ndarray:
    """Centred maximal function ``M_q h = sup_B (avg_B h^q)^{1/q}`` over all
    closed balls centred at each point."""
    h = as_field(space, h)
    if np.any(h < 0):
        raise ValueError("maximal function needs a nonnegative field")
    if not q > 0:
        raise ValueError("exponent q must be positive")
    idx = space.index
    hq = h ** q
    csum = np.cumsum((space.weight * hq)[idx.order], axis=1)
    rows, cols = np.nonzero(idx.is_end)
    avg = csum[rows, cols] / idx.cummass[rows, cols]
    best = np.maximum.reduceat(avg, idx.offsets[:-1])
    # singleton ball is always a candidate; guards rounding in the averages
    best = np.maximum(best, hq)
    return best ** (1.0 / q)
