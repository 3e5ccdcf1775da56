"""Empirical Poincare constants and the macroscopic Poincare ratio.

Both ratios are evaluated on balls whose radii are actual breakpoints, so
every average is exact.  Maxima over sampled balls are lower estimates of the
true constants; nothing here asserts that an inequality holds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .fields import make_field
from .oscillation import DEFAULT_WINDOW, as_field, ball_averages, lip_hat, profiles
from .space import Space

__all__ = [
    "PoincareReport",
    "MacroReport",
    "resolve_family",
    "poincare_sweep",
    "macro_poincare",
    "macro_sweep",
    "DEFAULT_RATIOS",
]

DEFAULT_RATIOS = (2, 4, 8, 16, 32)


@dataclass
class PoincareReport:
    """Per-ball ratios ``m_f(z, r) / (r (avg_{B(z, lam r)} lip^p)^{1/p})``.

    ``ratios[name]`` is aligned with ``centers`` and ``radii``.  Balls with a
    vanishing right-hand side and a positive left-hand side are stored as
    ``inf`` and counted in ``infinite``; they never enter ``c_hat``.
    """

    p: float
    lam: float
    window: int
    centers: np.ndarray
    radii: np.ndarray
    ratios: dict
    c_hat: float
    infinite: int
    family: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"p": self.p, "lambda": self.lam, "window": self.window,
                "cHat": self.c_hat, "infinite": self.infinite, "family": self.family,
                "balls": int(self.centers.shape[0])}


def resolve_family(space: Space, names: Sequence[str], seed: int = 0) -> dict:
    """Resolve family names to fields.

    ``coords`` gives one linear field per coordinate axis, ``distance`` the
    distance to three random points, ``noise`` a mollified noise field.
    """
    out = {}
    for name in names:
        if name in ("coords", "coordinates"):
            if space.coords is None:
                raise ValueError("coordinate test functions need a space with coordinates")
            for k in range(space.coords.shape[1]):
                out[f"coord{k}"] = make_field(space, "linear", axis=k)
        elif name in ("distance", "distance-to-random-points"):
            out["distance"] = make_field(space, "distance-to-random-points", seed=seed)
        elif name in ("noise", "mollified-noise"):
            out["noise"] = make_field(space, "mollified-noise", seed=seed)
        else:
            raise ValueError(f"unknown test family {name!r}")
    return out


def _sample_centers(space: Space, samples: Optional[int], seed: int) -> np.ndarray:
    if samples is None or samples >= space.n:
        return np.arange(space.n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(space.n, samples, replace=False))


def poincare_sweep(space: Space, p: float = 2.0, lam: float = 1.0, family=("coords",),
                   samples: Optional[int] = 200, seed: int = 0,
                   window: int = DEFAULT_WINDOW) -> PoincareReport:
    """Largest observed (1, p)-Poincare ratio with ``lip`` replaced by
    :func:`~mmspace.oscillation.lip_hat`.

    ``family`` is a sequence of family names (see :func:`resolve_family`) or a
    mapping from names to field arrays.  Every positive breakpoint of every
    sampled centre is used as a radius.
    """
    if not lam >= 1.0:
        raise ValueError("dilation lambda must be >= 1")
    if not p >= 1.0:
        raise ValueError("p must be >= 1")
    if isinstance(family, Mapping):
        funcs = {k: as_field(space, v) for k, v in family.items()}
    else:
        funcs = resolve_family(space, list(family), seed)
    if not funcs:
        raise ValueError("empty test family")

    idx = space.index
    zs = _sample_centers(space, samples, seed)
    lo, hi = idx.offsets[zs], idx.offsets[zs + 1]
    slot = np.concatenate([np.arange(a + 1, b) for a, b in zip(lo, hi)])
    owner = np.repeat(zs, hi - lo - 1)
    r = idx.radii[slot]
    big = np.array([np.searchsorted(idx.sdist[z], lam * rr, side="right")
                    for z, rr in zip(owner, r)]) - 1
    mass = idx.cummass[owner, big]

    ratios = {}
    c_hat, n_inf = 0.0, 0
    for name, f in funcs.items():
        m = profiles(space, f).m[slot]
        g = lip_hat(space, f, window=window) ** p
        csum = np.cumsum((space.weight * g)[idx.order[zs]], axis=1)
        row = np.searchsorted(zs, owner)
        rhs = r * (csum[row, big] / mass) ** (1.0 / p)
        q = np.zeros_like(m)
        pos = rhs > 0
        q[pos] = m[pos] / rhs[pos]
        inf = (~pos) & (m > 0)
        q[inf] = np.inf
        ratios[name] = q
        n_inf += int(inf.sum())
        fin = q[np.isfinite(q)]
        if fin.size:
            c_hat = max(c_hat, float(fin.max()))
    return PoincareReport(float(p), float(lam), int(window), owner, r, ratios, c_hat,
                          n_inf, list(funcs))


def macro_poincare(space: Space, f, z: int, s: float, r: float, lam_tilde: float = 2.0,
                   p: float = 2.0) -> float:
    """``m_f(z, s) / ((s/r) (avg_{B(z, lam_tilde s)} m_f(., r)^p)^{1/p})``.

    Returns ``inf`` when the right-hand side vanishes and the left does not,
    and 0 when both vanish.
    """
    if not 0 < r < s:
        raise ValueError("need 0 < r < s")
    if not lam_tilde >= 2.0:
        raise ValueError("lam_tilde must be >= 2")
    prof = profiles(space, f)
    lhs = float(prof.m[space.index.slot(z, s)])
    avg = float(ball_averages(space, prof.at(r) ** p, lam_tilde * s, [z])[0])
    rhs = (s / r) * avg ** (1.0 / p)
    if rhs == 0.0:
        return np.inf if lhs > 0 else 0.0
    return lhs / rhs


@dataclass
class MacroReport:
    """Macroscopic Poincare ratios over a grid of ``(s, r)`` pairs.

    ``by_ratio[q]`` is the largest finite ratio over all pairs with
    ``s / r = q``; pairs with ``r`` below the smallest distance (where every
    oscillation at scale ``r`` vanishes) are skipped and counted.
    """

    p: float
    lam_tilde: float
    scales: np.ndarray
    by_ratio: dict
    max_ratio: float
    flags: int
    skipped: int
    pairs: int
    rows: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"p": self.p, "lambdaTilde": self.lam_tilde, "maxRatio": self.max_ratio,
                "byRatio": {str(k): v for k, v in self.by_ratio.items()},
                "flags": self.flags, "skipped": self.skipped, "pairs": self.pairs}


def macro_sweep(space: Space, f, ratios=DEFAULT_RATIOS, scales=None, samples=None,
                seed: int = 0, lam_tilde: float = 2.0, p: float = 2.0) -> MacroReport:
    """Evaluate :func:`macro_poincare` for every sampled centre and every
    ``(s, s/q)`` with ``s`` in ``scales`` (default ``diam * 2^-j``,
    ``j = 1..6``) and ``q`` in ``ratios``."""
    f = as_field(space, f)
    if not lam_tilde >= 2.0:
        raise ValueError("lam_tilde must be >= 2")
    if scales is None:
        scales = space.diameter * 2.0 ** -np.arange(1, 7)
    scales = np.asarray(scales, dtype=float)
    zs = _sample_centers(space, samples, seed)
    prof = profiles(space, f)
    by_ratio = {}
    rows = []
    flags = skipped = pairs = 0
    for q in ratios:
        best = None
        for s in scales:
            r = s / q
            if r < space.min_distance:
                skipped += 1
                continue
            lhs = prof.at(s)[zs]
            avg = ball_averages(space, prof.at(r) ** p, lam_tilde * s, zs)
            rhs = (s / r) * avg ** (1.0 / p)
            pos = rhs > 0
            flags += int(((~pos) & (lhs > 0)).sum())
            vals = np.zeros_like(lhs)
            vals[pos] = lhs[pos] / rhs[pos]
            pairs += 1
            top = float(vals.max(initial=0.0))
            rows.append((float(q), float(s), float(r), top))
            best = top if best is None else max(best, top)
        if best is not None:
            by_ratio[q] = best
    return MacroReport(float(p), float(lam_tilde), scales, by_ratio,
                       max(by_ratio.values(), default=0.0), flags, skipped, pairs, rows)
