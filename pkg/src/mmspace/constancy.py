"""Constancy detection through critical Besov sums under grid refinement.

A nonconstant Lipschitz field has a critical sum that grows without bound as
the grid is refined (the near-diagonal shells contribute about equally per
dyadic scale), while a constant field gives exactly zero at every level.  The
detector fits the growth against the refinement index and reports one of
``constant-compatible``, ``divergent`` or ``inconclusive``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .fields import make_field
from .oscillation import as_field
from .space import Space, generate

__all__ = [
    "KERNELS",
    "RefinementVerdict",
    "DominationReport",
    "critical_besov_local",
    "detect_constant",
    "domination_scan",
]

KERNELS = ("critical-V", "commutator")
ABS_TOL = 1e-12
SLOPE_TOL = 0.1
MIN_R2 = 0.95
_BLOCK = 512


def _region(space: Space, region) -> np.ndarray:
    if region is None:
        return np.arange(space.n)
    region = np.asarray(region)
    if region.dtype == bool:
        return np.flatnonzero(region)
    return np.unique(region.astype(np.int64))


def critical_besov_local(space: Space, f, p: float, region=None,
                         kernel: str = "critical-V") -> float:
    """Restricted double sum of a critical Besov integrand.

    ``critical-V``: ``|f_i - f_j|^p / (dist_ij^p V_ij)``; ``commutator``:
    ``|f_i - f_j|^p / V_ij^2``; summed with weights ``w_i w_j`` over ordered
    pairs of distinct points in ``region``.  No ``1/p`` root is taken.
    """
    f = as_field(space, f)
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    if not p >= 1.0:
        raise ValueError("p must be >= 1")
    idx = _region(space, region)
    vol = space.volume_matrix
    w = space.weight[idx]
    fr = f[idx]
    total = 0.0
    for lo in range(0, idx.shape[0], _BLOCK):
        hi = min(lo + _BLOCK, idx.shape[0])
        rows = idx[lo:hi]
        num = np.abs(fr[lo:hi, None] - fr[None, :]) ** p
        v = vol[np.ix_(rows, idx)]
        if kernel == "critical-V":
            den = space.dist[np.ix_(rows, idx)] ** p * v
        else:
            den = v * v
        k = np.arange(hi - lo)
        den[k, k + lo] = 1.0
        term = num / den
        term[k, k + lo] = 0.0
        total += float(w[lo:hi] @ term @ w)
    return total


@dataclass
class RefinementVerdict:
    """Critical sums ``values[k]`` at refinement ``levels[k]`` and the fit.

    ``slope``, ``intercept`` and ``r2`` describe the least-squares line of
    ``values / range(f)^p`` against the level; ``range(f)`` is the field's
    spread at the finest level, which makes the verdict invariant under
    ``f -> c f + const``.
    """

    levels: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    r2: float
    verdict: str
    p: float
    kernel: str
    thresholds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"levels": self.levels.tolist(), "values": self.values.tolist(),
                "slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "verdict": self.verdict, "p": self.p, "kernel": self.kernel,
                "thresholds": dict(self.thresholds)}


def _linear_fit(x: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(intercept), r2


FieldRule = Union[str, Callable[[Space], np.ndarray]]


def detect_constant(rule: FieldRule, p: float, kernel: str = "critical-V",
                    levels: Sequence[int] = range(6, 13), family: str = "grid",
                    dim: int = 1, rule_params: Optional[dict] = None,
                    abs_tol: float = ABS_TOL, slope_tol: float = SLOPE_TOL,
                    min_r2: float = MIN_R2, spaces: Optional[dict] = None
                    ) -> RefinementVerdict:
    """Refinement study of the critical sum of a sampled field rule.

    Level ``k`` uses ``family(dim, 2^k)``.  ``rule`` is a field-rule name or
    a callable taking the space.  ``spaces`` may map levels to prebuilt
    spaces to share them between studies.

    The verdict is ``constant-compatible`` when every value is at most
    ``abs_tol * max|f|^p``, ``divergent`` when the normalised values grow by
    more than ``slope_tol`` per level with ``R^2 >= min_r2``, and
    ``inconclusive`` otherwise.
    """
    levels = np.asarray(list(levels), dtype=int)
    if levels.shape[0] < 3:
        raise ValueError("need at least 3 refinement levels to fit a trend")
    params = dict(rule_params or {})
    values, scale, spread = [], 0.0, 0.0
    for k in levels:
        if spaces is not None and int(k) in spaces:
            sp_k = spaces[int(k)]
        else:
            sp_k = generate(family, {"dim": dim, "side": 2 ** int(k)})
        f = rule(sp_k) if callable(rule) else make_field(sp_k, rule, **params)
        f = as_field(sp_k, f)
        values.append(critical_besov_local(sp_k, f, p, kernel=kernel))
        scale = max(scale, float(np.abs(f).max()))
        spread = float(f.max() - f.min())
    values = np.asarray(values)
    thresholds = {"absTol": abs_tol * scale ** p, "slopeTol": slope_tol, "minR2": min_r2}
    if np.all(values <= thresholds["absTol"]):
        return RefinementVerdict(levels, values, 0.0, 0.0, 1.0, "constant-compatible",
                                 float(p), kernel, thresholds)
    norm = values / spread ** p if spread > 0 else values
    slope, intercept, r2 = _linear_fit(levels.astype(float), norm)
    verdict = "divergent" if slope > slope_tol and r2 >= min_r2 else "inconclusive"
    return RefinementVerdict(levels, values, slope, intercept, r2, verdict, float(p),
                             kernel, thresholds)


@dataclass
class DominationReport:
    """Measured constant ``C`` in ``V_ij / dist_ij^p <= C mu(X) / R^p``.

    With that constant the critical-V integrand is at most
    ``C mu(X) / R^p`` times the commutator integrand on every pair, so a
    finite commutator sum bounds the critical-V sum.  ``R`` is half the
    diameter of the region.
    """

    p: float
    constant: float
    radius: float
    mass: float
    worst_pair: tuple

    def to_dict(self) -> dict:
        return {"p": self.p, "constant": self.constant, "radius": self.radius,
                "mass": self.mass, "worstPair": list(self.worst_pair)}


def domination_scan(space: Space, p: float, region=None) -> DominationReport:
    """Pairwise scan of the integrand domination between the two kernels."""
    idx = _region(space, region)
    d = space.dist[np.ix_(idx, idx)]
    v = space.volume_matrix[np.ix_(idx, idx)]
    radius = 0.5 * float(d.max())
    mass = float(space.weight[idx].sum())
    off = d > 0
    ratio = np.zeros_like(d)
    ratio[off] = v[off] / d[off] ** p * radius ** p / mass
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return DominationReport(float(p), float(ratio[i, j]), radius, mass,
                            (int(idx[i]), int(idx[j])))
