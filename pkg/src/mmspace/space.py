"""Finite metric measure spaces, their ball index, and generators.

Balls are closed throughout: ``B(x, t) = {y : dist(x, y) <= t}``.  On a finite
space every scale-dependent quantity is then a right-continuous step function
of ``t`` with jumps at the sorted distances from ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from . import _kernels

__all__ = [
    "Space",
    "BallIndex",
    "DimensionFit",
    "SpaceError",
    "build_space",
    "generate",
    "grid",
    "graph",
    "heisenberg",
    "snowflake",
    "ball",
    "doubling_and_dimension",
]

EXHAUSTIVE_TRIPLE_LIMIT = 256
RANDOM_TRIPLES = 100_000
TRIANGLE_SLACK = 1e-9


class SpaceError(ValueError):
    """Raised when a distance matrix or weight vector is not admissible."""


@dataclass(frozen=True)
class BallIndex:
    """Sorted-distance index of a space.

    ``order[x]`` lists all points by increasing distance from ``x`` (stable
    in index order), ``sdist[x]`` the matching distances.  ``is_end[x, k]``
    marks the last position of a tie group.  Breakpoints of all points are
    stored flat: those of ``x`` live in ``offsets[x]:offsets[x + 1]``.
    """

    order: np.ndarray
    sdist: np.ndarray
    is_end: np.ndarray
    offsets: np.ndarray
    radii: np.ndarray
    ends: np.ndarray
    mass: np.ndarray
    cummass: np.ndarray

    @classmethod
    def from_space(cls, dist: np.ndarray, weight: np.ndarray) -> "BallIndex":
        n = dist.shape[0]
        order = np.argsort(dist, axis=1, kind="stable")
        sdist = np.take_along_axis(dist, order, axis=1)
        is_end = np.ones((n, n), dtype=bool)
        is_end[:, :-1] = sdist[:, :-1] != sdist[:, 1:]
        cummass = np.cumsum(weight[order], axis=1)
        rows, cols = np.nonzero(is_end)
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
        return cls(
            order=order,
            sdist=sdist,
            is_end=is_end,
            offsets=offsets,
            radii=sdist[rows, cols],
            ends=(cols + 1).astype(np.int64),
            mass=cummass[rows, cols],
            cummass=cummass,
        )

    def breakpoints(self, x: int) -> np.ndarray:
        return self.radii[self.offsets[x]:self.offsets[x + 1]]

    def slot(self, x: int, t: float) -> int:
        """Flat index of the breakpoint interval of ``x`` containing ``t``."""
        lo, hi = self.offsets[x], self.offsets[x + 1]
        k = np.searchsorted(self.radii[lo:hi], t, side="right") - 1
        return int(lo + max(k, 0))

    def slots(self, r) -> np.ndarray:
        """Vectorised :meth:`slot` for all points at radii ``r`` (scalar or
        per-point array)."""
        n = self.offsets.shape[0] - 1
        r = np.broadcast_to(np.asarray(r, dtype=float), (n,))
        return _kernels.rowwise_lookup(self.radii, self.offsets, np.ascontiguousarray(r))

    def open_volume(self, x: int, radius: float) -> float:
        """Measure of the open ball ``{y : dist(x, y) < radius}``."""
        cnt = np.searchsorted(self.sdist[x], radius, side="left")
        return float(self.cummass[x, cnt - 1]) if cnt > 0 else 0.0


@dataclass(eq=False)
class Space:
    """A finite (quasi-)metric measure space.

    Parameters
    ----------
    dist : (n, n) array
        Symmetric distance matrix with zero diagonal.
    weight : (n,) array
        Positive point masses.
    a0 : float
        Quasi-triangle constant, ``dist(i,k) <= a0 (dist(i,j) + dist(j,k))``.
    label : str
        Provenance string.
    coords : (n, d) array, optional
        Generator coordinates, used by coordinate-based field rules.
    """

    dist: np.ndarray
    weight: np.ndarray
    a0: float = 1.0
    label: str = ""
    coords: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weight.sum())

    @cached_property
    def index(self) -> BallIndex:
        return BallIndex.from_space(self.dist, self.weight)

    @cached_property
    def volume_matrix(self) -> np.ndarray:
        """``V[i, j] = mu(B(x_i, dist(i, j)))`` with the closed ball, so the
        ball always contains ``x_j``."""
        idx = self.index
        return _kernels.group_end_cumsum(idx.order, idx.is_end, self.weight)

    @cached_property
    def min_distance(self) -> float:
        if self.n < 2:
            return np.inf
        return float(self.index.sdist[:, 1].min())

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max())

    def permuted(self, perm: Sequence[int]) -> "Space":
        perm = np.asarray(perm)
        coords = None if self.coords is None else self.coords[perm]
        return Space(self.dist[np.ix_(perm, perm)], self.weight[perm], self.a0,
                     self.label, coords)


def _check_triangle(dist: np.ndarray, a0: float, seed: int = 0) -> float:
    n = dist.shape[0]
    if n < 3:
        return 0.0
    if n <= EXHAUSTIVE_TRIPLE_LIMIT:
        return float(_kernels.triangle_violation_exhaustive(dist, a0))
    rng = np.random.default_rng(seed)
    i, j, k = rng.integers(0, n, size=(3, RANDOM_TRIPLES))
    keep = i != k
    i, j, k = i[keep], j[keep], k[keep]
    return float(np.max(dist[i, k] / (a0 * (dist[i, j] + dist[j, k]))))


def build_space(dist, weights, a0: float = 1.0, label: str = "",
                coords=None, check: bool = True) -> Space:
    """Validate a distance matrix and weights and wrap them in a :class:`Space`."""
    dist = np.array(dist, dtype=float)
    weights = np.array(weights, dtype=float).reshape(-1)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise SpaceError(f"distance matrix must be square, got shape {dist.shape}")
    n = dist.shape[0]
    if n == 0:
        raise SpaceError("space must contain at least one point")
    if weights.shape[0] != n:
        raise SpaceError(f"{weights.shape[0]} weights for {n} points")
    if not np.all(np.isfinite(dist)):
        raise SpaceError("distance matrix has non-finite entries")
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise SpaceError("weights must be finite and strictly positive")
    if not a0 >= 1.0:
        raise SpaceError(f"quasi-metric constant must be >= 1, got {a0}")
    scale = max(float(np.abs(dist).max()), 1.0)
    if np.abs(dist - dist.T).max() > 1e-12 * scale:
        raise SpaceError("distance matrix is not symmetric")
    upper = np.triu(dist, 1)
    dist = upper + upper.T
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] <= 0):
        raise SpaceError("distinct points must be at positive distance")
    if check:
        worst = _check_triangle(dist, a0)
        if worst > 1.0 + TRIANGLE_SLACK:
            raise SpaceError(
                f"quasi-triangle inequality violated: ratio {worst:.6g} exceeds 1 "
                f"with a0={a0}")
    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
    return Space(dist, weights, float(a0), label, coords)


def grid(d: int, n_per_side: int) -> Space:
    """Uniform lattice in ``[0, 1]^d`` with Euclidean distance and uniform
    weights summing to one."""
    if d < 1 or n_per_side < 2:
        raise SpaceError("grid needs d >= 1 and at least 2 points per side")
    axes = [np.arange(n_per_side)] * d
    ints = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    step = 1.0 / (n_per_side - 1)
    # integer squared distances keep equal distances bit-identical
    diff = ints[:, None, :] - ints[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1).astype(float)) * step
    n = ints.shape[0]
    return build_space(dist, np.full(n, 1.0 / n), 1.0,
                       f"grid(d={d}, n_per_side={n_per_side})", ints * step)


def graph(edges, n_vertices: Optional[int] = None, weights=None,
          label: str = "") -> Space:
    """Shortest-path metric of an undirected graph with positive edge lengths.

    ``edges`` is a sequence of ``(u, v, length)`` triples.
    """
    edges = list(edges)
    if n_vertices is None:
        n_vertices = 1 + max(max(int(u), int(v)) for u, v, _ in edges)
    u = np.array([e[0] for e in edges], dtype=int)
    v = np.array([e[1] for e in edges], dtype=int)
    length = np.array([e[2] for e in edges], dtype=float)
    if np.any(length <= 0) or not np.all(np.isfinite(length)):
        raise SpaceError("edge lengths must be positive and finite")
    adj = csr_matrix((length, (u, v)), shape=(n_vertices, n_vertices))
    dist = dijkstra(adj, directed=False)
    if not np.all(np.isfinite(dist)):
        raise SpaceError("graph is disconnected (infinite distances)")
    if weights is None:
        weights = np.full(n_vertices, 1.0 / n_vertices)
    return build_space(dist, weights, 1.0, label or f"graph(n={n_vertices}, m={len(edges)})")


def heisenberg_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Group law of the first Heisenberg group in exponential coordinates."""
    x = a[..., 0] + b[..., 0]
    y = a[..., 1] + b[..., 1]
    z = a[..., 2] + b[..., 2] + 0.5 * (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])
    return np.stack([x, y, z], axis=-1)


def heisenberg_gauge(p: np.ndarray) -> np.ndarray:
    return ((p[..., 0] ** 2 + p[..., 1] ** 2) ** 2 + 16.0 * p[..., 2] ** 2) ** 0.25


def heisenberg_distance(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return heisenberg_gauge(heisenberg_product(-p, q))


def heisenberg(n_per_side: int, step: Optional[float] = None) -> Space:
    """Dilated integer lattice ``{(i s, j s, k s^2)}`` in the Heisenberg group.

    The vertical coordinate uses ``s^2`` so the lattice is the image of
    ``{0..n-1}^3`` under the group dilation by ``s``; ``s`` defaults to
    ``1 / (n_per_side - 1)``.  Distance is the gauge of ``p^{-1} q``.
    """
    if n_per_side < 2:
        raise SpaceError("heisenberg needs at least 2 points per side")
    s = 1.0 / (n_per_side - 1) if step is None else float(step)
    axes = [np.arange(n_per_side)] * 3
    ints = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    pts = ints * np.array([s, s, s * s])
    dist = heisenberg_distance(pts[:, None, :], pts[None, :, :])
    n = pts.shape[0]
    return build_space(dist, np.full(n, 1.0 / n), 1.0,
                       f"heisenberg(n_per_side={n_per_side}, step={s:.6g})", pts)


def snowflake(base: Space, alpha: float) -> Space:
    """Replace ``dist`` by ``dist ** alpha``; weights and ``a0`` unchanged."""
    if not 0.0 < alpha < 1.0:
        raise SpaceError(f"snowflake exponent must lie in (0, 1), got {alpha}")
    return build_space(base.dist ** alpha, base.weight, base.a0,
                       f"snowflake({base.label}, alpha={alpha})", base.coords)


_FAMILIES = {
    "grid": lambda p: grid(int(p["dim"]), int(p["side"])),
    "graph": lambda p: graph(p["edges"], p.get("n_vertices"), p.get("weights")),
    "heisenberg": lambda p: heisenberg(int(p["side"]), p.get("step")),
}


def generate(family: str, params: Optional[dict] = None, seed: Optional[int] = None,
             **kwargs) -> Space:
    """Build a space from a named family.

    ``grid(dim, side)``, ``graph(edges, n_vertices, weights)``,
    ``heisenberg(side, step)`` and ``snowflake(base, alpha)`` where ``base`` is
    either a :class:`Space` or a nested ``{"family": ..., ...}`` mapping.  The
    generators are deterministic; ``seed`` is accepted for interface
    uniformity.
    """
    p = dict(params or {})
    p.update(kwargs)
    if family == "snowflake":
        base = p["base"]
        if isinstance(base, dict):
            base = dict(base)
            base = generate(base.pop("family"), base, seed)
        return snowflake(base, float(p["alpha"]))
    if family not in _FAMILIES:
        raise SpaceError(f"unknown space family {family!r}")
    return _FAMILIES[family](p)


def ball(space: Space, x: int, t: float):
    """Closed ball ``B(x, t)``: sorted member indices and its measure."""
    if not 0 <= x < space.n:
        raise IndexError(f"point {x} out of range for space of size {space.n}")
    if t < 0:
        raise ValueError("radius must be nonnegative")
    idx = space.index
    k = idx.slot(x, t)
    members = np.sort(idx.order[x, :idx.ends[k]])
    return members, float(idx.mass[k])


@dataclass
class DimensionFit:
    c_mu: float
    d_lower: float
    d_upper: float
    sample_count: int


def doubling_and_dimension(space: Space, sample_size: int = 64, seed: int = 0,
                           min_ratio: float = 2.0, min_points: int = 1,
                           max_mass_fraction: float = 1.0,
                           centers=None) -> DimensionFit:
    """Estimate the doubling constant and lower/upper volume-growth exponents.

    ``c_mu`` is the exact supremum over ``r > 0`` of ``V(x, 2r) / V(x, r)``
    for each sampled centre: on ``[d_k, d_{k+1})`` the ratio is largest as
    ``r`` approaches ``d_{k+1}`` from below, where ``V(x, 2r)`` tends to the
    open-ball mass at radius ``2 d_{k+1}``.

    Slopes ``log(V(x,R)/V(x,r)) / log(R/r)`` are taken over breakpoint pairs
    with ``R/r >= min_ratio``, the small ball holding at least ``min_points``
    points and the large ball at most ``max_mass_fraction`` of the total
    mass.  Pairs failing these filters are skipped.  ``centers`` overrides
    the random sample with an explicit list of centre indices.
    """
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    n = space.n
    rng = np.random.default_rng(seed)
    if centers is not None:
        xs = np.asarray(centers, dtype=int)
    elif sample_size >= n:
        xs = np.arange(n)
    else:
        xs = np.sort(rng.choice(n, sample_size, replace=False))
    idx = space.index
    total = space.total_mass
    c_mu = 1.0
    slopes_lo, slopes_hi = np.inf, -np.inf
    for x in xs:
        lo, hi = idx.offsets[x], idx.offsets[x + 1]
        radii = idx.radii[lo:hi]
        mass = idx.mass[lo:hi]
        ends = idx.ends[lo:hi]
        if radii.shape[0] > 1:
            cnt = np.searchsorted(idx.sdist[x], 2.0 * radii[1:], side="left")
            vopen = idx.cummass[x, cnt - 1]
            c_mu = max(c_mu, float(np.max(vopen / mass[:-1])))
        ok_r = (radii > 0) & (ends >= min_points)
        ok_R = (radii > 0) & (mass <= max_mass_fraction * total * (1 + 1e-12))
        r, vr = radii[ok_r], mass[ok_r]
        R, vR = radii[ok_R], mass[ok_R]
        if r.size == 0 or R.size == 0:
            continue
        ratio = R[None, :] / r[:, None]
        keep = ratio >= min_ratio
        if not keep.any():
            continue
        s = np.log(vR[None, :] / vr[:, None])[keep] / np.log(ratio[keep])
        slopes_lo = min(slopes_lo, float(s.min()))
        slopes_hi = max(slopes_hi, float(s.max()))
    if not np.isfinite(slopes_lo):
        slopes_lo = slopes_hi = float("nan")
    return DimensionFit(c_mu, slopes_lo, slopes_hi, int(len(xs)))
