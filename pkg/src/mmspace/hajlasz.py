"""Hajlasz gradients: exact minimisation, maximal-function certificates, and
Lipschitz truncation.

A nonnegative ``h`` is a Hajlasz gradient of ``f`` when
``|f(x) - f(y)| <= (h(x) + h(y)) dist(x, y)`` for all pairs.  The
homogeneous norm is the least ``L^p(mu)`` norm of such an ``h``; on a finite
space this is the convex program

    minimise   sum_i w_i h_i^p
    subject to h_i + h_j >= |f_i - f_j| / dist_ij,   h >= 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .oscillation import as_field, maximal
from .space import Space

__all__ = [
    "GradientCertificate",
    "DEFAULT_EXACT_CAP",
    "lp_norm",
    "violation",
    "certify",
    "slope_matrix",
    "solve_exact",
    "maximal_gradient",
    "lipschitz_truncate",
    "lipschitz_constant",
    "perturbation_check",
]

log = logging.getLogger(__name__)

DEFAULT_EXACT_CAP = 512
MAXIMAL_MULTIPLIER = 7.0
TRUNCATION_FACTOR = 4.0  # (2 + c) with McShane constant c = 2


@dataclass
class GradientCertificate:
    """Candidate Hajlasz gradient with its norm and feasibility ratio.

    ``violation * h`` is always feasible, so ``certified_norm`` is a valid
    upper bound for the Hajlasz-Sobolev norm whatever the provenance.
    """

    h: np.ndarray
    p: float
    lp_norm: float
    violation: float
    provenance: str
    converged: bool = True
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def certified_norm(self) -> float:
        if self.violation == 0.0:
            return 0.0
        return self.violation * self.lp_norm

    @property
    def feasible(self) -> bool:
        return self.violation <= 1.0 + 1e-9

    def to_dict(self) -> dict:
        return {
            "h": self.h.tolist(),
            "p": self.p,
            "lpNorm": self.lp_norm,
            "violation": self.violation,
            "certifiedNorm": self.certified_norm,
            "provenance": self.provenance,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def lp_norm(space: Space, h, p: float) -> float:
    h = np.asarray(h, dtype=float)
    return float(np.dot(space.weight, np.abs(h) ** p) ** (1.0 / p))


def violation(space: Space, f, h) -> float:
    """``max_{i != j} |f_i - f_j| / (dist_ij (h_i + h_j))`` (0/0 := 0)."""
    f = as_field(space, f)
    h = np.ascontiguousarray(h, dtype=float)
    return float(_kernels.pair_violation(f, space.dist, h))


def certify(space: Space, f, h, p: float, provenance: str, **kw) -> GradientCertificate:
    h = np.asarray(h, dtype=float)
    return GradientCertificate(h, p, lp_norm(space, h, p), violation(space, f, h),
                               provenance, **kw)


def slope_matrix(space: Space, f) -> np.ndarray:
    """``c_ij = |f_i - f_j| / dist_ij`` with zero diagonal."""
    f = as_field(space, f)
    d = space.dist.copy()
    np.fill_diagonal(d, 1.0)
    c = np.abs(f[:, None] - f[None, :]) / d
    np.fill_diagonal(c, 0.0)
    return c


def _ipm(w, p, pairs, c, n, tol, max_iter):
    """Primal-dual interior point for min sum w h^p s.t. h_i + h_j >= c_e,
    h >= 0, over the pair list ``pairs`` (m x 2).  Data are pre-scaled so
    ``max c = 1``.  Mehrotra predictor-corrector with a common step length.
    """
    m = pairs.shape[0]
    rows = np.repeat(np.arange(m), 2)
    A = sp.csr_matrix((np.ones(2 * m), (rows, pairs.reshape(-1))), shape=(m, n))
    AT = A.T.tocsr()

    cmax_row = np.zeros(n)
    np.maximum.at(cmax_row, pairs[:, 0], c)
    np.maximum.at(cmax_row, pairs[:, 1], c)
    h = 0.5 * cmax_row + 0.5
    s = A @ h - c
    lam = np.ones(m)
    z = np.ones(n)

    def grad(h):
        return p * w * h ** (p - 1.0)

    def hess(h):
        if p == 1.0:
            return np.zeros(n)
        # for p < 2 the curvature is unbounded as h_i -> 0; the barrier term
        # z/h already dominates there, so a floor on h keeps K finite
        return p * (p - 1.0) * w * np.maximum(h, 1e-12) ** (p - 2.0)

    def max_step(v, dv):
        neg = dv < 0
        if not neg.any():
            return np.inf
        return float(np.min(-v[neg] / dv[neg]))

    dense = (m + n) > 0.15 * n * n
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        r_d = grad(h) - AT @ lam - z
        r_p = A @ h - s - c
        mu = (lam @ s + z @ h) / (m + n)
        if np.abs(r_p).max(initial=0.0) < tol:
            if mu < tol and np.abs(r_d).max(initial=0.0) < tol * max(1.0, np.abs(grad(h)).max()):
                converged = True
                break
            if p > 1.0:
                # for p < 2 the residual test stalls when some h_i -> 0, where
                # the curvature is unbounded; the duality gap does not
                primal = float(w @ h ** p)
                if primal - _dual_bound(w, p, lam, AT @ lam, c) <= tol * max(primal, 1e-300):
                    converged = True
                    break
        D = lam / s
        K = (AT @ sp.diags(D) @ A) + sp.diags(hess(h) + z / h)
        if dense:
            # LU rather than Cholesky: late iterates are too ill-conditioned
            lu_piv = scipy.linalg.lu_factor(K.toarray(), check_finite=False)

            def solve(b):
                return scipy.linalg.lu_solve(lu_piv, b, check_finite=False)
        else:
            lu = spla.splu(K.tocsc())
            solve = lu.solve

        def direction(r_lam, r_z):
            rhs = -r_d - AT @ ((r_lam + lam * r_p) / s) - r_z / h
            dh = solve(rhs)
            ds = A @ dh + r_p
            dlam = -(r_lam + lam * ds) / s
            dz = -(r_z + z * dh) / h
            return dh, ds, dlam, dz

        dh, ds, dlam, dz = direction(lam * s, z * h)
        a_aff = min(1.0, max_step(h, dh), max_step(s, ds),
                    max_step(lam, dlam), max_step(z, dz))
        mu_aff = ((lam + a_aff * dlam) @ (s + a_aff * ds)
                  + (z + a_aff * dz) @ (h + a_aff * dh)) / (m + n)
        sigma = min(1.0, (mu_aff / mu) ** 3)
        dh, ds, dlam, dz = direction(lam * s + dlam * ds - sigma * mu,
                                     z * h + dz * dh - sigma * mu)
        alpha = min(1.0, 0.99 * min(max_step(h, dh), max_step(s, ds),
                                    max_step(lam, dlam), max_step(z, dz)))
        if not (np.isfinite(alpha) and alpha > 0.0
                and np.all(np.isfinite(dh)) and np.all(np.isfinite(dlam))):
            break
        h = h + alpha * dh
        s = s + alpha * ds
        lam = lam + alpha * dlam
        z = z + alpha * dz
    return h, converged, it


def _dual_bound(w, p, lam, a, c):
    """Lagrange dual value ``lam.c + sum_i min_{h >= 0} (w_i h^p - a_i h)``
    for ``p > 1``, a lower bound on the optimum for any ``lam >= 0``."""
    a = np.maximum(a, 0.0)
    hstar = (a / (p * w)) ** (1.0 / (p - 1.0))
    return float(lam @ c - (p - 1.0) * (w @ hstar ** p))


def _polish(h, c, max_sweeps=50, tol=0.0):
    """Gauss-Seidel sweeps ``h_i <- max(0, max_j c_ij - h_j)``.  Each update
    is the least feasible value of ``h_i`` given the others, so the objective
    never increases and the result is feasible."""
    h = h.copy()
    n = h.shape[0]
    for sweep in range(max_sweeps):
        change = 0.0
        for i in range(n):
            need = c[i] - h
            need[i] = 0.0
            new = max(0.0, float(need.max()))
            change = max(change, abs(new - h[i]))
            h[i] = new
        if change <= tol:
            break
    return h


def _initial_pairs(space: Space, c: np.ndarray, k_near: int, k_top: int) -> set:
    n = space.n
    pairs = set()
    order = space.index.order
    for kk in range(1, min(k_near, n - 1) + 1):
        for i, j in zip(range(n), order[:, kk]):
            pairs.add((min(i, j), max(i, j)))
    top = np.argsort(-c, axis=1)[:, :k_top]
    for i in range(n):
        for j in top[i]:
            if i != j:
                pairs.add((min(i, j), int(max(i, j))))
    return pairs


def solve_exact(space: Space, f, p: float, tol: float = 1e-8, max_iter: int = 200,
                cap: int = DEFAULT_EXACT_CAP, max_rounds: int = 50) -> GradientCertificate:
    """Minimal-norm Hajlasz gradient by convex optimisation.

    Constraint generation over pairs: an interior-point solve on a working
    set (nearest neighbours plus the steepest pairs of every point), a full
    pairwise feasibility scan, and re-solve with the violated pairs added,
    until none remain.  A final coordinate sweep lowers every ``h_i`` to the
    least value the constraints allow.
    """
    f = as_field(space, f)
    if not p >= 1.0:
        raise ValueError("p must be >= 1")
    n = space.n
    if n > cap:
        raise ValueError(f"exact solver limited to n <= {cap} points (got {n}); raise cap")
    c = slope_matrix(space, f)
    scale = float(c.max())
    if scale == 0.0:
        return certify(space, f, np.zeros(n), p, "exact", iterations=0)
    cn = c / scale
    w = space.weight / space.total_mass

    pairs = {(i, j) for (i, j) in _initial_pairs(space, cn, 8, 4) if cn[i, j] > 0}
    total_iter = 0
    converged = True
    h = None
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        plist = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
        h, ok, it = _ipm(w, p, plist, cn[plist[:, 0], plist[:, 1]], n,
                         tol=tol * 1e-2, max_iter=max_iter)
        total_iter += it
        converged = converged and ok
        gap = cn - h[:, None] - h[None, :]
        np.fill_diagonal(gap, -np.inf)
        viol = np.argwhere(np.triu(gap > 0, 1))
        fresh = [(int(i), int(j)) for i, j in viol if (i, j) not in pairs]
        if not fresh:
            break
        # most violated pairs first, a bounded number per row
        fresh.sort(key=lambda e: -gap[e])
        per_row = {}
        for i, j in fresh:
            if per_row.get(i, 0) < 16:
                pairs.add((i, j))
                per_row[i] = per_row.get(i, 0) + 1
    else:
        converged = False
    h = _polish(h, cn, tol=tol * 1e-3)
    h = h * scale
    cert = certify(space, f, h, p, "exact", converged=converged, iterations=total_iter)
    cert.info.update(rounds=rounds, working_pairs=len(pairs))
    if not converged:
        log.warning("solve_exact did not converge (n=%d, p=%g)", n, p)
    return cert


def perturbation_check(space: Space, f, cert: GradientCertificate, trials: int = 1000,
                       tol: float = 1e-8, seed: int = 0):
    """Local-optimality certificate for a minimiser of the convex program.

    In units where ``max c_ij = 1`` and the total mass is one, each trial
    adds a random perturbation of Euclidean norm ``sqrt(tol)``, clips at
    zero, raises to feasibility in one pass, and compares objectives.
    Returns ``(passed, largest objective decrease)``.
    """
    f = as_field(space, f)
    c = slope_matrix(space, f)
    scale = float(c.max())
    if scale == 0.0:
        return True, 0.0
    cn = c / scale
    w = space.weight / space.total_mass
    p = cert.p
    h0 = np.asarray(cert.h, dtype=float) / scale
    base = float(w @ h0 ** p)
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(trials):
        delta = rng.standard_normal(space.n)
        delta *= np.sqrt(tol) / np.linalg.norm(delta)
        trial = _kernels.raise_to_feasible(cn, np.maximum(h0 + delta, 0.0))
        worst = max(worst, base - float(w @ trial ** p))
    return bool(worst <= tol), float(worst)


def maximal_gradient(space: Space, f, g, p: float, eps: float | None = None,
                     c: float = MAXIMAL_MULTIPLIER) -> GradientCertificate:
    """Candidate gradient ``c * M_{p-eps} g`` built from an oscillation field.

    The chained-ball argument bounds ``|f(u1) - f(u2)|`` by
    ``7 dist(u1, u2) (M_{p-eps} g(u1) + M_{p-eps} g(u2))``, hence the default
    multiplier.  Feasibility is measured, not assumed.
    """
    f = as_field(space, f)
    g = as_field(space, g)
    if eps is None:
        eps = 0.1 * (p - 1.0)
    if not 0.0 < eps < p - 1.0:
        raise ValueError(f"eps must lie in (0, p - 1) = (0, {p - 1.0}), got {eps}")
    h = c * maximal(space, g, p - eps)
    cert = certify(space, f, h, p, "maximal")
    cert.info.update(eps=eps, multiplier=c)
    return cert


def lipschitz_constant(space: Space, f) -> float:
    f = as_field(space, f)
    d = space.dist.copy()
    np.fill_diagonal(d, np.inf)
    return float((np.abs(f[:, None] - f[None, :]) / d).max(initial=0.0))


def lipschitz_truncate(space: Space, f, h, L: float, p: float = 2.0):
    """McShane truncation at level ``L``.

    On ``S = {h <= L}`` the field is ``2L``-Lipschitz; it is extended by the
    inf-convolution ``min_{y in S} f(y) + 2L dist(x, y)`` and kept equal to
    ``f`` on ``S``.  Returns the truncated field and a certificate for the
    residual ``f - f_trunc`` with candidate gradient ``4 h 1{h > L}``.
    """
    f = as_field(space, f)
    h = as_field(space, h)
    if not L > 0:
        raise ValueError("truncation level must be positive")
    v = violation(space, f, h)
    if v > 1.0 + 1e-6:
        raise ValueError(f"h is not a Hajlasz gradient of f (violation {v:.6g})")
    good = h <= L
    if not good.any():
        raise ValueError("truncation level below essential infimum of h")
    ext = (f[good][None, :] + 2.0 * L * space.dist[:, good]).min(axis=1)
    ft = np.where(good, f, ext)
    resid_h = TRUNCATION_FACTOR * h * (~good)
    cert = certify(space, f - ft, resid_h, p, "truncation-residual")
    cert.info.update(L=float(L), lipschitz=lipschitz_constant(space, ft), kept=int(good.sum()))
    return ft, cert
