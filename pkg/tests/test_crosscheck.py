"""Cross-check of the exact Hajlasz solver against a general conic solver."""
import numpy as np
import pytest

from mmspace import grid, solve_exact

cp = pytest.importorskip("cvxpy")


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_exact_norm_matches_conic_solver(p):
    sp = grid(2, 5)
    f = np.cos(2 * sp.coords[:, 0]) * sp.coords[:, 1]
    i, j = np.triu_indices(sp.n, 1)
    c = np.abs(f[i] - f[j]) / sp.dist[i, j]
    h = cp.Variable(sp.n, nonneg=True)
    prob = cp.Problem(cp.Minimize(sp.weight @ cp.power(h, p)), [h[i] + h[j] >= c])
    prob.solve()
    ref = prob.value ** (1 / p)
    assert solve_exact(sp, f, p).lp_norm == pytest.approx(ref, rel=1e-5)
