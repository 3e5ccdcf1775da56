import numpy as np
import pytest

from mmspace import graph, grid, make_field, snowflake
from mmspace.poincare import macro_poincare, macro_sweep, poincare_sweep


def test_constant_function_ratio_zero():
    sp = grid(2, 8)
    rep = poincare_sweep(sp, family={"c": np.full(sp.n, 3.0)}, samples=None)
    assert np.all(rep.ratios["c"] == 0.0) and rep.infinite == 0 and rep.c_hat == 0.0


def test_two_point_ratio(two_point):
    rep = poincare_sweep(two_point, 2.0, 1.0, {"f": np.array([0.0, 1.0])}, samples=None)
    at = (rep.centers == 0) & (rep.radii == 1.0)
    assert rep.ratios["f"][at] == pytest.approx([0.5])
    assert rep.c_hat >= rep.ratios["f"].max()


def test_errors(two_point):
    with pytest.raises(ValueError):
        poincare_sweep(two_point, family={})
    with pytest.raises(ValueError):
        poincare_sweep(two_point, lam=0.5)
    with pytest.raises(ValueError):
        macro_poincare(two_point, [0.0, 1.0], 0, 0.5, 1.0)


def test_zero_right_side_is_flagged():
    # two tight pairs far apart: lip_hat with window 1 vanishes everywhere
    sp = graph([(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0)])
    f = np.array([0.0, 0.0, 1.0, 1.0])
    rep = poincare_sweep(sp, family={"f": f}, samples=None, window=1)
    q = rep.ratios["f"]
    assert np.all(q >= 0)
    assert rep.infinite == int(np.isinf(q).sum()) > 0
    assert rep.c_hat == 0.0


@pytest.mark.parametrize("dim, sides", [(1, (32, 64)), (2, (8, 16))])
def test_chat_stable_under_refinement(dim, sides):
    c = [poincare_sweep(grid(dim, s), samples=None).c_hat for s in sides]
    assert abs(c[1] / c[0] - 1) <= 0.2


def test_snowflake_chat_grows():
    c = [poincare_sweep(snowflake(grid(1, 2 ** k), 0.5), samples=None).c_hat
         for k in (5, 6, 7)]
    assert all(b >= 1.3 * a for a, b in zip(c, c[1:]))


@pytest.mark.parametrize("a, b", [(3.0, 1.0), (-0.5, 7.0)])
def test_ratios_invariant_under_affine_maps(a, b):
    sp = grid(2, 8)
    f = make_field(sp, "product")
    r0 = poincare_sweep(sp, family={"f": f}, samples=None).ratios["f"]
    r1 = poincare_sweep(sp, family={"f": a * f + b}, samples=None).ratios["f"]
    np.testing.assert_allclose(r1, r0, rtol=1e-9)
    m0 = macro_poincare(sp, f, 20, 0.5, 0.2)
    assert macro_poincare(sp, a * f + b, 20, 0.5, 0.2) == pytest.approx(m0, rel=1e-9)


def test_macro_constant_field():
    sp = grid(1, 32)
    assert macro_poincare(sp, np.ones(32), 10, 0.5, 0.1) == 0.0
    assert macro_sweep(sp, np.ones(32)).flags == 0


def test_macro_linear_interior():
    sp = grid(1, 256)
    assert macro_poincare(sp, sp.coords[:, 0], 128, 0.25, 1 / 16) <= 2.0


def test_macro_sweep_on_noise_field():
    sp = grid(2, 32)
    f = make_field(sp, "mollified-noise", seed=0)
    rep = macro_sweep(sp, f, samples=100, seed=0)
    vals = np.array([rep.by_ratio[q] for q in sorted(rep.by_ratio)])
    assert np.all(np.isfinite(vals)) and rep.flags == 0
    assert np.polyfit(np.log(sorted(rep.by_ratio)), vals, 1)[0] <= 0


def test_macro_left_side_independent_of_r():
    sp = grid(1, 64)
    f = np.sin(5 * sp.coords[:, 0])
    rs = np.array([0.02, 0.05, 0.1, 0.2])
    vals = np.array([macro_poincare(sp, f, 30, 0.4, r) for r in rs])
    assert np.all(vals >= 0)
