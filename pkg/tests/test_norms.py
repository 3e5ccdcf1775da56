import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mmspace import (besov_seminorm, commutator_besov, doubling_and_dimension, grid,
                     kappa_curve_tail, level_measure, weak_norm)
from mmspace.oracles import quadrature_level_measure

from conftest import random_space

SPACE = random_space(np.random.default_rng(21), 20)
fields = arrays(float, SPACE.n, elements=st.floats(-10, 10, allow_subnormal=False))
F01 = [0.0, 1.0]


def test_constant_field_gives_zero(grid3):
    c = np.full(3, 2.0)
    assert besov_seminorm(grid3, c, 0.5, 2.0) == 0.0
    assert besov_seminorm(grid3, c, 1.0, 1.5, kernel="power", d=1.0) == 0.0
    assert commutator_besov(grid3, c, 2.0) == 0.0
    assert level_measure(grid3, c, 2.0, 0.01) == 0.0
    val, curve = weak_norm(grid3, c, 2.0)
    assert val == 0.0 and len(curve) == 0
    assert kappa_curve_tail(curve) == 0.0


def test_two_point_values(two_point):
    assert besov_seminorm(two_point, F01, 1.0, 2.0) == pytest.approx(0.5 ** 0.5)
    assert commutator_besov(two_point, F01, 2.0) == pytest.approx(0.5 ** 0.5)
    assert level_measure(two_point, F01, 2.0, 0.3) == pytest.approx(0.5)
    assert level_measure(two_point, F01, 2.0, 0.6) == 0.0
    val, curve = weak_norm(two_point, F01, 2.0)
    assert val == pytest.approx(0.5 * 0.5 ** 0.5)
    assert kappa_curve_tail(curve, 1e-6) == pytest.approx(0.5 * 0.5 ** 0.5)


def test_commutator_three_points(grid3):
    # ordered pairs with nonzero difference: (0,2), (2,0), (1,2) with V = 1, (2,1) with V = 2/3
    expected = (1 + 1 + 1 + 1 / (2 / 3) ** 2) / 9
    assert commutator_besov(grid3, [0.0, 0.0, 1.0], 1.0) == pytest.approx(expected)


def test_besov_grows_affinely_under_refinement():
    ks = np.arange(4, 11)
    vals = np.array([besov_seminorm(grid(1, 2 ** k), np.linspace(0, 1, 2 ** k), 1.0, 2.0) ** 2
                     for k in ks])
    steps = np.diff(vals)
    assert np.all(steps > 0)
    # increments per level settle to a constant
    assert abs(steps[-1] - steps[-2]) < 0.02 * steps[-1]


def test_power_kernel_validation(grid3):
    with pytest.raises(ValueError):
        besov_seminorm(grid3, [0.0, 1.0, 2.0], 1.0, 2.0, kernel="power", d=0.0)
    with pytest.raises(ValueError):
        besov_seminorm(grid3, [0.0, 1.0, 2.0], 1.5, 2.0)


def test_kernel_v_comparable_to_power_kernel():
    sp = grid(2, 16)
    off = sp.dist > 0
    ratio = sp.volume_matrix[off] / sp.dist[off] ** 2
    c_mu = doubling_and_dimension(sp, sp.n).c_mu
    assert ratio.max() / ratio.min() <= c_mu ** 3


def test_level_measure_rejects_nonpositive_kappa(two_point):
    with pytest.raises(ValueError):
        level_measure(two_point, F01, 2.0, 0.0)


@given(fields, st.floats(-20, 20).filter(lambda c: abs(c) > 1e-3))
def test_homogeneity(f, c):
    assert besov_seminorm(SPACE, c * f, 1.0, 2.0) == pytest.approx(
        abs(c) * besov_seminorm(SPACE, f, 1.0, 2.0), rel=1e-10, abs=1e-12)
    assert weak_norm(SPACE, c * f, 2.0)[0] == pytest.approx(
        abs(c) * weak_norm(SPACE, f, 2.0)[0], rel=1e-10, abs=1e-12)


def test_weak_norm_scales_by_ten(two_point):
    assert weak_norm(two_point, [0.0, 10.0], 2.0)[0] == pytest.approx(
        10 * weak_norm(two_point, F01, 2.0)[0], rel=1e-14)


@given(fields, st.floats(0.5, 4))
def test_level_measure_monotone(f, p):
    _, curve = weak_norm(SPACE, f, p)
    if len(curve) == 0:
        return
    kap = np.sort(np.random.default_rng(0).uniform(0, curve.values.max() * 1.1, 30)) + 1e-12
    strict = np.array([level_measure(SPACE, f, p, k) for k in kap])
    loose = np.array([level_measure(SPACE, f, p, k, strict=False) for k in kap])
    assert np.all(np.diff(strict) <= 1e-12 * strict[0])
    assert np.all(strict <= loose)


def test_curve_invariants():
    f = np.random.default_rng(8).standard_normal(SPACE.n)
    val, curve = weak_norm(SPACE, f, 2.0)
    assert np.all(np.diff(curve.values) > 0)
    assert np.all(curve.level_measure > 0)
    assert np.all(np.diff(curve.level_measure) <= 0)
    assert val == curve.score.max() == curve.weak_norm
    kap = np.random.default_rng(1).uniform(0, 1.2 * curve.values.max(), 1000)
    scores = [k * level_measure(SPACE, f, 2.0, k) ** 0.5 for k in kap]
    assert max(scores) <= val * (1 + 1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_level_measure_matches_quadrature(seed):
    rng = np.random.default_rng(100 + seed)
    sp = random_space(rng, int(rng.integers(5, 51)))
    f = rng.standard_normal(sp.n)
    p = float(rng.uniform(1, 3))
    _, curve = weak_norm(sp, f, p)
    kap = np.quantile(curve.values, [0.25, 0.5, 0.75])
    # avoid sitting exactly on a jump of the step function
    kap = kap * (1 + 1e-7)
    exact = np.array([level_measure(sp, f, p, k) for k in kap])
    quad = quadrature_level_measure(sp, f, p, kap)
    np.testing.assert_allclose(quad, exact, rtol=0.01)


def test_kappa_tail_stabilises_on_linear_field():
    scores = []
    for k in range(6, 11):
        sp = grid(1, 2 ** k)
        _, curve = weak_norm(sp, sp.coords[:, 0], 2.0)
        scores.append(kappa_curve_tail(curve))
    scores = np.array(scores)
    assert np.all(np.abs(scores / np.median(scores) - 1) <= 0.15)
