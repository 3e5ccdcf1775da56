import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mmspace import grid, mollify, partition, t_net, verify_mollifier_bounds

from conftest import random_space

SPACE = random_space(np.random.default_rng(31), 40)
fields = arrays(float, SPACE.n, elements=st.floats(-10, 10, allow_subnormal=False))


def test_net_examples(grid3):
    assert t_net(grid3, 0.6).tolist() == [0, 2]
    assert t_net(grid3, 0.4).tolist() == [0, 1, 2]
    assert t_net(grid3, 5.0).tolist() == [0]


@given(st.floats(0.01, 1.5), st.one_of(st.none(), st.integers(0, 100)))
def test_net_separated_and_maximal(t, seed):
    c = t_net(SPACE, t, seed)
    d = SPACE.dist[np.ix_(c, c)]
    assert np.all(d[~np.eye(c.size, dtype=bool)] >= t)
    assert np.all(SPACE.dist[:, c].min(axis=1) < t)


def test_single_center_partition(grid3):
    part = partition(grid3, 5.0)
    np.testing.assert_allclose(part.phi.toarray(), 1.0)


def test_symmetric_overlap(grid3):
    phi = partition(grid3, 0.6, 1.0).phi.toarray()
    np.testing.assert_allclose(phi[:, 1], [0.5, 0.5])


@given(st.floats(0.05, 1.0), st.floats(0.1, 3.0))
def test_partition_invariants(t, gamma):
    part = partition(SPACE, t, gamma)
    phi = part.phi.toarray()
    assert np.abs(phi.sum(axis=0) - 1.0).max() <= 1e-12
    assert phi.min() >= 0.0 and phi.max() <= 1.0
    far = SPACE.dist[part.centers] >= (1 + gamma) * t
    assert np.all(phi[far] == 0.0)
    d = SPACE.dist + np.eye(SPACE.n)
    worst = max((np.abs(r[:, None] - r[None, :]) / d).max() for r in phi)
    assert worst <= part.lipschitz_constant / t * (1 + 1e-12)


def test_mollify_constant_and_two_point(two_point):
    np.testing.assert_allclose(mollify(SPACE, np.full(SPACE.n, 3.0), 0.3), 3.0, rtol=1e-14)
    np.testing.assert_allclose(mollify(two_point, [0.0, 1.0], 0.5, 0.5), [0.0, 1.0])


@given(fields, fields, st.floats(0.05, 1.0), st.floats(-3, 3))
def test_mollify_linear_and_contractive(f, g, t, c):
    part = partition(SPACE, t)
    mf, mg = mollify(SPACE, f, t, part=part), mollify(SPACE, g, t, part=part)
    np.testing.assert_allclose(mollify(SPACE, f + c * g, t, part=part), mf + c * mg,
                               atol=1e-9 * (1 + np.abs(f).max() + np.abs(c * g).max()))
    np.testing.assert_allclose(mollify(SPACE, f + c, t, part=part), mf + c,
                               atol=1e-9 * (1 + abs(c) + np.abs(f).max()))
    assert np.all(mf >= f.min() - 1e-12) and np.all(mf <= f.max() + 1e-12)


def test_fine_scale_is_identity():
    f = np.random.default_rng(0).standard_normal(SPACE.n)
    t = 0.99 * SPACE.min_distance
    np.testing.assert_array_equal(mollify(SPACE, f, t, 0.01), f)


def test_verify_constant_field(grid3):
    rep = verify_mollifier_bounds(grid3, np.ones(3), 0.5)
    assert rep.ratio_a == rep.ratio_b == rep.ratio_c == rep.ratio_d == 0.0


def test_verify_reports_scale_constants():
    rep = verify_mollifier_bounds(grid(1, 16), np.linspace(0, 1, 16), 0.25, gamma=1.0)
    # b = 1 + gamma + 2a and c = max(1 + b, 3 + 2 gamma) with a = 2
    assert (rep.b, rep.c) == (6.0, 7.0)
    assert rep.to_dict()["nCenters"] == rep.n_centers


def test_refinement_sweep_on_linear_field():
    sp = grid(1, 128)
    f = sp.coords[:, 0]
    ts = 2.0 ** -np.arange(3, 7)
    reps = [verify_mollifier_bounds(sp, f, t) for t in ts]
    assert max(r.ratio_d for r in reps) <= 3.0
    a = np.array([r.ratio_a for r in reps])
    slope = np.polyfit(np.log(ts), np.log(a), 1)[0]
    assert abs(slope) <= 0.2
