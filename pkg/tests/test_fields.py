import numpy as np
import pytest

from mmspace import build_space, grid, heisenberg, make_field
from mmspace.fields import FieldRuleError, center_point, register_rule


def test_coordinate_rules():
    sp = grid(2, 3)
    np.testing.assert_array_equal(make_field(sp, "linear", axis=1), sp.coords[:, 1])
    np.testing.assert_array_equal(make_field(sp, "product"), sp.coords.prod(axis=1))
    np.testing.assert_allclose(make_field(grid(1, 3), "product"), [0.0, 0.25, 1.0])


def test_distance_rules():
    sp = grid(1, 5)
    assert center_point(sp) == 2
    np.testing.assert_allclose(make_field(sp, "distance-to-point"), [0.5, 0.25, 0, 0.25, 0.5])
    a = make_field(sp, "distance-to-random-points", seed=3)
    np.testing.assert_array_equal(a, make_field(sp, "distance-to-random-points", seed=3))


def test_noise_rule_normalised_and_seeded():
    sp = heisenberg(4)
    g = make_field(sp, "mollified-noise", seed=1)
    assert abs(g.mean()) < 1e-12 and np.abs(g).max() == pytest.approx(1.0)
    np.testing.assert_array_equal(g, make_field(sp, "mollified-noise", seed=1))
    assert not np.array_equal(g, make_field(sp, "mollified-noise", seed=2))


def test_unknown_rule_and_missing_coordinates():
    with pytest.raises(FieldRuleError, match="unknown field rule"):
        make_field(grid(1, 3), "cubic")
    sp = build_space([[0, 1], [1, 0]], [0.5, 0.5])
    with pytest.raises(FieldRuleError, match="no coordinates"):
        make_field(sp, "linear")


def test_register_rule():
    register_rule("ones-plus-index", lambda space: np.arange(space.n) + 1.0)
    np.testing.assert_array_equal(make_field(grid(1, 3), "ones-plus-index"), [1, 2, 3])
