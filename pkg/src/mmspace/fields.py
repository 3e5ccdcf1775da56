"""Named scalar-field rules sampled onto a space.

Coordinate-based rules read ``space.coords`` (set by the grid and Heisenberg
generators).  Every rule returns a fresh float array of length ``space.n``.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .space import Space

__all__ = ["RULES", "make_field", "register_rule", "FieldRuleError", "center_point"]


class FieldRuleError(ValueError):
    """Unknown rule name or parameters the rule cannot use."""


def _coords(space: Space) -> np.ndarray:
    if space.coords is None:
        raise FieldRuleError(f"space {space.label!r} has no coordinates for a coordinate rule")
    return space.coords


def center_point(space: Space) -> int:
    """Point minimising the summed distance to all others (lowest index on ties)."""
    return int(np.argmin(space.dist @ space.weight))


def _constant(space, value=1.0):
    return np.full(space.n, float(value))


def _linear(space, axis=0):
    return _coords(space)[:, int(axis)].astype(float).copy()


def _product(space):
    # in one dimension the only coordinate is multiplied with itself
    x = _coords(space)
    if x.shape[1] == 1:
        return x[:, 0] * x[:, 0]
    return np.prod(x, axis=1)


def _distance_to_point(space, point=None):
    point = center_point(space) if point is None else int(point)
    if not 0 <= point < space.n:
        raise FieldRuleError(f"point {point} out of range")
    return space.dist[point].copy()


def _distance_to_random_points(space, seed=0, count=3):
    rng = np.random.default_rng(seed)
    pts = rng.choice(space.n, size=min(int(count), space.n), replace=False)
    return space.dist[pts].min(axis=0)


def _sin(space, frequency=1.0, axis=0):
    x = _coords(space)[:, int(axis)]
    return np.sin(2.0 * np.pi * float(frequency) * x)


def _mollified_noise(space, seed=0, t=0.125, gamma=1.0):
    from .mollify import mollify

    noise = np.random.default_rng(seed).standard_normal(space.n)
    g = mollify(space, noise, float(t), float(gamma))
    g = g - g.mean()
    scale = np.abs(g).max()
    return g / scale if scale > 0 else g


RULES: dict[str, Callable[..., np.ndarray]] = {
    "constant": _constant,
    "linear": _linear,
    "product": _product,
    "distance-to-point": _distance_to_point,
    "distance-to-random-points": _distance_to_random_points,
    "sin": _sin,
    "mollified-noise": _mollified_noise,
}


def register_rule(name: str, rule: Callable[..., np.ndarray]) -> None:
    RULES[name] = rule


def make_field(space: Space, rule: str, **params) -> np.ndarray:
    """Sample the named rule on ``space``.

    Rules: ``constant(value)``, ``linear(axis)``, ``product``,
    ``distance-to-point(point)``, ``distance-to-random-points(seed, count)``,
    ``sin(frequency, axis)`` and ``mollified-noise(seed, t, gamma)``.
    """
    try:
        fn = RULES[rule]
    except KeyError:
        raise FieldRuleError(f"unknown field rule {rule!r}; known: {sorted(RULES)}") from None
    try:
        out = fn(space, **params)
    except TypeError as exc:
        raise FieldRuleError(f"bad parameters for rule {rule!r}: {exc}") from None
    return np.ascontiguousarray(out, dtype=float)
