from __future__ import annotations

import numpy as np
import pytest

from jetmech.geometry import SpacePoint, space


def point(tag, n, coords) -> SpacePoint:
    return SpacePoint(space(tag, n), np.asarray(coords, dtype=float))


def random_expression(rng: np.random.Generator, names: list[str], depth: int = 4) -> str:
    """A random smooth expression string; denominators and exponents are kept bounded."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.7:
            return names[rng.integers(len(names))]
        return repr(round(float(rng.uniform(-2, 2)), 3))
    a = random_expression(rng, names, depth - 1)
    kind = rng.integers(8)
    if kind < 3:
        b = random_expression(rng, names, depth - 1)
        return f"({a}) {'+-*'[kind]} ({b})"
    if kind == 3:
        b = random_expression(rng, names, depth - 1)
        return f"({a}) / (1.5 + ({b}) * ({b}))"
    if kind == 4:
        return f"sin({a})"
    if kind == 5:
        return f"cos({a})"
    if kind == 6:
        return f"exp(sin({a}))"
    return f"pow(1.2 + ({a}) * ({a}), 0.75)"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
