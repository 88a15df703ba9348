"""Second-order forward-mode differentiation.

A :class:`Dual2` carries a value together with its gradient and Hessian with
respect to a fixed set of seed variables. Arithmetic and the elementary
functions propagate all three exactly (no truncation error), so evaluating a
scalar field on seeded numbers yields its value, gradient and Hessian at a
point to machine precision.

Only the upper triangle of the Hessian is propagated and mirrored at the end,
so the returned matrix is symmetric bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Dual2",
    "Jet2",
    "ScalarField",
    "jet2",
    "grad",
    "fd_jet2",
    "jacobian",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "pow",
]


@lru_cache(maxsize=None)
def _pairs(d: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, j) for i in range(d) for j in range(i, d))


class Dual2:
    """Truncated second-order Taylor number.

    The gradient is a list of length d and the Hessian its packed upper
    triangle (row-major, ``i <= j``), which keeps the unpacked matrix exactly
    symmetric. ``hess`` may be ``None`` to carry first-order data only.
    Plain lists beat numpy here: d is small and per-call overhead dominates.
    """

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val: float, grad: list, hess: list | None):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def variables(cls, x: Sequence[float], order: int = 2) -> list[Dual2]:
        """Seed one independent variable per entry of ``x``."""
        d = len(x)
        m = d * (d + 1) // 2
        out = []
        for i, xi in enumerate(x):
            g = [0.0] * d
            g[i] = 1.0
            out.append(cls(float(xi), g, [0.0] * m if order >= 2 else None))
        return out

    def _chain(self, f0: float, f1: float, f2: float) -> Dual2:
        # phi(self), given phi, phi', phi'' at self.val
        g1 = self.grad
        g = [f1 * a for a in g1]
        if self.hess is None:
            return Dual2(f0, g, None)
        h = [f1 * u + f2 * g1[i] * g1[j] for (i, j), u in zip(_pairs(len(g1)), self.hess)]
        return Dual2(f0, g, h)

    def _scale(self, c: float) -> Dual2:
        h = None if self.hess is None else [c * u for u in self.hess]
        return Dual2(self.val * c, [c * a for a in self.grad], h)

    def __add__(self, other):
        if isinstance(other, Dual2):
            g = [a + b for a, b in zip(self.grad, other.grad)]
            if self.hess is None or other.hess is None:
                return Dual2(self.val + other.val, g, None)
            return Dual2(self.val + other.val, g, [u + v for u, v in zip(self.hess, other.hess)])
        return Dual2(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        h = None if self.hess is None else [-u for u in self.hess]
        return Dual2(-self.val, [-a for a in self.grad], h)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Dual2):
            g = [a - b for a, b in zip(self.grad, other.grad)]
            if self.hess is None or other.hess is None:
                return Dual2(self.val - other.val, g, None)
            return Dual2(self.val - other.val, g, [u - v for u, v in zip(self.hess, other.hess)])
        return Dual2(self.val - other, self.grad, self.hess)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual2):
            a, b = self.val, other.val
            g1, g2 = self.grad, other.grad
            g = [a * y + b * x for x, y in zip(g1, g2)]
            if self.hess is None or other.hess is None:
                return Dual2(a * b, g, None)
            h = [
                a * u + b * v + (g1[i] * g2[j] + g2[i] * g1[j])
                for (i, j), u, v in zip(_pairs(len(g1)), other.hess, self.hess)
            ]
            return Dual2(a * b, g, h)
        return self._scale(float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return self * other._reciprocal()
        return self._scale(1.0 / float(other))

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def _reciprocal(self) -> Dual2:
        a = self.val
        if a == 0.0:
            raise ZeroDivisionError("division by a Dual2 with zero value")
        r = 1.0 / a
        return self._chain(r, -r * r, 2.0 * r * r * r)

    def __pow__(self, other):
        return pow(self, other)

    def __rpow__(self, other):
        return pow(other, self)

    def __float__(self) -> float:
        return float(self.val)

    def gradient(self) -> np.ndarray:
        return np.array(self.grad, dtype=float)

    def hessian(self) -> np.ndarray:
        d = len(self.grad)
        H = np.zeros((d, d))
        if self.hess is not None:
            for (i, j), u in zip(_pairs(d), self.hess):
                H[i, j] = u
                H[j, i] = u
        return H

    def __repr__(self) -> str:
        return f"Dual2({self.val!r}, grad={self.grad!r})"


def _is_dual(x) -> bool:
    return isinstance(x, Dual2)


def sin(x):
    if _is_dual(x):
        s, c = math.sin(x.val), math.cos(x.val)
        return x._chain(s, c, -s)
    return math.sin(x)


def cos(x):
    if _is_dual(x):
        s, c = math.sin(x.val), math.cos(x.val)
        return x._chain(c, -s, -c)
    return math.cos(x)


def exp(x):
    if _is_dual(x):
        e = math.exp(x.val)
        return x._chain(e, e, e)
    return math.exp(x)


def log(x):
    if _is_dual(x):
        a = x.val
        return x._chain(math.log(a), 1.0 / a, -1.0 / (a * a))
    return math.log(x)


def sqrt(x):
    if _is_dual(x):
        r = math.sqrt(x.val)
        if r == 0.0:
            raise ValueError("sqrt is not differentiable at 0")
        return x._chain(r, 0.5 / r, -0.25 / (r * x.val))
    return math.sqrt(x)


def pow(base, expo):  # noqa: A001 - mirrors the expression grammar name
    """``base ** expo`` for floats and :class:`Dual2` in either slot."""
    if _is_dual(expo):
        if _is_dual(base):
            return exp(expo * log(base))
        b = float(base)
        lb = math.log(b)
        e = b ** expo.val
        return expo._chain(e, e * lb, e * lb * lb)
    k = float(expo)
    if _is_dual(base):
        a = base.val
        if k == 0.0:
            return base._chain(1.0, 0.0, 0.0)
        if k == 1.0:
            return base
        if k == 2.0:
            return base._chain(a * a, 2.0 * a, 2.0)
        return base._chain(a**k, k * a ** (k - 1.0), k * (k - 1.0) * a ** (k - 2.0))
    return float(base) ** k


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and Hessian of a scalar field at a point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


class ScalarField:
    """A real function of a coordinate tuple.

    ``fn`` receives a sequence of numbers (plain floats or :class:`Dual2`) and
    must only use arithmetic and the elementary functions of this module, so
    the same code path serves plain evaluation and exact differentiation.
    """

    def __init__(self, fn: Callable[[Sequence], object], arity: int, name: str = ""):
        self.fn = fn
        self.arity = int(arity)
        self.name = name

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.arity:
            raise ValueError(f"{self.name or 'field'} expects {self.arity} coordinates, got {x.shape[0]}")
        return x

    def __call__(self, x) -> float:
        return float(_value(self.fn(list(self._check(x)))))

    def jet2(self, x) -> Jet2:
        x = self._check(x)
        out = self.fn(Dual2.variables(x, order=2))
        d = self.arity
        if not isinstance(out, Dual2):
            return Jet2(float(out), np.zeros(d), np.zeros((d, d)))
        return Jet2(float(out.val), out.gradient(), out.hessian())

    def grad(self, x) -> tuple[float, np.ndarray]:
        """Value and gradient only (first-order propagation)."""
        x = self._check(x)
        out = self.fn(Dual2.variables(x, order=1))
        if not isinstance(out, Dual2):
            return float(out), np.zeros(self.arity)
        return float(out.val), out.gradient()

    def __repr__(self) -> str:
        return f"ScalarField({self.name or self.fn!r}, arity={self.arity})"


def _value(v) -> float:
    return v.val if isinstance(v, Dual2) else v


def _as_field(f, arity: int | None = None) -> ScalarField:
    if isinstance(f, ScalarField):
        return f
    if arity is None:
        raise TypeError("a plain callable needs an explicit arity")
    return ScalarField(f, arity)


def jet2(f, x) -> Jet2:
    """Exact value, gradient and Hessian of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return _as_field(f, len(x)).jet2(x)


def grad(f, x) -> tuple[float, np.ndarray]:
    x = np.asarray(x, dtype=float).reshape(-1)
    return _as_field(f, len(x)).grad(x)


def fd_jet2(f, x, h: float = 1e-5, h2: float = 1e-4) -> Jet2:
    """Central-difference estimate of value, gradient and Hessian.

    Only meant as an oracle for :func:`jet2`. The gradient uses step ``h`` and
    the Hessian step ``h2``; both carry an O(step^2) truncation error. Second
    differences lose about ``eps*|f|/h2^2`` to rounding, hence the larger step.
    """
    if not (h > 0 and h2 > 0):
        raise ValueError("steps must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    field = _as_field(f, len(x))
    d = len(x)
    f0 = field(x)
    e = np.eye(d) * h
    g = np.array([(field(x + e[i]) - field(x - e[i])) / (2 * h) for i in range(d)])
    e = np.eye(d) * h2
    H = np.empty((d, d))
    for i in range(d):
        H[i, i] = (field(x + e[i]) - 2 * f0 + field(x - e[i])) / (h2 * h2)
        for j in range(i + 1, d):
            v = (
                field(x + e[i] + e[j])
                - field(x + e[i] - e[j])
                - field(x - e[i] + e[j])
                + field(x - e[i] - e[j])
            ) / (4 * h2 * h2)
            H[i, j] = H[j, i] = v
    return Jet2(f0, g, H)


def jacobian(m, x) -> np.ndarray:
    """Exact Jacobian of the coordinate map ``m`` at ``x``.

    Objects exposing their own ``jacobian(x)`` (maps built from derivatives of
    a scalar field, e.g. Legendre transforms) are deferred to; anything else is
    pushed through first-order forward mode.
    """
    own = getattr(m, "jacobian", None)
    if callable(own):
        return np.asarray(own(x), dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1)
    seeds = np.empty(len(x), dtype=object)
    seeds[:] = Dual2.variables(x, order=1)
    out = m(seeds)
    rows = []
    for y in np.asarray(out, dtype=object).reshape(-1):
        rows.append(y.gradient() if isinstance(y, Dual2) else np.zeros(len(x)))
    return np.array(rows, dtype=float).reshape(len(rows), len(x))
