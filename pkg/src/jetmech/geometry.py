"""Coordinate spaces and pointwise multilinear algebra.

Conventions (used by every module in the package):

* A 2-form ``w`` is stored as the matrix ``w[i, j] = w(d/dx^i, d/dx^j)``.
  ``dx^a ^ dx^b`` therefore contributes ``+1`` at ``[a, b]`` and ``-1`` at
  ``[b, a]``.
* A bivector ``L`` is stored as ``L[i, j] = L(dx^i, dx^j)``; ``d_a ^ d_b``
  contributes ``+1`` at ``[a, b]``.
* ``sharp(L, alpha) = L(alpha, -)``, i.e. ``v^j = sum_i alpha_i L[i, j]``, or
  ``v = L.T @ alpha`` in column form.
* Interior product ``i_v w = w(v, -)`` is ``w.T @ v``.
* Pullback of a 2-form along a map with Jacobian ``J`` is ``J.T @ w @ J``;
  pushforward of a bivector is ``J @ L @ J.T``.

A global flip of the sharp orientation changes both sides of every
isomorphism check together, so none of the verified statements depend on it.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

RANK_TOL = 1e-9
SKEW_TOL = 1e-14


class Space(enum.Enum):
    """The coordinate spaces of both triples (global charts on R^{1+n} fibrations)."""

    M = "M"
    J1PI = "J1PI"
    VSTAR = "VSTAR"
    TSTARM = "TSTARM"
    J1PI1STAR = "J1PI1STAR"
    QUOT_TSTAR_J1PI = "QUOT_TSTAR_J1PI"
    PMU_QUOT = "PMU_QUOT"
    J1TILDE = "J1TILDE"
    VHAT1 = "VHAT1"
    TSTAR_J1PI = "TSTAR_J1PI"
    # auxiliary spaces carrying the unreduced structures and the plain Tulczyjew map
    PMU = "PMU"
    TVSTAR = "TVSTAR"
    T_TSTAR_N = "T_TSTAR_N"
    TSTAR_T_N = "TSTAR_T_N"


def _block(name: str, n: int) -> list[str]:
    return [f"{name}{i}" for i in range(1, n + 1)]


# coordinate layout per space: list of (label, count-multiplier) where the
# multiplier is 0 for a scalar slot and 1 for an n-vector slot
_LAYOUT: dict[Space, tuple[tuple[str, int], ...]] = {
    Space.M: (("t", 0), ("q", 1)),
    Space.J1PI: (("t", 0), ("q", 1), ("v", 1)),
    Space.VSTAR: (("t", 0), ("q", 1), ("p", 1)),
    Space.TSTARM: (("t", 0), ("q", 1), ("p0", 0), ("p", 1)),
    Space.J1PI1STAR: (("t", 0), ("q", 1), ("p", 1), ("v", 1), ("pdot", 1)),
    Space.QUOT_TSTAR_J1PI: (("t", 0), ("q", 1), ("v", 1), ("p_q", 1), ("p_v", 1)),
    Space.PMU_QUOT: (("t", 0), ("q", 1), ("p", 1), ("p_q", 1), ("p_p", 1)),
    Space.J1TILDE: (("t", 0), ("q", 1), ("p0", 0), ("p", 1), ("v", 1), ("p0dot", 0), ("pdot", 1)),
    Space.VHAT1: (("t", 0), ("q", 1), ("p0", 0), ("p", 1), ("p_t", 0), ("p_q", 1), ("p_p", 1)),
    Space.TSTAR_J1PI: (("t", 0), ("q", 1), ("v", 1), ("p_t", 0), ("p_q", 1), ("p_v", 1)),
    Space.PMU: (("t", 0), ("q", 1), ("p", 1), ("p_t", 0), ("p_q", 1), ("p_p", 1)),
    Space.TVSTAR: (("t", 0), ("q", 1), ("p", 1), ("tdot", 0), ("v", 1), ("pdot", 1)),
    Space.T_TSTAR_N: (("q", 1), ("p", 1), ("v", 1), ("pdot", 1)),
    Space.TSTAR_T_N: (("q", 1), ("v", 1), ("p_q", 1), ("p_v", 1)),
}


@dataclass(frozen=True)
class SpaceId:
    tag: Space
    n: int

    def __post_init__(self):
        if not isinstance(self.tag, Space):
            object.__setattr__(self, "tag", Space(self.tag))
        if int(self.n) < 1:
            raise ValueError("fiber dimension must be a positive integer")

    @property
    def dim(self) -> int:
        return sum(1 if mult == 0 else self.n for _, mult in _LAYOUT[self.tag])

    @property
    def coord_names(self) -> list[str]:
        names: list[str] = []
        for label, mult in _LAYOUT[self.tag]:
            names.extend([label] if mult == 0 else _block(label, self.n))
        return names

    def slot(self, label: str) -> slice | int:
        """Index (scalar slot) or slice (n-vector slot) of a named block."""
        pos = 0
        for lab, mult in _LAYOUT[self.tag]:
            width = 1 if mult == 0 else self.n
            if lab == label:
                return pos if mult == 0 else slice(pos, pos + width)
            pos += width
        raise KeyError(f"{self.tag.value} has no coordinate block {label!r}")

    def index(self, name: str) -> int:
        return self.coord_names.index(name)

    def __str__(self) -> str:
        return f"{self.tag.value}(n={self.n})"


def space(tag: Space | str, n: int) -> SpaceId:
    return SpaceId(Space(tag) if isinstance(tag, str) else tag, n)


@dataclass(frozen=True, eq=False)
class SpacePoint:
    """Coordinates of a point in a named space, in canonical order."""

    space: SpaceId
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.shape[0] != self.space.dim:
            raise ValueError(f"{self.space} needs {self.space.dim} coordinates, got {c.shape[0]}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.coords[self.space.slot(key)]
        return self.coords[key]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpacePoint):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.coords, other.coords)

    def tolist(self) -> list[float]:
        return [float(v) for v in self.coords]

    def __repr__(self) -> str:
        return f"SpacePoint({self.space}, {self.tolist()})"


def as_coords(x, sid: SpaceId | None = None) -> np.ndarray:
    """Coordinates of ``x`` (a SpacePoint or array-like), checked against ``sid``."""
    if isinstance(x, SpacePoint):
        if sid is not None and x.space != sid:
            raise ValueError(f"expected a point of {sid}, got one of {x.space}")
        return np.array(x.coords)
    c = np.asarray(x, dtype=float).reshape(-1)
    if sid is not None and c.shape[0] != sid.dim:
        raise ValueError(f"{sid} needs {sid.dim} coordinates, got {c.shape[0]}")
    return c


class TensorKind(enum.Enum):
    BIVECTOR = "bivector"
    TWO_FORM = "two_form"


@dataclass(frozen=True, eq=False)
class SkewTensor:
    """A bivector or 2-form at a point, as a dense skew matrix."""

    space: SpaceId
    kind: TensorKind
    mat: np.ndarray

    def __post_init__(self):
        m = np.array(self.mat, dtype=float)
        d = self.space.dim
        if m.shape != (d, d):
            raise ValueError(f"{self.space} tensors are {d}x{d}, got {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        if np.max(np.abs(m + m.T), initial=0.0) > SKEW_TOL * scale:
            raise ValueError("matrix is not skew-symmetric")
        m.setflags(write=False)
        object.__setattr__(self, "kind", TensorKind(self.kind))
        object.__setattr__(self, "mat", m)

    def __neg__(self) -> SkewTensor:
        return SkewTensor(self.space, self.kind, -self.mat)


@dataclass(frozen=True, eq=False)
class LinearMapData:
    """Jacobian of a map ``source -> target`` at a point (``dim(target) x dim(source)``)."""

    source: SpaceId
    target: SpaceId
    mat: np.ndarray

    def __post_init__(self):
        m = np.array(self.mat, dtype=float)
        if m.shape != (self.target.dim, self.source.dim):
            raise ValueError(
                f"Jacobian {self.source} -> {self.target} must be "
                f"{self.target.dim}x{self.source.dim}, got {m.shape}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    def __matmul__(self, other: LinearMapData) -> LinearMapData:
        """Composition ``self o other``."""
        if other.target != self.source:
            raise ValueError("cannot compose: spaces do not match")
        return LinearMapData(other.source, self.target, self.mat @ other.mat)


def wedge(sid: SpaceId, kind: TensorKind | str, pairs) -> SkewTensor:
    """Sum of ``x_a ^ x_b`` over named coordinate pairs ``(a, b)``."""
    d = sid.dim
    m = np.zeros((d, d))
    names = sid.coord_names
    for a, b in pairs:
        i, j = names.index(a), names.index(b)
        m[i, j] += 1.0
        m[j, i] -= 1.0
    return SkewTensor(sid, TensorKind(kind), m)


def sharp(lam: SkewTensor, alpha) -> np.ndarray:
    """``L(alpha, -)`` as a tangent vector."""
    if lam.kind is not TensorKind.BIVECTOR:
        raise ValueError("sharp needs a bivector")
    a = np.asarray(alpha, dtype=float).reshape(-1)
    if a.shape[0] != lam.space.dim:
        raise ValueError(f"covector has length {a.shape[0]}, expected {lam.space.dim}")
    return lam.mat.T @ a


def interior(omega: SkewTensor, v) -> np.ndarray:
    """``w(v, -)`` as a covector."""
    if omega.kind is not TensorKind.TWO_FORM:
        raise ValueError("interior product needs a 2-form")
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != omega.space.dim:
        raise ValueError(f"vector has length {v.shape[0]}, expected {omega.space.dim}")
    return omega.mat.T @ v


def _jac(J, source: SpaceId | None, target: SpaceId | None) -> tuple[np.ndarray, SpaceId | None, SpaceId | None]:
    if isinstance(J, LinearMapData):
        return np.asarray(J.mat), J.source, J.target
    return np.asarray(J, dtype=float), source, target


def pullback_two_form(J, omega: SkewTensor, source: SpaceId | None = None) -> SkewTensor:
    """``J^T w J``, a 2-form on the source of ``J``."""
    if omega.kind is not TensorKind.TWO_FORM:
        raise ValueError("pullback needs a 2-form")
    mat, src, tgt = _jac(J, source, omega.space)
    if tgt is not None and tgt != omega.space:
        raise ValueError(f"form lives on {omega.space}, map lands in {tgt}")
    if mat.shape[0] != omega.space.dim:
        raise ValueError("Jacobian rows do not match the form's dimension")
    out = mat.T @ omega.mat @ mat
    out = 0.5 * (out - out.T)  # exact skew; entries are unchanged up to rounding
    if src is None:
        raise ValueError("source space unknown; pass LinearMapData or source=")
    return SkewTensor(src, TensorKind.TWO_FORM, out)


def pushforward_bivector(J, lam: SkewTensor, target: SpaceId | None = None) -> SkewTensor:
    """``J L J^T``, a bivector on the target of ``J``."""
    if lam.kind is not TensorKind.BIVECTOR:
        raise ValueError("pushforward needs a bivector")
    mat, src, tgt = _jac(J, lam.space, target)
    if src is not None and src != lam.space:
        raise ValueError(f"bivector lives on {lam.space}, map starts at {src}")
    if mat.shape[1] != lam.space.dim:
        raise ValueError("Jacobian columns do not match the bivector's dimension")
    out = mat @ lam.mat @ mat.T
    out = 0.5 * (out - out.T)
    if tgt is None:
        raise ValueError("target space unknown; pass LinearMapData or target=")
    return SkewTensor(tgt, TensorKind.BIVECTOR, out)


def _matrix(S) -> np.ndarray:
    return np.asarray(S.mat if isinstance(S, SkewTensor) else S, dtype=float)


def _threshold(s: np.ndarray, tol: float) -> float:
    top = float(s[0]) if s.size and s[0] > 0 else 1.0
    return tol * top


def numerical_rank(A, tol: float = RANK_TOL) -> int:
    """Number of singular values above ``tol`` times the largest (or ``tol`` if all vanish)."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > _threshold(s, tol)))


def null_space(A, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the null space of ``A`` via SVD."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    A = np.asarray(A, dtype=float)
    cols = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(A)
    r = int(np.sum(s > _threshold(s, tol)))
    return vt[r:].T.copy()


def orth(A, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the column span of ``A``."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros((A.shape[0], 0))
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > _threshold(s, tol)))
    return u[:, :r].copy()


def kernel_basis(S, tol: float = RANK_TOL) -> list[np.ndarray]:
    """Orthonormal basis of ``{v : S(v, -) = 0}``."""
    return list(null_space(_matrix(S), tol).T)


def skew_rank(S, tol: float = RANK_TOL) -> int:
    r = numerical_rank(_matrix(S), tol)
    if r % 2:
        raise ArithmeticError(f"skew matrix reported odd rank {r}; tolerance {tol} is unsuitable")
    return r


def intersection_dim(U, V, tol: float = RANK_TOL) -> int:
    """``dim(span U  cap  span V)`` from ranks of the column spans."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    ru = numerical_rank(U, tol) if U.size else 0
    rv = numerical_rank(V, tol) if V.size else 0
    if ru == 0 or rv == 0:
        return 0
    return ru + rv - numerical_rank(np.hstack([orth(U, tol), orth(V, tol)]), tol)


def schouten_residual(field: Callable[[np.ndarray], object], x, h: float = 1e-5) -> float:
    """Largest Jacobi cyclic sum of a bivector field at ``x``.

    ``[L, L] = 0`` reads, in coordinates,
    ``L^{il} d_l L^{jk} + L^{jl} d_l L^{ki} + L^{kl} d_l L^{ij} = 0`` for all
    ``i < j < k``. Derivatives are central differences of step ``h``; for
    constant-coefficient fields the differences vanish identically.
    """
    if not h > 0:
        raise ValueError("step must be positive")
    x = as_coords(x)
    d = x.shape[0]
    L0 = _matrix(field(x))
    dL = np.empty((d, d, d))  # dL[l] = d_l L
    for l in range(d):
        e = np.zeros(d)
        e[l] = h
        dL[l] = (_matrix(field(x + e)) - _matrix(field(x - e))) / (2 * h)
    # T[i, j, k] = sum_l L^{il} d_l L^{jk}
    T = np.einsum("il,ljk->ijk", L0, dL)
    worst = 0.0
    for i, j, k in itertools.combinations(range(d), 3):
        c = T[i, j, k] + T[j, k, i] + T[k, i, j]
        worst = max(worst, abs(float(c)))
    return worst
