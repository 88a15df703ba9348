"""Pointwise Lagrangian-submanifold tests and membership residuals.

A submanifold is handed over as a :class:`ParamImmersion`: a parametrization
together with its exact Jacobian. The Poisson test builds the preimage of the
tangent space under ``sharp`` by solving ``[sharp | -J] (alpha; c) = 0``; the
presymplectic test pulls the form back and checks the dimension count
``param_dim = rank(w)/2 + dim(TC & ker w)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import (
    RANK_TOL,
    SkewTensor,
    Space,
    SpaceId,
    SpacePoint,
    TensorKind,
    as_coords,
    intersection_dim,
    null_space,
    numerical_rank,
    orth,
    skew_rank,
    space,
)
from .mechanics import (
    HamiltonianSystem,
    LagrangianSystem,
    NoConvergence,
    SingularLagrangian,
)

VALUE_TOL = 1e-10


class ImmersionError(ValueError):
    """The parametrization is not an immersion at a tested point."""


@dataclass(frozen=True)
class ParamImmersion:
    """``map: R^param_dim -> space`` with its exact Jacobian ``(dim, param_dim)``."""

    space: SpaceId
    param_dim: int
    map: Callable[[np.ndarray], SpacePoint]
    jac: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def jacobian(self, u) -> np.ndarray:
        J = np.asarray(self.jac(np.asarray(u, dtype=float)), dtype=float)
        if J.shape != (self.space.dim, self.param_dim):
            raise ValueError(f"Jacobian must be {self.space.dim}x{self.param_dim}, got {J.shape}")
        if numerical_rank(J) != self.param_dim:
            raise ImmersionError(f"{self.name or 'immersion'} is rank deficient at {list(u)}")
        return J


def _grad(f, x):
    return f.grad(x)[1]


def _hess(f, x):
    return f.jet2(x).hessian


# -- immersions -------------------------------------------------------------


def dl_tilde_immersion(sys: LagrangianSystem) -> ParamImmersion:
    """Image of ``(t, q, v) -> (t, q, v, L_q, L_v)`` in QUOT_TSTAR_J1PI."""
    n = sys.n
    sid = space(Space.QUOT_TSTAR_J1PI, n)

    def f(u):
        return SpacePoint(sid, np.concatenate([u, _grad(sys.L, u)[1:]]))

    def jac(u):
        return np.vstack([np.eye(1 + 2 * n), _hess(sys.L, u)[1:]])

    return ParamImmersion(sid, 1 + 2 * n, f, jac, "dl_tilde")


def dh_tilde_immersion(sys: HamiltonianSystem) -> ParamImmersion:
    """Image of ``(t, q, p) -> (t, q, p, H_q, H_p)`` in PMU_QUOT."""
    n = sys.n
    sid = space(Space.PMU_QUOT, n)

    def f(u):
        return SpacePoint(sid, np.concatenate([u, _grad(sys.H, u)[1:]]))

    def jac(u):
        return np.vstack([np.eye(1 + 2 * n), _hess(sys.H, u)[1:]])

    return ParamImmersion(sid, 1 + 2 * n, f, jac, "dh_tilde")


def _drop_p0(u, n):
    return np.concatenate([u[: 1 + n], u[2 + n :]])


def _insert_zero_column(M, n):
    """Columns over (t, q, p) -> columns over (t, q, p0, p)."""
    return np.hstack([M[:, : 1 + n], np.zeros((M.shape[0], 1)), M[:, 1 + n :]])


def dfh_immersion(sys: HamiltonianSystem) -> ParamImmersion:
    """Image of ``(t, q, p0, p) -> (t, q, p0, p, H_t, H_q, H_p)`` in VHAT1."""
    n = sys.n
    sid = space(Space.VHAT1, n)

    def f(u):
        return SpacePoint(sid, np.concatenate([u, _grad(sys.H, _drop_p0(u, n))]))

    def jac(u):
        return np.vstack([np.eye(2 + 2 * n), _insert_zero_column(_hess(sys.H, _drop_p0(u, n)), n)])

    return ParamImmersion(sid, 2 + 2 * n, f, jac, "dfh")


def s_l_immersion(sys: LagrangianSystem) -> ParamImmersion:
    """``(t, q, v) -> (t, q, L_v, v, L_q)`` in J1PI1STAR."""
    n = sys.n
    sid = space(Space.J1PI1STAR, n)
    q, v = slice(1, 1 + n), slice(1 + n, 1 + 2 * n)

    def f(u):
        g = _grad(sys.L, u)
        return SpacePoint(sid, np.concatenate([u[: 1 + n], g[v], u[v], g[q]]))

    def jac(u):
        H = _hess(sys.L, u)
        eye = np.eye(1 + 2 * n)
        return np.vstack([eye[: 1 + n], H[v], eye[v], H[q]])

    return ParamImmersion(sid, 1 + 2 * n, f, jac, "S_L")


def s_h_immersion(sys: HamiltonianSystem) -> ParamImmersion:
    """The graph of the Reeb field: ``(t, q, p) -> (t, q, p, H_p, -H_q)``."""
    n = sys.n
    sid = space(Space.J1PI1STAR, n)
    q, p = slice(1, 1 + n), slice(1 + n, 1 + 2 * n)

    def f(u):
        g = _grad(sys.H, u)
        return SpacePoint(sid, np.concatenate([u, g[p], -g[q]]))

    def jac(u):
        H = _hess(sys.H, u)
        return np.vstack([np.eye(1 + 2 * n), H[p], -H[q]])

    return ParamImmersion(sid, 1 + 2 * n, f, jac, "S_H")


def s_l_tilde_immersion(sys: LagrangianSystem) -> ParamImmersion:
    """``(t, q, p0, v) -> (t, q, p0, L_v, v, L_t, L_q)`` in J1TILDE."""
    n = sys.n
    sid = space(Space.J1TILDE, n)
    q, v = slice(1, 1 + n), slice(1 + n, 1 + 2 * n)

    def f(u):
        x = _drop_p0(u, n)
        g = _grad(sys.L, x)
        return SpacePoint(sid, np.concatenate([u[: 2 + n], g[v], x[v], g[:1], g[q]]))

    def jac(u):
        H = _insert_zero_column(_hess(sys.L, _drop_p0(u, n)), n)
        eye = np.eye(2 + 2 * n)
        return np.vstack([eye[: 2 + n], H[v], eye[2 + n :], H[:1], H[q]])

    return ParamImmersion(sid, 2 + 2 * n, f, jac, "S_L_tilde")


def s_h_tilde_immersion(sys: HamiltonianSystem) -> ParamImmersion:
    """``(t, q, p0, p) -> (t, q, p0, p, H_p, -H_t, -H_q)`` in J1TILDE."""
    n = sys.n
    sid = space(Space.J1TILDE, n)
    q, p = slice(1, 1 + n), slice(1 + n, 1 + 2 * n)

    def f(u):
        g = _grad(sys.H, _drop_p0(u, n))
        return SpacePoint(sid, np.concatenate([u, g[p], -g[:1], -g[q]]))

    def jac(u):
        H = _insert_zero_column(_hess(sys.H, _drop_p0(u, n)), n)
        return np.vstack([np.eye(2 + 2 * n), H[p], -H[:1], -H[q]])

    return ParamImmersion(sid, 2 + 2 * n, f, jac, "S_H_tilde")


def velocity_form_immersion(n: int) -> ParamImmersion:
    """The section ``p_q = v, p_v = 0`` of QUOT_TSTAR_J1PI; its 1-form ``v dq`` is not closed."""
    sid = space(Space.QUOT_TSTAR_J1PI, n)

    def f(u):
        return SpacePoint(sid, np.concatenate([u, u[1 + n :], np.zeros(n)]))

    def jac(u):
        eye = np.eye(1 + 2 * n)
        return np.vstack([eye, eye[1 + n :], np.zeros((n, 1 + 2 * n))])

    return ParamImmersion(sid, 1 + 2 * n, f, jac, "velocity_form")


def identity_immersion(sid: SpaceId) -> ParamImmersion:
    return ParamImmersion(sid, sid.dim, lambda u: SpacePoint(sid, u), lambda u: np.eye(sid.dim), "identity")


# -- the two Lagrangian tests -----------------------------------------------


def _params(params) -> list[np.ndarray]:
    out = [np.asarray(u, dtype=float).reshape(-1) for u in params]
    if not out:
        raise ValueError("no parameter values to test")
    return out


def sharp_preimage(lam: SkewTensor, J: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of ``{alpha : sharp(alpha) in span J}``."""
    d = lam.space.dim
    system = np.hstack([lam.mat.T, -J])
    N = null_space(system, rank_tol)
    if N.shape[1] == 0:
        return np.zeros((d, 0))
    return orth(N[:d], rank_tol)


def poisson_lagrangian_check(
    C: ParamImmersion,
    lam: SkewTensor,
    params: Sequence,
    tol: float = VALUE_TOL,
    rank_tol: float = RANK_TOL,
) -> dict:
    """Bracket-vanishing and half-rank intersection test at each parameter value."""
    if lam.kind is not TensorKind.BIVECTOR:
        raise ValueError("Poisson test needs a bivector")
    if lam.space != C.space:
        raise ValueError(f"bivector lives on {lam.space}, submanifold in {C.space}")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    half = skew_rank(lam, rank_tol) // 2
    image = lam.mat.T  # columns span the image of sharp
    worst, dims, ok = 0.0, [], []
    for u in _params(params):
        J = C.jacobian(u)
        P = sharp_preimage(lam, J, rank_tol)
        bracket = float(np.max(np.abs(P.T @ lam.mat @ P), initial=0.0))
        k = intersection_dim(J, image, rank_tol)
        worst = max(worst, bracket)
        dims.append(k)
        ok.append(bracket <= tol and k == half)
    return {
        "object": C.name,
        "points_tested": len(dims),
        "max_bracket_violation": worst,
        "intersection_dims": dims,
        "half_rank": half,
        "pass": all(ok),
    }


def presymplectic_lagrangian_check(
    C: ParamImmersion,
    omega: SkewTensor,
    params: Sequence,
    tol: float = VALUE_TOL,
    rank_tol: float = RANK_TOL,
) -> dict:
    """Isotropy ``i*w = 0`` and the count ``dim C = rank(w)/2 + dim(TC & ker w)``."""
    if omega.kind is not TensorKind.TWO_FORM:
        raise ValueError("presymplectic test needs a 2-form")
    if omega.space != C.space:
        raise ValueError(f"form lives on {omega.space}, submanifold in {C.space}")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    half = skew_rank(omega, rank_tol) // 2
    kernel = null_space(omega.mat, rank_tol)
    worst, dims, ok = 0.0, [], []
    for u in _params(params):
        J = C.jacobian(u)
        pulled = float(np.max(np.abs(J.T @ omega.mat @ J), initial=0.0))
        k = intersection_dim(J, kernel, rank_tol) if kernel.shape[1] else 0
        worst = max(worst, pulled)
        dims.append(k)
        ok.append(pulled <= tol and C.param_dim == half + k)
    return {
        "object": C.name,
        "points_tested": len(dims),
        "max_pullback": worst,
        "kernel_intersection_dims": dims,
        "half_rank": half,
        "param_dim": C.param_dim,
        "pass": all(ok),
    }


# -- membership -------------------------------------------------------------


class Membership(enum.Enum):
    S_L = "S_L"
    S_H = "S_H"
    S_L_TILDE = "S_L_TILDE"
    S_H_TILDE = "S_H_TILDE"


def membership_residual(
    which: Membership | str,
    sysL: LagrangianSystem | None = None,
    sysH: HamiltonianSystem | None = None,
    z=None,
) -> np.ndarray:
    """Residuals of the defining equations; zero exactly on the submanifold.

    S_L, S_H take ``(t, q, p, v, pdot)`` in J1PI1STAR; the extended variants take
    ``(t, q, p0, p, v, p0dot, pdot)`` in J1TILDE.
    """
    which = Membership(which)
    lagrangian = which in (Membership.S_L, Membership.S_L_TILDE)
    sys = sysL if lagrangian else sysH
    if sys is None:
        raise ValueError(f"{which.value} needs a {'Lagrangian' if lagrangian else 'Hamiltonian'} system")
    n = sys.n
    extended = which in (Membership.S_L_TILDE, Membership.S_H_TILDE)
    sid = space(Space.J1TILDE if extended else Space.J1PI1STAR, n)
    x = as_coords(z, sid)
    t, q = x[:1], x[1 : 1 + n]
    p = x[sid.slot("p")]
    v = x[sid.slot("v")]
    pdot = x[sid.slot("pdot")]
    if lagrangian:
        g = sys.L.grad(np.concatenate([t, q, v]))[1]
        out = [p - g[1 + n :], pdot - g[1 : 1 + n]]
        if extended:
            out.append([x[sid.slot("p0dot")] - g[0]])
    else:
        g = sys.H.grad(np.concatenate([t, q, p]))[1]
        out = [v - g[1 + n :], pdot + g[1 : 1 + n]]
        if extended:
            out.append([x[sid.slot("p0dot")] + g[0]])
    return np.concatenate(out)


def _max_residual(which, sysL, sysH, C: ParamImmersion, points: np.ndarray) -> tuple[float, int, int]:
    worst, tested, skipped = 0.0, 0, 0
    for u in points:
        try:
            z = C.map(u)
            r = membership_residual(which, sysL, sysH, z)
        except (SingularLagrangian, NoConvergence):
            skipped += 1
            continue
        worst = max(worst, float(np.max(np.abs(r))))
        tested += 1
    return worst, tested, skipped


def equality_check(
    sysL: LagrangianSystem,
    variant: str = "restricted",
    samples: int = 100,
    seed: int = 0,
    tol: float = VALUE_TOL,
) -> dict:
    """Cross-membership of the Lagrangian and the Legendre-induced Hamiltonian submanifolds."""
    if variant not in ("restricted", "extended"):
        raise ValueError("variant must be 'restricted' or 'extended'")
    if samples < 1:
        raise ValueError("samples must be at least 1")
    sysH = HamiltonianSystem.from_lagrangian(sysL)
    n = sysL.n
    if variant == "restricted":
        CL, CH = s_l_immersion(sysL), s_h_immersion(sysH)
        mL, mH = Membership.S_L, Membership.S_H
        pdim = 1 + 2 * n
    else:
        CL, CH = s_l_tilde_immersion(sysL), s_h_tilde_immersion(sysH)
        mL, mH = Membership.S_L_TILDE, Membership.S_H_TILDE
        pdim = 2 + 2 * n
    rng = np.random.default_rng(seed)
    uL = rng.uniform(-2.0, 2.0, size=(samples, pdim))
    uH = rng.uniform(-2.0, 2.0, size=(samples, pdim))
    l_in_h, t1, s1 = _max_residual(mH, sysL, sysH, CL, uL)
    h_in_l, t2, s2 = _max_residual(mL, sysL, sysH, CH, uH)
    worst = max(l_in_h, h_in_l)
    return {
        "object": f"{mL.value}={mH.value}",
        "scenario": sysL.name,
        "n": n,
        "variant": variant,
        "samples": samples,
        "seed": seed,
        "points_tested": t1 + t2,
        "points_skipped": s1 + s2,
        "max_lagrangian_in_hamiltonian": l_in_h,
        "max_hamiltonian_in_lagrangian": h_in_l,
        "max_residual": worst,
        "pass": worst <= tol and t1 + t2 > 0,
    }

