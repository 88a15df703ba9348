"""Time-dependent Lagrangian and Hamiltonian dynamics in jet coordinates.

Coordinates: a Lagrangian ``L(t, q, v)`` lives on J1PI = (t, q, v) and a
Hamiltonian ``H(t, q, p)`` on VSTAR = (t, q, p); TSTARM = (t, q, p0, p) is the
extended phase space with ``p0`` conjugate to ``t``. The Hamiltonian section
is ``(t, q, p) -> (t, q, -H, p)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy.integrate import simpson

from .derivatives import Jet2, ScalarField
from .geometry import (
    RANK_TOL,
    Space,
    SpaceId,
    SpacePoint,
    SkewTensor,
    TensorKind,
    as_coords,
    space,
)

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50


class SingularLagrangian(ArithmeticError):
    """The velocity Hessian of L is singular at the requested point."""


class NoConvergence(ArithmeticError):
    """Newton inversion of the Legendre map did not converge."""


@dataclass(frozen=True)
class LagrangianSystem:
    n: int
    L: ScalarField
    name: str = ""
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.L.arity != 1 + 2 * self.n:
            raise ValueError(f"L must take 1+2n = {1 + 2 * self.n} arguments, takes {self.L.arity}")

    @property
    def jet_space(self) -> SpaceId:
        return space(Space.J1PI, self.n)


@dataclass(frozen=True)
class HamiltonianSystem:
    n: int
    H: ScalarField
    name: str = ""
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.H.arity != 1 + 2 * self.n:
            raise ValueError(f"H must take 1+2n = {1 + 2 * self.n} arguments, takes {self.H.arity}")

    @property
    def phase_space(self) -> SpaceId:
        return space(Space.VSTAR, self.n)

    @classmethod
    def from_lagrangian(cls, sys: LagrangianSystem) -> HamiltonianSystem:
        """The Hamiltonian induced by a hyperregular Lagrangian."""
        return cls(sys.n, LegendreHamiltonian(sys), name=sys.name, params=dict(sys.params))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled curve ``t_k = t0 + k*step`` in a named space.

    ``rates`` optionally holds exact time derivatives of every non-time
    coordinate (shape ``(N, dim-1)``); without it the jet prolongation is
    taken by central divided differences (second-order one-sided at the ends).
    """

    space: SpaceId
    t0: float
    step: float
    samples: np.ndarray
    rates: np.ndarray | None = None

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[0] == 0 or s.shape[1] != self.space.dim:
            raise ValueError(f"samples must be a nonempty (N, {self.space.dim}) array")
        if not self.step > 0:
            raise ValueError("step must be positive")
        expected = self.t0 + self.step * np.arange(s.shape[0])
        if not np.allclose(s[:, 0], expected, rtol=0.0, atol=1e-9 * max(1.0, float(np.max(np.abs(expected))))):
            raise ValueError("time coordinates are not on the grid t0 + k*step")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.rates is not None:
            r = np.array(self.rates, dtype=float)
            if r.shape != (s.shape[0], s.shape[1] - 1):
                raise ValueError("rates must have shape (N, dim-1)")
            r.setflags(write=False)
            object.__setattr__(self, "rates", r)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.samples[:, 0]

    @cached_property
    def derivative(self) -> np.ndarray:
        """Time derivative of the non-time coordinates at every sample."""
        if self.rates is not None:
            return self.rates
        if len(self) < 3:
            raise ValueError("need at least 3 samples for divided differences")
        return np.gradient(self.samples[:, 1:], self.step, axis=0, edge_order=2)

    @classmethod
    def from_function(cls, sid: SpaceId, fn, t0: float, t1: float, step: float, rate=None) -> Trajectory:
        """Sample ``fn(t) -> fiber coordinates`` on the grid (test/oracle helper)."""
        count = int(round((t1 - t0) / step)) + 1
        ts = t0 + step * np.arange(count)
        rows = [np.concatenate([[t], np.atleast_1d(fn(t))]) for t in ts]
        rates = None if rate is None else np.array([np.atleast_1d(rate(t)) for t in ts])
        return cls(sid, t0, step, np.array(rows), rates)


def _split(n: int, x: np.ndarray):
    return x[0], x[1 : 1 + n], x[1 + n : 1 + 2 * n]


# -- Legendre transforms ----------------------------------------------------


def legendre_restricted(sys: LagrangianSystem, j) -> SpacePoint:
    """``(t, q, v) -> (t, q, dL/dv)``."""
    x = as_coords(j, sys.jet_space)
    _, g = sys.L.grad(x)
    n = sys.n
    return SpacePoint(space(Space.VSTAR, n), np.concatenate([x[: 1 + n], g[1 + n :]]))


def legendre_extended(sys: LagrangianSystem, j) -> SpacePoint:
    """``(t, q, v) -> (t, q, L - v.dL/dv, dL/dv)``; the third slot is E_L."""
    x = as_coords(j, sys.jet_space)
    val, g = sys.L.grad(x)
    n = sys.n
    v = x[1 + n :]
    pv = g[1 + n :]
    energy = val - float(v @ pv)
    return SpacePoint(space(Space.TSTARM, n), np.concatenate([x[: 1 + n], [energy], pv]))


class RestrictedLegendre:
    """The map ``leg_L`` with its exact Jacobian (built from the Hessian of L)."""

    def __init__(self, sys: LagrangianSystem):
        self.sys = sys
        self.source = sys.jet_space
        self.target = space(Space.VSTAR, sys.n)

    def __call__(self, j) -> SpacePoint:
        return legendre_restricted(self.sys, j)

    def jacobian(self, j) -> np.ndarray:
        n = self.sys.n
        jet = self.sys.L.jet2(as_coords(j, self.source))
        J = np.zeros((1 + 2 * n, 1 + 2 * n))
        J[: 1 + n, : 1 + n] = np.eye(1 + n)
        J[1 + n :, :] = jet.hessian[1 + n :, :]
        return J


class ExtendedLegendre:
    """The map ``Leg_L`` with its exact Jacobian."""

    def __init__(self, sys: LagrangianSystem):
        self.sys = sys
        self.source = sys.jet_space
        self.target = space(Space.TSTARM, sys.n)

    def __call__(self, j) -> SpacePoint:
        return legendre_extended(self.sys, j)

    def jacobian(self, j) -> np.ndarray:
        n = self.sys.n
        x = as_coords(j, self.source)
        jet = self.sys.L.jet2(x)
        v = x[1 + n :]
        Hv = jet.hessian[1 + n :, :]  # rows d(dL/dv)
        J = np.zeros((2 + 2 * n, 1 + 2 * n))
        J[: 1 + n, : 1 + n] = np.eye(1 + n)
        # d(L - v.dL/dv) = dL - (dL/dv).dv - v.d(dL/dv)
        row = jet.gradient.copy()
        row[1 + n :] -= jet.gradient[1 + n :]
        J[1 + n, :] = row - v @ Hv
        J[2 + n :, :] = Hv
        return J


def velocity_hessian(jet: Jet2, n: int) -> np.ndarray:
    return jet.hessian[1 + n :, 1 + n :]


def _is_regular(W: np.ndarray, tol: float) -> tuple[bool, float]:
    if W.shape == (1, 1):
        smax = smin = abs(float(W[0, 0]))
    else:
        s = np.linalg.svd(W, compute_uv=False)
        smax, smin = float(s[0]), float(s[-1])
    cond = float("inf") if smin == 0.0 else smax / smin
    return smin > tol * max(1.0, smax), cond


def regularity(sys: LagrangianSystem, j, tol: float = RANK_TOL) -> tuple[np.ndarray, bool, float]:
    """Velocity Hessian ``W``, whether it is nonsingular, and its condition number."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    jet = sys.L.jet2(as_coords(j, sys.jet_space))
    W = velocity_hessian(jet, sys.n)
    ok, cond = _is_regular(W, tol)
    return W, ok, cond


def _solve_W(W: np.ndarray, rhs: np.ndarray, where) -> np.ndarray:
    ok, _ = _is_regular(W, RANK_TOL)
    if not ok:
        raise SingularLagrangian(f"velocity Hessian is singular at {np.asarray(where, dtype=float).tolist()}")
    if W.shape == (1, 1):
        return rhs / W[0, 0]
    return np.linalg.solve(W, rhs)


def euler_lagrange_field(sys: LagrangianSystem, j) -> np.ndarray:
    """The second-order field ``d/dt + v d/dq + a d/dv`` on J1PI.

    The acceleration solves ``W a = dL/dq - (d2L/dv dq) v - d2L/dv dt``.
    """
    x = as_coords(j, sys.jet_space)
    n = sys.n
    jet = sys.L.jet2(x)
    Hs = jet.hessian
    v = x[1 + n :]
    W = Hs[1 + n :, 1 + n :]
    rhs = jet.gradient[1 : 1 + n] - Hs[1 + n :, 1 : 1 + n] @ v - Hs[1 + n :, 0]
    a = _solve_W(W, rhs, x)
    return np.concatenate([[1.0], v, a])


def _check_interior(traj: Trajectory, k: int) -> None:
    if not 1 <= k <= len(traj) - 2:
        raise IndexError(f"sample {k} is not interior to a trajectory of {len(traj)} samples")


def _momenta(sys: LagrangianSystem, sigma: Trajectory, idx) -> np.ndarray:
    n = sys.n
    vel = sigma.derivative
    out = []
    for i in idx:
        j = np.concatenate([sigma.samples[i], vel[i]])
        out.append(sys.L.grad(j)[1][1 + n :])
    return np.array(out)


def el_residual(sys: LagrangianSystem, sigma: Trajectory, k: int) -> np.ndarray:
    """``d/dt(dL/dv) - dL/dq`` at sample ``k`` of a curve in M.

    Momenta are exact along the (discretely) prolonged curve; their time
    derivative is a central divided difference.
    """
    if sigma.space != space(Space.M, sys.n):
        raise ValueError(f"expected a trajectory in {space(Space.M, sys.n)}")
    _check_interior(sigma, k)
    n = sys.n
    p_prev, p_next = _momenta(sys, sigma, (k - 1, k + 1))
    j = np.concatenate([sigma.samples[k], sigma.derivative[k]])
    dLdq = sys.L.grad(j)[1][1 : 1 + n]
    return (p_next - p_prev) / (2 * sigma.step) - dLdq


def action(sys: LagrangianSystem, sigma: Trajectory) -> float:
    """Composite Simpson quadrature of L along the prolonged curve."""
    if sigma.space != space(Space.M, sys.n):
        raise ValueError(f"expected a trajectory in {space(Space.M, sys.n)}")
    if len(sigma) < 3:
        raise ValueError("action needs at least 3 samples")
    jets = np.hstack([sigma.samples, sigma.derivative])
    values = np.array([sys.L(j) for j in jets])
    return float(simpson(values, dx=sigma.step))


# -- Hamiltonian side -------------------------------------------------------


def reeb_field(sys: HamiltonianSystem, v) -> np.ndarray:
    """``d/dt + H_p d/dq - H_q d/dp``."""
    x = as_coords(v, sys.phase_space)
    n = sys.n
    _, g = sys.H.grad(x)
    return np.concatenate([[1.0], g[1 + n :], -g[1 : 1 + n]])


def omega_h(sys: HamiltonianSystem, v) -> SkewTensor:
    """The 2-form ``dq ^ dp + dH ^ dt`` at ``v``."""
    x = as_coords(v, sys.phase_space)
    n = sys.n
    _, g = sys.H.grad(x)
    d = 1 + 2 * n
    m = np.zeros((d, d))
    for i in range(n):
        m[1 + i, 1 + n + i] = 1.0
        m[1 + n + i, 1 + i] = -1.0
    for a in range(1, d):
        m[a, 0] += g[a]
        m[0, a] -= g[a]
    return SkewTensor(sys.phase_space, TensorKind.TWO_FORM, m)


def fh(sys: HamiltonianSystem, a) -> float:
    """``p0 + H(t, q, p)`` on the extended phase space."""
    x = as_coords(a, space(Space.TSTARM, sys.n))
    n = sys.n
    return float(x[1 + n]) + sys.H(_drop_p0(x, n))


def _drop_p0(x: np.ndarray, n: int) -> np.ndarray:
    return np.concatenate([x[: 1 + n], x[2 + n :]])


def extended_field(sys: HamiltonianSystem, a) -> np.ndarray:
    """Hamiltonian field of ``fh`` on TSTARM: ``(1, H_p, -H_t, -H_q)``."""
    x = as_coords(a, space(Space.TSTARM, sys.n))
    n = sys.n
    _, g = sys.H.grad(_drop_p0(x, n))
    return np.concatenate([[1.0], g[1 + n :], [-g[0]], -g[1 : 1 + n]])


def hamilton_residual(sys: HamiltonianSystem, tau: Trajectory, k: int) -> np.ndarray:
    """``(dq/dt - H_p, dp/dt + H_q)`` at sample ``k`` of a curve in VSTAR."""
    if tau.space != sys.phase_space:
        raise ValueError(f"expected a trajectory in {sys.phase_space}")
    _check_interior(tau, k)
    n = sys.n
    if tau.rates is not None:
        rate = tau.rates[k]
    else:
        rate = (tau.samples[k + 1, 1:] - tau.samples[k - 1, 1:]) / (2 * tau.step)
    _, g = sys.H.grad(tau.samples[k])
    return np.concatenate([rate[:n] - g[1 + n :], rate[n:] + g[1 : 1 + n]])


# -- Legendre inversion -----------------------------------------------------


def _newton_velocity(sys: LagrangianSystem, t, q, p, guess, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    n = sys.n
    v = np.array(p if guess is None else guess, dtype=float).reshape(n)
    scale = max(1.0, float(np.max(np.abs(p)))) if n else 1.0
    head = np.concatenate([[t], q])
    for _ in range(max_iter):
        x = np.concatenate([head, v])
        jet = sys.L.jet2(x)
        r = jet.gradient[1 + n :] - p
        W = jet.hessian[1 + n :, 1 + n :]
        step = _solve_W(W, r, x)  # also rejects a singular W at the accepted iterate
        if float(np.max(np.abs(r))) <= tol * scale:
            return v, jet
        v = v - step
        if not np.all(np.isfinite(v)):
            break
    raise NoConvergence(f"Legendre inversion failed at (t, q, p) = ({t}, {q}, {p})")


def invert_restricted_legendre(sys: LagrangianSystem, v, guess=None) -> SpacePoint:
    """Solve ``dL/dv (t, q, v) = p`` for v by Newton's method (default guess ``v = p``)."""
    n = sys.n
    x = as_coords(v, space(Space.VSTAR, n))
    vel, _ = _newton_velocity(sys, x[0], x[1 : 1 + n], x[1 + n :], guess)
    return SpacePoint(sys.jet_space, np.concatenate([x[: 1 + n], vel]))


def hamiltonian_from_lagrangian(sys: LagrangianSystem, v) -> SpacePoint:
    """``Leg_L(leg_L^{-1}(v))``; its p0 slot is ``-H(v)``."""
    return legendre_extended(sys, invert_restricted_legendre(sys, v))


class LegendreHamiltonian(ScalarField):
    """``H(t, q, p) = p.v - L(t, q, v)`` with ``v`` from Newton inversion.

    Derivatives come from the implicit function theorem applied to
    ``dL/dv = p`` and need only first and second derivatives of L:
    ``H_t = -L_t``, ``H_q = -L_q``, ``H_p = v`` and, with
    ``dv/dp = W^{-1}``, ``dv/dq = -W^{-1} L_vq``, ``dv/dt = -W^{-1} L_vt``,
    the Hessian blocks follow by one more chain rule.
    """

    def __init__(self, sys: LagrangianSystem):
        super().__init__(self._value_fn, 1 + 2 * sys.n, name=f"legendre({sys.name})")
        self.sys = sys

    def _value_fn(self, x):
        raise TypeError("LegendreHamiltonian cannot be evaluated on forward-mode numbers")

    def _solve(self, x):
        n = self.sys.n
        x = self._check(x)
        v, jet = _newton_velocity(self.sys, x[0], x[1 : 1 + n], x[1 + n :], None)
        return x, v, jet

    def __call__(self, x) -> float:
        x, v, jet = self._solve(x)
        p = x[1 + self.sys.n :]
        return float(p @ v) - jet.value

    def grad(self, x):
        x, v, jet = self._solve(x)
        n = self.sys.n
        p = x[1 + n :]
        g = np.concatenate([-jet.gradient[: 1 + n], v])
        return float(p @ v) - jet.value, g

    def jet2(self, x) -> Jet2:
        x, v, jet = self._solve(x)
        n = self.sys.n
        p = x[1 + n :]
        Hs = jet.hessian
        head = slice(0, 1 + n)  # (t, q)
        tail = slice(1 + n, 1 + 2 * n)  # v or p
        Winv = np.linalg.inv(Hs[tail, tail])
        Winv = 0.5 * (Winv + Winv.T)
        B = Hs[tail, head]  # d2L / dv d(t, q)
        dv_head = -Winv @ B
        top = -Hs[head, head] + B.T @ Winv @ B
        out = np.empty((1 + 2 * n, 1 + 2 * n))
        out[head, head] = 0.5 * (top + top.T)
        out[tail, head] = dv_head
        out[head, tail] = dv_head.T
        out[tail, tail] = Winv
        g = np.concatenate([-jet.gradient[: 1 + n], v])
        return Jet2(float(p @ v) - jet.value, g, out)
