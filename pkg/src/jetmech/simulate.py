"""Fixed-step RK4 flows and the Lagrangian/Hamiltonian equivalence experiment."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Space, SpaceId, as_coords, space
from .mechanics import (
    HamiltonianSystem,
    LagrangianSystem,
    Trajectory,
    euler_lagrange_field,
    extended_field,
    legendre_extended,
    legendre_restricted,
    reeb_field,
)
from .submanifolds import Membership, membership_residual
from .triples import lifted_dynamics_residual

TIME_TOL = 1e-12


class IntegrationError(RuntimeError):
    """A field evaluation failed; carries the trajectory computed so far."""

    def __init__(self, message: str, trajectory: Trajectory, index: int, cause: BaseException):
        super().__init__(message)
        self.trajectory = trajectory
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class IntegratorConfig:
    t0: float
    t1: float
    step: float
    method: str = "rk4"

    def __post_init__(self):
        for name in ("t0", "t1", "step"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.method != "rk4":
            raise ValueError(f"unknown method {self.method!r}; only 'rk4' is available")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.t1 > self.t0:
            raise ValueError("t1 must exceed t0")
        ratio = (self.t1 - self.t0) / self.step
        if abs(ratio - round(ratio)) > math.ulp(ratio):
            raise ValueError(f"(t1 - t0)/step = {ratio!r} is not an integer")

    @property
    def steps(self) -> int:
        return int(round((self.t1 - self.t0) / self.step))

    def halved(self) -> IntegratorConfig:
        return IntegratorConfig(self.t0, self.t1, self.step / 2, self.method)


Field = Callable[[np.ndarray], np.ndarray]


def integrate(field: Field, x0, cfg: IntegratorConfig, sid: SpaceId | None = None) -> Trajectory:
    """Classic RK4; the time coordinate is pinned to ``t0 + k*step``."""
    if sid is None:
        sid = getattr(x0, "space", None)
        if sid is None:
            raise ValueError("pass a SpacePoint or give the space explicitly")
    x = np.array(as_coords(x0, sid), dtype=float)
    if abs(x[0] - cfg.t0) > TIME_TOL * max(1.0, abs(cfg.t0)):
        raise ValueError(f"initial point has t = {x[0]!r}, expected t0 = {cfg.t0!r}")
    x[0] = cfg.t0
    h = cfg.step
    out = np.empty((cfg.steps + 1, sid.dim))
    out[0] = x
    for k in range(cfg.steps):
        try:
            k1 = np.asarray(field(x), dtype=float)
            k2 = np.asarray(field(x + 0.5 * h * k1), dtype=float)
            k3 = np.asarray(field(x + 0.5 * h * k2), dtype=float)
            k4 = np.asarray(field(x + h * k3), dtype=float)
        except Exception as exc:  # noqa: BLE001 - any field failure aborts the run
            partial = Trajectory(sid, cfg.t0, h, out[: k + 1])
            raise IntegrationError(f"field evaluation failed at step {k} (t = {float(x[0])!r}): {exc}", partial, k, exc) from exc
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = cfg.t0 + (k + 1) * h
        if abs(x[0] - t) > TIME_TOL * max(1.0, abs(t)):
            raise AssertionError(f"time drifted to {float(x[0])!r} at step {k + 1}; the field's dt component must be 1")
        x[0] = t
        if not np.all(np.isfinite(x)):
            partial = Trajectory(sid, cfg.t0, h, out[: k + 1])
            raise IntegrationError(f"non-finite state at step {k + 1}", partial, k + 1, FloatingPointError())
        out[k + 1] = x
    return Trajectory(sid, cfg.t0, h, out)


def lagrangian_flow(sys: LagrangianSystem, j0, cfg: IntegratorConfig) -> Trajectory:
    return integrate(lambda x: euler_lagrange_field(sys, x), j0, cfg, sys.jet_space)


def hamiltonian_flow(sys: HamiltonianSystem, v0, cfg: IntegratorConfig) -> Trajectory:
    return integrate(lambda x: reeb_field(sys, x), v0, cfg, sys.phase_space)


def extended_flow(sys: HamiltonianSystem, a0, cfg: IntegratorConfig) -> Trajectory:
    return integrate(lambda x: extended_field(sys, x), a0, cfg, space(Space.TSTARM, sys.n))


def base_curve(flow: Trajectory) -> Trajectory:
    """The curve in M under a J1PI flow, keeping the velocities as exact rates."""
    n = flow.space.n
    if flow.space != space(Space.J1PI, n):
        raise ValueError("expected a J1PI trajectory")
    return Trajectory(space(Space.M, n), flow.t0, flow.step, flow.samples[:, : 1 + n], flow.samples[:, 1 + n :])


def momentum_curve(sys: LagrangianSystem, flow: Trajectory) -> Trajectory:
    """``leg_L`` applied sample by sample to a J1PI flow."""
    rows = [as_coords(legendre_restricted(sys, x)) for x in flow.samples]
    return Trajectory(space(Space.VSTAR, sys.n), flow.t0, flow.step, np.array(rows))


def five_point_rate(y: np.ndarray, step: float) -> np.ndarray:
    """Fourth-order central difference ``dy/dt`` at nodes ``2 .. N-3``."""
    if y.shape[0] < 5:
        raise ValueError("need at least 5 samples")
    return (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * step)


def energy_law_residual(sys: HamiltonianSystem, flow: Trajectory) -> float:
    """Max of ``|dp0/dt + H_t|`` along an extended flow.

    ``dp0/dt`` comes from the five-point stencil so that the measurement's
    own truncation error stays far below the integrator's.
    """
    n = sys.n
    if flow.space != space(Space.TSTARM, n):
        raise ValueError("expected a TSTARM trajectory")
    dp0 = five_point_rate(flow.samples[:, 1 + n], flow.step)
    worst = 0.0
    for k, a in enumerate(flow.samples[2:-2]):
        Ht = sys.H.grad(np.concatenate([a[: 1 + n], a[2 + n :]]))[1][0]
        worst = max(worst, abs(float(dp0[k]) + float(Ht)))
    return worst


def route_gap(sysL: LagrangianSystem, sysH: HamiltonianSystem, j0, cfg: IntegratorConfig) -> tuple[float, Trajectory, Trajectory]:
    """Sup-norm distance between ``leg_L`` of the EL flow and the Hamilton flow from ``leg_L(j0)``."""
    flow = lagrangian_flow(sysL, j0, cfg)
    ham = hamiltonian_flow(sysH, legendre_restricted(sysL, j0), cfg)
    gap = float(np.max(np.abs(momentum_curve(sysL, flow).samples - ham.samples)))
    return gap, flow, ham


def richardson_ratio(run: Callable[[IntegratorConfig], Trajectory], cfg: IntegratorConfig, coarsen: int = 16) -> float | None:
    """Step-halving convergence ratio, about 16 for a fourth-order method.

    Runs at ``H``, ``H/2`` and ``H/4`` with ``H = coarsen * step`` (the largest
    power of two up to ``coarsen`` that still divides the span) and returns
    ``|x_H - x_{H/2}| / |x_{H/2} - x_{H/4}|`` in sup norm over the coarse
    nodes. Coarsening keeps both differences well above roundoff. Returns
    ``None`` when the finer difference is at roundoff level, i.e. the
    flow is integrated exactly.
    """
    factor = 1
    while factor * 2 <= coarsen and cfg.steps % (factor * 2) == 0:
        factor *= 2
    coarse = IntegratorConfig(cfg.t0, cfg.t1, cfg.step * factor, cfg.method)
    runs = [run(coarse), run(coarse.halved()), run(coarse.halved().halved())]
    x0, x1, x2 = runs[0].samples, runs[1].samples[::2], runs[2].samples[::4]
    d1 = float(np.max(np.abs(x0 - x1)))
    d2 = float(np.max(np.abs(x1 - x2)))
    # accumulated rounding over the finest run bounds what a difference can resolve
    floor = len(runs[2].samples) * np.finfo(float).eps * max(1.0, float(np.max(np.abs(x2))))
    if d2 <= floor:
        return None
    return d1 / d2


def lifted_membership(sysL: LagrangianSystem, sysH: HamiltonianSystem, flow: Trajectory) -> tuple[float, float]:
    """Max S_L and S_H residuals of ``(t, q, p, v, pdot)`` along ``leg_L`` of an EL flow.

    ``pdot`` is the central divided difference of the momenta, so only
    interior nodes are scored.
    """
    n = sysL.n
    mom = momentum_curve(sysL, flow).samples
    if len(mom) < 3:
        raise ValueError("need at least 3 samples")
    pdot = (mom[2:, 1 + n :] - mom[:-2, 1 + n :]) / (2.0 * flow.step)
    sl = sh = 0.0
    for k in range(1, len(mom) - 1):
        z = np.concatenate([mom[k], flow.samples[k, 1 + n :], pdot[k - 1]])
        sl = max(sl, float(np.max(np.abs(membership_residual(Membership.S_L, sysL, None, z)))))
        sh = max(sh, float(np.max(np.abs(membership_residual(Membership.S_H, None, sysH, z)))))
    return sl, sh


def equivalence_report(sysL: LagrangianSystem, cfg: IntegratorConfig, j0) -> dict:
    """Run both routes and collect the residuals that tie them together.

    The order estimate is the Richardson ratio of the Lagrangian route.
    """
    n = sysL.n
    sysH = HamiltonianSystem.from_lagrangian(sysL)
    gap, flow, ham = route_gap(sysL, sysH, j0, cfg)

    sl, sh = lifted_membership(sysL, sysH, flow)
    lemma = max(lifted_dynamics_residual(sysL, x) for x in flow.samples)

    ext = extended_flow(sysH, legendre_extended(sysL, j0), cfg)
    energy = energy_law_residual(sysH, ext)
    ratio = richardson_ratio(lambda c: lagrangian_flow(sysL, j0, c), cfg)
    return {
        "scenario": sysL.name,
        "t0": cfg.t0,
        "t1": cfg.t1,
        "step": cfg.step,
        "sup_gap": gap,
        "max_SL_residual": sl,
        "max_SH_residual": sh,
        "lemma_l1_max": lemma,
        "ec2_residual_max": energy,
        "order_estimate": ratio,
    }
