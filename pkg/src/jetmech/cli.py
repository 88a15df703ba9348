"""Command-line interface: simulate, verify, legendre, check-submanifold.

Exit codes: 0 success, 1 a check or an integration failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import submanifolds as sm
from . import triples as tr
from .geometry import (
    RANK_TOL,
    Space,
    SpacePoint,
    kernel_basis,
    schouten_residual,
    skew_rank,
    space,
)
from .mechanics import (
    HamiltonianSystem,
    NoConvergence,
    SingularLagrangian,
    euler_lagrange_field,
    extended_field,
    legendre_extended,
    legendre_restricted,
    reeb_field,
    regularity,
)
from .scenarios import REGULAR_NAMES, Scenario, ScenarioError, resolve
from .simulate import (
    IntegrationError,
    IntegratorConfig,
    energy_law_residual,
    extended_flow,
    integrate,
    lagrangian_flow,
    lifted_membership,
    richardson_ratio,
    route_gap,
)

SEED_ENV = "JETMECH_SEED"

# value tolerances used when --tol is not given
DEFAULT_TOL = {
    "maps": 1e-12,
    "submanifolds": 1e-12,
    "equality": 1e-10,
    "lemma": 1e-12,
    "dynamics": 1e-6,
}
DYNAMICS_SPAN = (0.0, 1.0, 1e-3)
ORDER_BAND = (8.0, 32.0)


class UsageError(Exception):
    """Bad input detected after argument parsing (exit code 2)."""


# -- output -----------------------------------------------------------------


def _plain(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(report) -> str:
    return json.dumps(_plain(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(report, out: str | None) -> None:
    text = dumps(report)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt(x: float) -> str:
    return "%.17g" % x


def csv_header(route: str, n: int) -> list[str]:
    q = [f"q{i}" for i in range(1, n + 1)]
    if route == "lagrangian":
        return ["t", *q, *[f"v{i}" for i in range(1, n + 1)]]
    p = [f"p{i}" for i in range(1, n + 1)]
    if route == "extended":
        return ["t", *q, "p0", *p]
    return ["t", *q, *p]


def write_csv(path: str, header: list[str], rows: np.ndarray, trailer: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(float(v)) for v in row) + "\n")
        if trailer is not None:
            fh.write(f"# aborted: {trailer}\n")


# -- argument helpers -------------------------------------------------------


def _positive_tol(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (x > 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return x


def _positive_int(text: str) -> int:
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if x < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return x


def _finite(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(x):
        raise argparse.ArgumentTypeError("must be finite")
    return x


def _vector(text: str) -> list[float]:
    parts = [s.strip() for s in text.split(",")]
    try:
        vals = [float(s) for s in parts]
    except ValueError:
        raise UsageError(f"malformed point {text!r}; expected a comma-separated list of numbers") from None
    if not all(math.isfinite(v) for v in vals):
        raise UsageError("point coordinates must be finite")
    return vals


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _scenario(name: str, n: int) -> Scenario:
    try:
        return resolve(name, n)
    except ScenarioError as exc:
        raise UsageError(str(exc)) from None


def _tol(args, key: str) -> float:
    return args.tol if args.tol is not None else DEFAULT_TOL[key]


# -- simulate ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    sc = _scenario(args.scenario, args.n)
    n = sc.n
    try:
        cfg = IntegratorConfig(args.t0, args.t1, args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    width = 2 * n + (1 if args.route == "extended" else 0)
    fiber = [0.0] * width if args.x0 is None else _vector(args.x0)
    if len(fiber) != width:
        raise UsageError(f"--x0 needs {width} coordinates for the {args.route} route, got {len(fiber)}")
    x0 = np.array([cfg.t0, *fiber])
    if args.route == "lagrangian":
        if sc.lagrangian is None:
            raise UsageError(f"{sc.name} has no Lagrangian")
        sid = space(Space.J1PI, n)
        field = lambda x: euler_lagrange_field(sc.lagrangian, x)  # noqa: E731
    else:
        try:
            sysH = sc.hamiltonian_system()
        except ScenarioError as exc:
            raise UsageError(str(exc)) from None
        if args.route == "hamiltonian":
            sid = space(Space.VSTAR, n)
            field = lambda x: reeb_field(sysH, x)  # noqa: E731
        else:
            sid = space(Space.TSTARM, n)
            field = lambda x: extended_field(sysH, x)  # noqa: E731
    header = csv_header(args.route, n)
    try:
        traj = integrate(field, SpacePoint(sid, x0), cfg)
    except IntegrationError as exc:
        write_csv(args.out, header, exc.trajectory.samples, trailer=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_csv(args.out, header, traj.samples)
    return 0


# -- verify -----------------------------------------------------------------


def maps_report(n: int, samples: int, seed: int, tol: float) -> dict:
    entries = [tr.verify_structure_map(m, n, samples, seed, tol) for m in tr.THEOREMS]

    trips = []
    for fwd, inv in ((tr.MapId.A_PI, tr.MapId.A_PI_INV), (tr.MapId.B_PI, tr.MapId.B_PI_INV), (tr.MapId.B_TILDE, tr.MapId.B_TILDE_INV)):
        src, _ = tr.map_spaces(fwd, n)
        worst = 0.0
        for row in tr.sample_points(src, samples, seed):
            back = tr.apply_map(inv, tr.apply_map(fwd, SpacePoint(src, row)))
            worst = max(worst, float(np.max(np.abs(np.asarray(back) - row))))
        trips.append({"map": fwd.value, "inverse": inv.value, "max_error": worst, "pass": worst <= tol})

    kernels = []
    for sid in (tr.StructureId.OMEGA_J1TILDE, tr.StructureId.PHI_VHAT1):
        S = tr.canonical_structure(sid, n)
        basis = kernel_basis(S)
        p0 = S.space.slot("p0")
        ok = len(basis) == 1
        off = 0.0
        if ok:
            v = basis[0] / basis[0][p0]
            off = float(np.max(np.abs(np.delete(v, p0))))
            ok = off <= tol
        rank = skew_rank(S)
        kernels.append({
            "structure": sid.value,
            "kernel_dim": len(basis),
            "off_pattern": off,
            "rank": rank,
            "expected_rank": 2 + 4 * n,
            "pass": ok and rank == 2 + 4 * n,
        })

    schouten = []
    for sid in tr.StructureId:
        S = tr.canonical_structure(sid, n)
        if S.kind.value != "bivector":
            continue
        x = tr.sample_points(S.space, 1, seed)[0]
        r = schouten_residual(lambda _x, m=S.mat: m, x)
        schouten.append({"structure": sid.value, "residual": r, "pass": r <= tol})

    ok = all(e["pass"] for e in entries + trips + kernels + schouten)
    return {
        "suite": "maps",
        "n": n,
        "samples": samples,
        "seed": seed,
        "maps": entries,
        "round_trips": trips,
        "kernels": kernels,
        "schouten": schouten,
        "pass": ok,
    }


def _with(report: dict, **extra) -> dict:
    out = dict(report)
    out.update(extra)
    return out


def submanifold_checks(sc: Scenario, samples: int, seed: int, tol: float) -> list[dict]:
    n = sc.n
    rng = np.random.default_rng(seed)
    u3 = rng.uniform(-2.0, 2.0, size=(samples, 1 + 2 * n))
    u4 = rng.uniform(-2.0, 2.0, size=(samples, 2 + 2 * n))
    out = []
    sysH = sc.hamiltonian_system()
    if sc.lagrangian is not None:
        r = sm.poisson_lagrangian_check(sm.dl_tilde_immersion(sc.lagrangian), tr.canonical_structure("LAMBDA_TILDE_J1PI", n), u3, tol)
        out.append(_with(r, scenario=sc.name, n=n, points_skipped=0, expected_dim=2 * n))
        r = sm.presymplectic_lagrangian_check(sm.s_l_tilde_immersion(sc.lagrangian), tr.canonical_structure("OMEGA_J1TILDE", n), u4, tol)
        out.append(_with(r, scenario=sc.name, n=n, points_skipped=0))
    for check, imm, struct, pts in (
        (sm.poisson_lagrangian_check, sm.dh_tilde_immersion, "LAMBDA_TILDE_PMU", u3),
        (sm.presymplectic_lagrangian_check, sm.dfh_immersion, "PHI_VHAT1", u4),
    ):
        C = imm(sysH)
        good, skipped = [], 0
        for u in pts:
            try:
                C.map(u)
            except (SingularLagrangian, NoConvergence):
                skipped += 1
                continue
            good.append(u)
        r = check(C, tr.canonical_structure(struct, n), good, tol) if good else {"object": C.name, "points_tested": 0, "pass": False}
        out.append(_with(r, scenario=sc.name, n=n, points_skipped=skipped))
    for r in out:
        if "intersection_dims" in r:
            r["pass"] = r["pass"] and all(k == 2 * n for k in r["intersection_dims"])
    return out


def negative_controls(n: int, samples: int, seed: int, tol: float) -> list[dict]:
    """Checks that must fail; ``pass`` records that they did."""
    rng = np.random.default_rng(seed)
    u3 = rng.uniform(-2.0, 2.0, size=(samples, 1 + 2 * n))
    vhat = space(Space.VHAT1, n)
    u7 = rng.uniform(-2.0, 2.0, size=(samples, vhat.dim))
    a = sm.poisson_lagrangian_check(sm.velocity_form_immersion(n), tr.canonical_structure("LAMBDA_TILDE_J1PI", n), u3, tol)
    b = sm.presymplectic_lagrangian_check(sm.identity_immersion(vhat), tr.canonical_structure("PHI_VHAT1", n), u7, tol)
    return [_with(r, expected=False, detected=not r["pass"], **{"pass": not r["pass"]}) for r in (a, b)]


def submanifolds_report(names: list[str], n: int, samples: int, seed: int, tol: float) -> dict:
    checks = []
    for name in names:
        checks.extend(submanifold_checks(_scenario(name, n), samples, seed, tol))
    controls = negative_controls(n, samples, seed, tol)
    return {
        "suite": "submanifolds",
        "n": n,
        "samples": samples,
        "seed": seed,
        "checks": checks,
        "negative_controls": controls,
        "pass": all(c["pass"] for c in checks + controls),
    }


def equivalence_entries(sc: Scenario, samples: int, seed: int, tols: dict) -> dict:
    sysL = sc.lagrangian
    n = sc.n
    eq = [sm.equality_check(sysL, v, samples, seed, tols["equality"]) for v in ("restricted", "extended")]
    pts = tr.sample_points(sysL.jet_space, samples, seed)
    l1 = max(tr.lifted_dynamics_residual(sysL, x) for x in pts)
    l2 = max(tr.lifted_dynamics_residual(sysL, x, extended=True) for x in pts)

    t0, t1, step = DYNAMICS_SPAN
    cfg = IntegratorConfig(t0, t1, step)
    j0 = SpacePoint(sysL.jet_space, np.concatenate([[t0], tr.sample_points(space(Space.M, n), 1, seed)[0][1:], np.ones(n)]))
    sysH = HamiltonianSystem.from_lagrangian(sysL)
    gap, flow, _ = route_gap(sysL, sysH, j0, cfg)
    sl, sh = lifted_membership(sysL, sysH, flow)
    energy = energy_law_residual(sysH, extended_flow(sysH, legendre_extended(sysL, j0), cfg))
    order = richardson_ratio(lambda c: lagrangian_flow(sysL, j0, c), cfg)
    dyn_tol = tols["dynamics"]
    dynamics = {
        "scenario": sc.name,
        "t0": t0,
        "t1": t1,
        "step": step,
        "sup_gap": gap,
        "max_SL_residual": sl,
        "max_SH_residual": sh,
        "lemma_l1_max": max(tr.lifted_dynamics_residual(sysL, x) for x in flow.samples),
        "ec2_residual_max": energy,
        "order_estimate": order,
    }
    order_ok = order is None or ORDER_BAND[0] <= order <= ORDER_BAND[1]
    dynamics["pass"] = bool(max(gap, sl, sh, energy) <= dyn_tol and dynamics["lemma_l1_max"] <= tols["lemma"] and order_ok)
    lemmas = {
        "scenario": sc.name,
        "points": samples,
        "restricted_max": l1,
        "extended_max": l2,
        "pass": max(l1, l2) <= tols["lemma"],
    }
    return {"equality": eq, "lemmas": lemmas, "dynamics": dynamics}


def equivalence_report(names: list[str], n: int, samples: int, seed: int, tols: dict) -> dict:
    per = {}
    for name in names:
        sc = _scenario(name, n)
        if sc.lagrangian is None:
            raise UsageError(f"{name} has no Lagrangian; the equivalence suite needs one")
        per[name] = equivalence_entries(sc, samples, seed, tols)
    ok = all(
        all(e["pass"] for e in v["equality"]) and v["lemmas"]["pass"] and v["dynamics"]["pass"]
        for v in per.values()
    )
    return {"suite": "equivalence", "n": n, "samples": samples, "seed": seed, "scenarios": per, "pass": ok}


def cmd_verify(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    names = args.scenario or list(REGULAR_NAMES)
    for name in names:
        _scenario(name, args.n)  # fail fast on unknown names
    tols = {k: _tol(args, k) for k in DEFAULT_TOL}
    parts = {}
    if args.suite in ("maps", "all"):
        parts["maps"] = maps_report(args.n, args.samples, seed, tols["maps"])
    if args.suite in ("submanifolds", "all"):
        parts["submanifolds"] = submanifolds_report(names, args.n, args.samples, seed, tols["submanifolds"])
    if args.suite in ("equivalence", "all"):
        parts["equivalence"] = equivalence_report(names, args.n, args.samples, seed, tols)
    if args.suite == "all":
        report = {"suite": "all", "seed": seed, **parts, "pass": all(p["pass"] for p in parts.values())}
    else:
        report = parts[args.suite]
    _emit(report, args.out)
    return 0 if report["pass"] else 1


# -- legendre ---------------------------------------------------------------


def cmd_legendre(args) -> int:
    sc = _scenario(args.scenario, args.n)
    if sc.lagrangian is None:
        raise UsageError(f"{sc.name} has no Lagrangian")
    pt = _vector(args.point)
    sid = sc.lagrangian.jet_space
    if len(pt) != sid.dim:
        raise UsageError(f"point needs {sid.dim} coordinates (t, q, v) for n = {sc.n}, got {len(pt)}")
    j = SpacePoint(sid, np.array(pt))
    W, ok, cond = regularity(sc.lagrangian, j, RANK_TOL)
    report = {
        "restricted": np.asarray(legendre_restricted(sc.lagrangian, j)),
        "extended": np.asarray(legendre_extended(sc.lagrangian, j)),
        "regular": ok,
        "condition": cond,
        "velocity_hessian": W,
    }
    _emit(report, None)
    return 0


# -- check-submanifold ------------------------------------------------------

OBJECTS = ("dl_tilde", "dh_tilde", "dfh", "s_l", "s_h", "s_l_tilde", "s_h_tilde", "velocity_form")


def cmd_check_submanifold(args) -> int:
    sc = _scenario(args.scenario, args.n)
    n = sc.n
    seed = _default_seed() if args.seed is None else args.seed
    tol = _tol(args, "submanifolds")
    obj = args.object
    needs_l = obj in ("dl_tilde", "s_l", "s_l_tilde")
    if needs_l and sc.lagrangian is None:
        raise UsageError(f"{sc.name} has no Lagrangian")
    builders = {
        "dl_tilde": (lambda: sm.dl_tilde_immersion(sc.lagrangian), "LAMBDA_TILDE_J1PI", "poisson"),
        "velocity_form": (lambda: sm.velocity_form_immersion(n), "LAMBDA_TILDE_J1PI", "poisson"),
        "dh_tilde": (lambda: sm.dh_tilde_immersion(sc.hamiltonian_system()), "LAMBDA_TILDE_PMU", "poisson"),
        "s_l": (lambda: sm.s_l_immersion(sc.lagrangian), "LAMBDA_J1PI1STAR", "poisson"),
        "s_h": (lambda: sm.s_h_immersion(sc.hamiltonian_system()), "LAMBDA_J1PI1STAR", "poisson"),
        "dfh": (lambda: sm.dfh_immersion(sc.hamiltonian_system()), "PHI_VHAT1", "presymplectic"),
        "s_l_tilde": (lambda: sm.s_l_tilde_immersion(sc.lagrangian), "OMEGA_J1TILDE", "presymplectic"),
        "s_h_tilde": (lambda: sm.s_h_tilde_immersion(sc.hamiltonian_system()), "OMEGA_J1TILDE", "presymplectic"),
    }
    make, struct, kind = builders[obj]
    C = make()
    rng = np.random.default_rng(seed)
    pts, skipped = [], 0
    for u in rng.uniform(-2.0, 2.0, size=(args.samples, C.param_dim)):
        try:
            C.map(u)
            C.jacobian(u)
        except (SingularLagrangian, NoConvergence):
            skipped += 1
            continue
        pts.append(u)
    if not pts:
        report = {"object": obj, "scenario": sc.name, "n": n, "points_tested": 0, "points_skipped": skipped, "pass": False}
    else:
        check = sm.poisson_lagrangian_check if kind == "poisson" else sm.presymplectic_lagrangian_check
        report = _with(check(C, tr.canonical_structure(struct, n), pts, tol), object=obj, scenario=sc.name, n=n, points_skipped=skipped)
    _emit(report, args.out)
    return 0 if report["pass"] else 1


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jetmech", description="Tulczyjew triples for time-dependent mechanics.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate a scenario and write a trajectory CSV")
    s.add_argument("--scenario", required=True, help="built-in name or scenario JSON file")
    s.add_argument("--n", type=_positive_int, default=1, help="fiber dimension for built-ins")
    s.add_argument("--route", choices=("lagrangian", "hamiltonian", "extended"), default="lagrangian")
    s.add_argument("--t0", type=_finite, default=0.0)
    s.add_argument("--t1", type=_finite, required=True)
    s.add_argument("--step", type=_finite, required=True)
    s.add_argument("--x0", help="initial non-time coordinates, comma separated (default zeros)")
    s.add_argument("--out", required=True, help="CSV output path")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run verification suites and write a JSON report")
    v.add_argument("--suite", choices=("maps", "submanifolds", "equivalence", "all"), default="all")
    v.add_argument("--n", type=_positive_int, default=1)
    v.add_argument("--samples", type=_positive_int, default=100)
    v.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    v.add_argument("--tol", type=_positive_tol, default=None, help="override every value tolerance")
    v.add_argument("--scenario", action="append", help="restrict to these scenarios (repeatable)")
    v.add_argument("--out", help="write the report here instead of standard output")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("legendre", help="print Legendre images and regularity at a point")
    g.add_argument("--scenario", required=True)
    g.add_argument("--n", type=_positive_int, default=1)
    g.add_argument("--point", required=True, help="t,q1..qn,v1..vn")
    g.set_defaults(func=cmd_legendre)

    c = sub.add_parser("check-submanifold", help="pointwise Lagrangian-submanifold test")
    c.add_argument("--scenario", required=True)
    c.add_argument("--object", choices=OBJECTS, default="dl_tilde")
    c.add_argument("--n", type=_positive_int, default=1)
    c.add_argument("--samples", type=_positive_int, default=50)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--tol", type=_positive_tol, default=None)
    c.add_argument("--out")
    c.set_defaults(func=cmd_check_submanifold)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
