"""Structural maps, canonical sections and canonical structures of both triples.

Every structural map is a signed permutation of coordinate blocks, listed in
``_MAPS`` as ``(target block, source block, sign)`` rows. Canonical Poisson
bivectors and 2-forms are listed in ``_STRUCTURES`` as sums of wedges of
coordinate blocks (componentwise for n-vector blocks).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .derivatives import jacobian
from .geometry import (
    LinearMapData,
    SkewTensor,
    Space,
    SpaceId,
    SpacePoint,
    TensorKind,
    as_coords,
    pullback_two_form,
    pushforward_bivector,
    space,
)
from .mechanics import (
    ExtendedLegendre,
    HamiltonianSystem,
    LagrangianSystem,
    RestrictedLegendre,
    euler_lagrange_field,
    legendre_extended,
    legendre_restricted,
)


class StructureId(enum.Enum):
    LAMBDA_VSTAR = "LAMBDA_VSTAR"
    LAMBDA_VSTAR_COMPLETE = "LAMBDA_VSTAR_COMPLETE"
    LAMBDA_J1PI1STAR = "LAMBDA_J1PI1STAR"
    LAMBDA_TILDE_J1PI = "LAMBDA_TILDE_J1PI"
    LAMBDA_TILDE_PMU = "LAMBDA_TILDE_PMU"
    OMEGA_J1PI = "OMEGA_J1PI"
    OMEGA_PMU = "OMEGA_PMU"
    OMEGA_J1TILDE = "OMEGA_J1TILDE"
    PHI_VHAT1 = "PHI_VHAT1"
    OMEGA_TSTARM = "OMEGA_TSTARM"


_B, _F = TensorKind.BIVECTOR, TensorKind.TWO_FORM

_STRUCTURES: dict[StructureId, tuple[Space, TensorKind, tuple[tuple[str, str], ...]]] = {
    StructureId.LAMBDA_VSTAR: (Space.VSTAR, _B, (("q", "p"),)),
    StructureId.LAMBDA_VSTAR_COMPLETE: (Space.TVSTAR, _B, (("q", "pdot"), ("v", "p"))),
    StructureId.LAMBDA_J1PI1STAR: (Space.J1PI1STAR, _B, (("q", "pdot"), ("v", "p"))),
    StructureId.LAMBDA_TILDE_J1PI: (Space.QUOT_TSTAR_J1PI, _B, (("q", "p_q"), ("v", "p_v"))),
    StructureId.LAMBDA_TILDE_PMU: (Space.PMU_QUOT, _B, (("q", "p_q"), ("p", "p_p"))),
    StructureId.OMEGA_J1PI: (Space.TSTAR_J1PI, _F, (("t", "p_t"), ("q", "p_q"), ("v", "p_v"))),
    StructureId.OMEGA_PMU: (Space.PMU, _F, (("t", "p_t"), ("q", "p_q"), ("p", "p_p"))),
    StructureId.OMEGA_J1TILDE: (Space.J1TILDE, _F, (("t", "p0dot"), ("q", "pdot"), ("v", "p"))),
    StructureId.PHI_VHAT1: (Space.VHAT1, _F, (("t", "p_t"), ("q", "p_q"), ("p", "p_p"))),
    StructureId.OMEGA_TSTARM: (Space.TSTARM, _F, (("t", "p0"), ("q", "p"))),
}


def structure_space(sid: StructureId | str, n: int) -> SpaceId:
    return space(_STRUCTURES[StructureId(sid)][0], n)


def _indices(sid: SpaceId, label: str) -> list[int]:
    s = sid.slot(label)
    return [s] if isinstance(s, int) else list(range(s.start, s.stop))


def canonical_structure(sid: StructureId | str, n: int) -> SkewTensor:
    """Constant matrix of a canonical bivector or 2-form."""
    try:
        key = StructureId(sid)
    except ValueError:
        raise ValueError(f"unknown structure {sid!r}") from None
    tag, kind, pairs = _STRUCTURES[key]
    target = space(tag, n)
    m = np.zeros((target.dim, target.dim))
    for a, b in pairs:
        for i, j in zip(_indices(target, a), _indices(target, b)):
            m[i, j] += 1.0
            m[j, i] -= 1.0
    return SkewTensor(target, kind, m)


class MapId(enum.Enum):
    A_M = "A_M"
    PSI = "PSI"
    A_PI = "A_PI"
    A_PI_INV = "A_PI_INV"
    B_PI = "B_PI"
    B_PI_INV = "B_PI_INV"
    A_TILDE = "A_TILDE"
    B_TILDE = "B_TILDE"
    B_TILDE_INV = "B_TILDE_INV"


@dataclass(frozen=True)
class _MapSpec:
    source: Space
    target: Space
    rows: tuple[tuple[str, str, int], ...]  # (target block, source block, sign)


def _same(*labels: str) -> tuple[tuple[str, str, int], ...]:
    return tuple((x, x, 1) for x in labels)


_MAPS: dict[MapId, _MapSpec] = {
    MapId.A_M: _MapSpec(
        Space.T_TSTAR_N, Space.TSTAR_T_N,
        (("q", "q", 1), ("v", "v", 1), ("p_q", "pdot", 1), ("p_v", "p", 1)),
    ),
    MapId.PSI: _MapSpec(
        Space.TSTAR_J1PI, Space.J1PI1STAR,
        _same("t", "q") + (("p", "p_v", 1), ("v", "v", 1), ("pdot", "p_q", 1)),
    ),
    MapId.A_PI: _MapSpec(
        Space.J1PI1STAR, Space.QUOT_TSTAR_J1PI,
        _same("t", "q", "v") + (("p_q", "pdot", 1), ("p_v", "p", 1)),
    ),
    MapId.A_PI_INV: _MapSpec(
        Space.QUOT_TSTAR_J1PI, Space.J1PI1STAR,
        _same("t", "q") + (("p", "p_v", 1), ("v", "v", 1), ("pdot", "p_q", 1)),
    ),
    MapId.B_PI: _MapSpec(
        Space.J1PI1STAR, Space.PMU_QUOT,
        _same("t", "q", "p") + (("p_q", "pdot", -1), ("p_p", "v", 1)),
    ),
    MapId.B_PI_INV: _MapSpec(
        Space.PMU_QUOT, Space.J1PI1STAR,
        _same("t", "q", "p") + (("v", "p_p", 1), ("pdot", "p_q", -1)),
    ),
    MapId.A_TILDE: _MapSpec(
        Space.J1TILDE, Space.TSTAR_J1PI,
        _same("t", "q", "v") + (("p_t", "p0dot", 1), ("p_q", "pdot", 1), ("p_v", "p", 1)),
    ),
    MapId.B_TILDE: _MapSpec(
        Space.J1TILDE, Space.VHAT1,
        _same("t", "q", "p0", "p") + (("p_t", "p0dot", -1), ("p_q", "pdot", -1), ("p_p", "v", 1)),
    ),
    MapId.B_TILDE_INV: _MapSpec(
        Space.VHAT1, Space.J1TILDE,
        _same("t", "q", "p0", "p") + (("v", "p_p", 1), ("p0dot", "p_t", -1), ("pdot", "p_q", -1)),
    ),
}


def map_spaces(mid: MapId | str, n: int) -> tuple[SpaceId, SpaceId]:
    spec = _MAPS[MapId(mid)]
    return space(spec.source, n), space(spec.target, n)


def _table(mid: MapId, n: int) -> tuple[np.ndarray, np.ndarray]:
    src, tgt = map_spaces(mid, n)
    idx = np.empty(tgt.dim, dtype=int)
    sign = np.empty(tgt.dim)
    seen = np.zeros(tgt.dim, dtype=bool)
    for tb, sb, s in _MAPS[mid].rows:
        ti, si = _indices(tgt, tb), _indices(src, sb)
        idx[ti] = si
        sign[ti] = s
        seen[ti] = True
    assert seen.all(), f"{mid} leaves target coordinates undefined"
    return idx, sign


def map_function(mid: MapId | str, n: int):
    """The coordinate formula of a structural map as an array function.

    It works on float arrays and on object arrays of forward-mode numbers.
    """
    idx, sign = _table(MapId(mid), n)

    def f(x):
        x = np.asarray(x)
        return np.array([x[i] if s > 0 else -x[i] for i, s in zip(idx, sign)], dtype=x.dtype)

    return f


def apply_map(mid: MapId | str, x) -> SpacePoint:
    mid = MapId(mid)
    if isinstance(x, SpacePoint):
        n = x.space.n
        src, tgt = map_spaces(mid, n)
        if x.space != src:
            raise ValueError(f"{mid.value} maps from {src}, got a point of {x.space}")
    else:
        raise TypeError("apply_map needs a SpacePoint (its space fixes n and is checked)")
    return SpacePoint(tgt, map_function(mid, n)(as_coords(x)))


def map_jacobian(mid: MapId | str, x) -> LinearMapData:
    """Jacobian by forward-mode differentiation of the coordinate formula."""
    mid = MapId(mid)
    src, tgt = map_spaces(mid, x.space.n)
    if x.space != src:
        raise ValueError(f"{mid.value} maps from {src}, got a point of {x.space}")
    return LinearMapData(src, tgt, jacobian(map_function(mid, src.n), as_coords(x)))


# -- canonical sections -----------------------------------------------------


def dl_tilde(sys: LagrangianSystem, j) -> SpacePoint:
    """``(t, q, v, dL/dq, dL/dv)``: dL modulo dt."""
    x = as_coords(j, sys.jet_space)
    n = sys.n
    _, g = sys.L.grad(x)
    return SpacePoint(space(Space.QUOT_TSTAR_J1PI, n), np.concatenate([x, g[1:]]))


def dl_full(sys: LagrangianSystem, j) -> SpacePoint:
    """``(t, q, v, dL/dt, dL/dq, dL/dv)``: the full differential of L."""
    x = as_coords(j, sys.jet_space)
    _, g = sys.L.grad(x)
    return SpacePoint(space(Space.TSTAR_J1PI, sys.n), np.concatenate([x, g]))


def dh_tilde(sys: HamiltonianSystem, v) -> SpacePoint:
    """``(t, q, p, dH/dq, dH/dp)``."""
    x = as_coords(v, sys.phase_space)
    _, g = sys.H.grad(x)
    return SpacePoint(space(Space.PMU_QUOT, sys.n), np.concatenate([x, g[1:]]))


def dfh(sys: HamiltonianSystem, a) -> SpacePoint:
    """``(t, q, p0, p, dH/dt, dH/dq, dH/dp)``; the ``p0`` covector slot is 1."""
    n = sys.n
    x = as_coords(a, space(Space.TSTARM, n))
    _, g = sys.H.grad(np.concatenate([x[: 1 + n], x[2 + n :]]))
    return SpacePoint(space(Space.VHAT1, n), np.concatenate([x, g]))


# -- theorem checks ---------------------------------------------------------

# map -> (source structure, target structure, expected sign)
THEOREMS: dict[MapId, tuple[StructureId, StructureId, int]] = {
    MapId.A_PI: (StructureId.LAMBDA_J1PI1STAR, StructureId.LAMBDA_TILDE_J1PI, 1),
    MapId.B_PI: (StructureId.LAMBDA_J1PI1STAR, StructureId.LAMBDA_TILDE_PMU, -1),
    MapId.A_TILDE: (StructureId.OMEGA_J1TILDE, StructureId.OMEGA_J1PI, 1),
    MapId.B_TILDE: (StructureId.OMEGA_J1TILDE, StructureId.PHI_VHAT1, -1),
}


def sample_points(sid: SpaceId, samples: int, seed: int, box: float = 2.0) -> np.ndarray:
    """Seeded uniform points in ``[-box, box]^dim``."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-box, box, size=(samples, sid.dim))


def structure_map_error(mid: MapId | str, x) -> float:
    """Max entrywise gap between the transported and the expected structure at ``x``."""
    mid = MapId(mid)
    src_s, tgt_s, sign = THEOREMS[mid]
    n = x.space.n
    J = map_jacobian(mid, x)
    if mid in (MapId.A_PI, MapId.B_PI):
        moved = pushforward_bivector(J, canonical_structure(src_s, n))
        expected = sign * canonical_structure(tgt_s, n).mat
    else:
        moved = pullback_two_form(J, canonical_structure(tgt_s, n))
        expected = sign * canonical_structure(src_s, n).mat
    return float(np.max(np.abs(moved.mat - expected)))


def verify_structure_map(mid: MapId | str, n: int, samples: int, seed: int, tol: float) -> dict:
    """Check the (anti-)Poisson or (anti-)presymplectic property at random points."""
    try:
        mid = MapId(mid)
    except ValueError:
        raise ValueError(f"unknown map {mid!r}") from None
    if mid not in THEOREMS:
        raise ValueError(f"no structure theorem for {mid.value}; use one of {[m.value for m in THEOREMS]}")
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    src, _ = map_spaces(mid, n)
    worst = 0.0
    for row in sample_points(src, samples, seed):
        worst = max(worst, structure_map_error(mid, SpacePoint(src, row)))
    return {
        "map": mid.value,
        "n": n,
        "samples": samples,
        "seed": seed,
        "sign": THEOREMS[mid][2],
        "max_error": worst,
        "pass": worst <= tol,
    }


# -- lifted dynamics --------------------------------------------------------


def lifted_dynamics_residual(sys: LagrangianSystem, j, extended: bool = False) -> float:
    """Gap between the Tulczyjew image of the Legendre-pushed EL field and dL.

    Restricted: ``A_PI(leg_L(j), T leg_L . R_L(j))`` against ``dl_tilde(j)``.
    Extended: ``A_TILDE(Leg_L(j), T Leg_L . R_L(j))`` against the full ``dL(j)``.
    """
    n = sys.n
    x = as_coords(j, sys.jet_space)
    field = euler_lagrange_field(sys, x)
    if extended:
        base = legendre_extended(sys, x)
        vel = ExtendedLegendre(sys).jacobian(x) @ field
        lifted = SpacePoint(space(Space.J1TILDE, n), np.concatenate([as_coords(base), vel[1:]]))
        image, expected = apply_map(MapId.A_TILDE, lifted), dl_full(sys, x)
    else:
        base = legendre_restricted(sys, x)
        vel = RestrictedLegendre(sys).jacobian(x) @ field
        lifted = SpacePoint(space(Space.J1PI1STAR, n), np.concatenate([as_coords(base), vel[1:]]))
        image, expected = apply_map(MapId.A_PI, lifted), dl_tilde(sys, x)
    return float(np.max(np.abs(as_coords(image) - as_coords(expected))))
