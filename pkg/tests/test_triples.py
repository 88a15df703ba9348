from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import point
from jetmech.derivatives import ScalarField
from jetmech.geometry import LinearMapData, Space, SpacePoint, kernel_basis, pullback_two_form, pushforward_bivector, skew_rank, space
from jetmech.mechanics import HamiltonianSystem, omega_h, reeb_field
from jetmech.scenarios import REGULAR_NAMES, builtin
from jetmech.triples import (
    THEOREMS,
    MapId,
    StructureId,
    apply_map,
    canonical_structure,
    dfh,
    dh_tilde,
    dl_full,
    dl_tilde,
    lifted_dynamics_residual,
    map_jacobian,
    map_spaces,
    sample_points,
    structure_space,
    verify_structure_map,
)


def ham(f, n=1):
    return HamiltonianSystem(n, ScalarField(f, 1 + 2 * n))


def nonzero_pairs(S):
    names = S.space.coord_names
    return {(names[i], names[j]): S.mat[i, j] for i, j in zip(*np.nonzero(np.triu(S.mat)))}


def test_structure_examples():
    assert nonzero_pairs(canonical_structure(StructureId.LAMBDA_J1PI1STAR, 1)) == {("q1", "pdot1"): 1, ("p1", "v1"): -1}
    assert nonzero_pairs(canonical_structure(StructureId.OMEGA_J1TILDE, 1)) == {
        ("t", "p0dot"): 1, ("q1", "pdot1"): 1, ("p1", "v1"): -1,
    }
    assert nonzero_pairs(canonical_structure(StructureId.PHI_VHAT1, 1)) == {
        ("t", "p_t"): 1, ("q1", "p_q1"): 1, ("p1", "p_p1"): 1,
    }


def test_structure_blocks_scale_with_n():
    S = canonical_structure(StructureId.LAMBDA_J1PI1STAR, 3)
    assert S.space == structure_space(StructureId.LAMBDA_J1PI1STAR, 3)
    assert skew_rank(S) == 4 * 3
    with pytest.raises(ValueError):
        canonical_structure("NOT_A_STRUCTURE", 1)


@pytest.mark.parametrize(
    "mid, coords, expected",
    [
        (MapId.A_PI, [0.5, 1, 2, 3, 4], [0.5, 1, 3, 4, 2]),
        (MapId.B_PI, [0.5, 1, 2, 3, 4], [0.5, 1, 2, -4, 3]),
        (MapId.A_TILDE, [0, 1, 2, 3, 4, 5, 6], [0, 1, 4, 5, 6, 3]),
        (MapId.B_TILDE, [0, 1, 2, 3, 4, 5, 6], [0, 1, 2, 3, -5, -6, 4]),
        (MapId.PSI, [0, 1, 2, 3, 4, 5], [0, 1, 5, 2, 4]),
        (MapId.A_M, [1, 2, 3, 4], [1, 3, 4, 2]),
    ],
)
def test_map_examples(mid, coords, expected):
    src, tgt = map_spaces(mid, 1)
    out = apply_map(mid, SpacePoint(src, coords))
    assert out.space == tgt
    assert out.tolist() == expected


def test_apply_map_checks_source():
    with pytest.raises(ValueError):
        apply_map(MapId.A_PI, point(Space.VSTAR, 1, [0, 1, 2]))
    with pytest.raises(TypeError):
        apply_map(MapId.A_PI, np.zeros(5))
    with pytest.raises(ValueError):
        map_jacobian(MapId.A_PI, point(Space.J1TILDE, 1, np.zeros(7)))


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("fwd, back", [(MapId.A_PI, MapId.A_PI_INV), (MapId.B_PI, MapId.B_PI_INV), (MapId.B_TILDE, MapId.B_TILDE_INV)])
def test_round_trips(fwd, back, n):
    src, _ = map_spaces(fwd, n)
    for row in sample_points(src, 100, 3):
        x = SpacePoint(src, row)
        assert apply_map(back, apply_map(fwd, x)) == x
        y = apply_map(fwd, x)
        assert apply_map(fwd, apply_map(back, y)) == y


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31), st.floats(-50, 50, allow_nan=False))
def test_p0_shift(n, seed, c):
    sid = space(Space.J1TILDE, n)
    x = sample_points(sid, 1, seed)[0]
    y = x.copy()
    y[sid.slot("p0")] += c
    a, b = apply_map(MapId.A_TILDE, SpacePoint(sid, x)), apply_map(MapId.A_TILDE, SpacePoint(sid, y))
    assert a == b
    u, w = apply_map(MapId.B_TILDE, SpacePoint(sid, x)).coords, apply_map(MapId.B_TILDE, SpacePoint(sid, y)).coords
    k = space(Space.VHAT1, n).slot("p0")
    assert w[k] == y[sid.slot("p0")]
    assert np.array_equal(np.delete(u, k), np.delete(w, k))


@pytest.mark.parametrize("n", [1, 2])
def test_projection_compatibility(n, rng):
    sid = space(Space.J1PI1STAR, n)
    keep = [sid.index(c) for c in ["t"] + [f"q{i}" for i in range(1, n + 1)] + [f"v{i}" for i in range(1, n + 1)]]
    for row in sample_points(sid, 30, 5):
        other = rng.uniform(-2, 2, size=sid.dim)
        other[keep] = row[keep]
        a = apply_map(MapId.A_PI, SpacePoint(sid, row)).coords[: 1 + 2 * n]
        b = apply_map(MapId.A_PI, SpacePoint(sid, other)).coords[: 1 + 2 * n]
        assert np.array_equal(a, b)
        assert np.array_equal(a, row[keep])


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("sid", [StructureId.OMEGA_J1TILDE, StructureId.PHI_VHAT1])
def test_kernels_are_p0_direction(sid, n):
    S = canonical_structure(sid, n)
    basis = kernel_basis(S)
    assert len(basis) == 1
    k = S.space.slot("p0")
    v = basis[0] / basis[0][k]
    assert np.max(np.abs(np.delete(v, k))) <= 1e-12
    assert skew_rank(S) == 2 + 4 * n


@pytest.mark.parametrize("mid", list(THEOREMS))
@pytest.mark.parametrize("n", [1, 2, 3])
def test_structure_theorems(mid, n):
    report = verify_structure_map(mid, n, 50, 11, 1e-12)
    assert report["pass"] and report["max_error"] == 0.0
    assert report["sign"] == THEOREMS[mid][2]
    assert set(report) == {"map", "n", "samples", "seed", "sign", "max_error", "pass"}


def test_structure_signs():
    assert {m.value: THEOREMS[m][2] for m in THEOREMS} == {"A_PI": 1, "B_PI": -1, "A_TILDE": 1, "B_TILDE": -1}


def test_wrong_sign_is_detected():
    x = point(Space.J1PI1STAR, 1, [0.1, 0.2, 0.3, 0.4, 0.5])
    moved = pushforward_bivector(map_jacobian(MapId.B_PI, x), canonical_structure(StructureId.LAMBDA_J1PI1STAR, 1))
    assert np.max(np.abs(moved.mat - canonical_structure(StructureId.LAMBDA_TILDE_PMU, 1).mat)) == 2.0


def test_verify_rejects_bad_arguments():
    with pytest.raises(ValueError):
        verify_structure_map(MapId.A_M, 1, 5, 0, 1e-12)
    with pytest.raises(ValueError):
        verify_structure_map("NOPE", 1, 5, 0, 1e-12)
    with pytest.raises(ValueError):
        verify_structure_map(MapId.A_PI, 1, 0, 0, 1e-12)


def test_verify_is_deterministic():
    a = verify_structure_map(MapId.B_TILDE, 2, 10, 99, 1e-12)
    b = verify_structure_map(MapId.B_TILDE, 2, 10, 99, 1e-12)
    assert a == b


def _a_m_inverse(alpha):
    J = map_jacobian(MapId.A_M, point(Space.T_TSTAR_N, len(alpha) // 4, np.zeros(len(alpha)))).mat
    return np.linalg.solve(J, alpha)


@pytest.mark.parametrize("n", [1, 2])
def test_psi_is_projected_inverse_tulczyjew(n, rng):
    """psi = T(mu) o A_M^{-1} on a covector extended to T*(T(R x Q)) with tdot = 1."""
    src = space(Space.TSTAR_J1PI, n)
    for row in sample_points(src, 20, 7):
        x = SpacePoint(src, row)
        t, q, v = row[0], row[1 : 1 + n], row[1 + n : 1 + 2 * n]
        pt, pq, pv = row[1 + 2 * n], row[2 + 2 * n : 2 + 3 * n], row[2 + 3 * n :]
        images = []
        for p_tdot in rng.uniform(-5, 5, size=4):
            lifted = np.concatenate([[t], q, [1.0], v, [pt], pq, [p_tdot], pv])
            pre = _a_m_inverse(lifted)
            m = 1 + n
            # T_TSTAR_N over N = R x Q: (q', p', v', pdot'), slot 0 of each block is time
            qq, pp, vv, pd = pre[:m], pre[m : 2 * m], pre[2 * m : 3 * m], pre[3 * m :]
            assert vv[0] == 1.0
            images.append(np.concatenate([qq, pp[1:], vv[1:], pd[1:]]))
        assert all(np.array_equal(images[0], im) for im in images)
        assert np.array_equal(images[0], apply_map(MapId.PSI, x).coords)


@pytest.mark.parametrize("name", REGULAR_NAMES)
def test_omega_h_is_pullback_by_hamiltonian_section(name, rng):
    sys = builtin(name, 2).hamiltonian_system()
    n = 2
    target = space(Space.TSTARM, n)
    omega = canonical_structure(StructureId.OMEGA_TSTARM, n)
    for v in rng.uniform(-1.5, 1.5, size=(20, 1 + 2 * n)):
        _, g = sys.H.grad(v)
        J = np.zeros((target.dim, 1 + 2 * n))
        J[: 1 + n, : 1 + n] = np.eye(1 + n)
        J[1 + n] = -g  # p0 = -H
        J[2 + n :, 1 + n :] = np.eye(n)
        pulled = pullback_two_form(LinearMapData(sys.phase_space, target, J), omega)
        assert np.max(np.abs(pulled.mat - omega_h(sys, v).mat)) <= 1e-15


def test_dl_tilde_examples():
    free, harm = builtin("free_particle").lagrangian, builtin("harmonic").lagrangian
    assert dl_tilde(free, [0, 0, 2]).tolist() == [0, 0, 2, 0, 2]
    assert dl_tilde(harm, [0, 1, 0]).tolist() == [0, 1, 0, -1, 0]
    assert apply_map(MapId.A_PI_INV, dl_tilde(free, [0, 0, 2])).tolist() == [0, 0, 2, 2, 0]


def test_dl_full_has_time_derivative():
    sys = builtin("caldirola_kanai").lagrangian
    out = dl_full(sys, [0.0, 1.0, 2.0])
    assert out.space == space(Space.TSTAR_J1PI, 1)
    # L = e^t (v^2 - q^2) / 2, so L_t = L = 1.5 at t = 0
    assert out["p_t"] == pytest.approx(1.5, abs=1e-15)


def test_dh_tilde_examples(rng):
    osc = ham(lambda x: 0.5 * x[2] * x[2] + 0.5 * x[1] * x[1])
    assert dh_tilde(osc, [0, 1, 2]).tolist() == [0, 1, 2, 1, 2]
    assert dh_tilde(ham(lambda x: 0.5 * x[2] * x[2]), [0, 3, 2]).tolist() == [0, 3, 2, 0, 2]
    sys = builtin("driven_oscillator").hamiltonian
    for v in rng.uniform(-2, 2, size=(20, 3)):
        graph = apply_map(MapId.B_PI_INV, dh_tilde(sys, v)).coords
        R = reeb_field(sys, v)
        assert np.array_equal(graph, np.concatenate([v, R[1:]]))


def test_dfh_examples():
    osc = ham(lambda x: 0.5 * x[2] * x[2] + 0.5 * x[1] * x[1])
    assert dfh(osc, [0, 1, 5, 2]).tolist() == [0, 1, 5, 2, 0, 1, 2]
    assert dfh(osc, [0, 1, 9, 2]).tolist()[4:] == [0, 1, 2]
    assert dfh(ham(lambda x: 0 * x[0]), [0.3, 1, 2, 3]).tolist()[4:] == [0, 0, 0]


@pytest.mark.parametrize("name", REGULAR_NAMES)
@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("extended", [False, True])
def test_lifted_dynamics_lemmas(name, n, extended, rng):
    sys = builtin(name, n).lagrangian
    worst = max(lifted_dynamics_residual(sys, j, extended) for j in rng.uniform(-2, 2, size=(100, 1 + 2 * n)))
    assert worst <= 1e-12
