from __future__ import annotations

import math

import numpy as np
import pytest

from jetmech.derivatives import ScalarField
from jetmech.geometry import Space, SpacePoint, space
from jetmech.mechanics import HamiltonianSystem, SingularLagrangian, Trajectory, legendre_extended, reeb_field
from jetmech.scenarios import REGULAR_NAMES, builtin
from jetmech.simulate import (
    IntegrationError,
    IntegratorConfig,
    base_curve,
    energy_law_residual,
    equivalence_report,
    extended_flow,
    five_point_rate,
    hamiltonian_flow,
    integrate,
    lagrangian_flow,
    lifted_membership,
    richardson_ratio,
    route_gap,
)

V1 = space(Space.VSTAR, 1)
J1 = space(Space.J1PI, 1)


def driven_q(t):
    return (math.sin(t) - t * math.cos(t)) / 2


def kinetic():
    return HamiltonianSystem(1, ScalarField(lambda x: 0.5 * x[2] * x[2], 3))


def test_config_validation():
    assert IntegratorConfig(0, 1, 1e-3).steps == 1000
    assert IntegratorConfig(0, 10, 1e-3).steps == 10000
    for bad in [(0, 1, 0), (0, 1, -1e-3), (1, 0, 1e-3), (0, 0, 1e-3), (0, 1, 0.3), (0, math.inf, 1e-3), (math.nan, 1, 0.1)]:
        with pytest.raises(ValueError):
            IntegratorConfig(*bad)
    with pytest.raises(ValueError):
        IntegratorConfig(0, 1, 0.1, method="euler")
    assert IntegratorConfig(0, 1, 0.1).halved().step == 0.05


def test_free_flow_is_exact():
    flow = hamiltonian_flow(kinetic(), SpacePoint(V1, [0, 0, 1]), IntegratorConfig(0, 1, 1e-3))
    assert len(flow) == 1001
    assert flow.samples[-1, 1] == pytest.approx(1, abs=1e-12)


def test_driven_hamiltonian_flow_matches_closed_form():
    sys = builtin("driven_oscillator").hamiltonian
    flow = hamiltonian_flow(sys, SpacePoint(V1, [0, 0, 0]), IntegratorConfig(0, 10, 1e-3))
    assert abs(flow.samples[-1, 1] - driven_q(10)) <= 1e-6


def test_free_particle_el_flow_keeps_velocity():
    flow = lagrangian_flow(builtin("free_particle").lagrangian, SpacePoint(J1, [0, 0, 2]), IntegratorConfig(0, 1, 1e-3))
    assert np.max(np.abs(flow.samples[:, 2] - 2)) <= 1e-12
    assert flow.samples[-1, 1] == pytest.approx(2, abs=1e-12)


def test_time_is_on_grid():
    cfg = IntegratorConfig(0.5, 2.5, 1e-3)
    flow = extended_flow(builtin("caldirola_kanai").hamiltonian_system(), [0.5, 0.1, 0.0, 0.2], cfg)
    assert np.max(np.abs(flow.times - (0.5 + 1e-3 * np.arange(len(flow))))) <= 1e-12


def test_integrate_requires_matching_start_time():
    with pytest.raises(ValueError):
        integrate(lambda x: reeb_field(kinetic(), x), SpacePoint(V1, [0.3, 0, 1]), IntegratorConfig(0, 1, 0.1))
    with pytest.raises(ValueError):
        integrate(lambda x: x, np.zeros(3), IntegratorConfig(0, 1, 0.1))


def test_drifting_time_component_is_rejected():
    with pytest.raises(AssertionError):
        integrate(lambda x: np.array([2.0, 0.0, 0.0]), SpacePoint(V1, [0, 0, 0]), IntegratorConfig(0, 1, 0.1))


def test_abort_keeps_partial_trajectory():
    sys = builtin("linear_velocity").lagrangian
    with pytest.raises(IntegrationError) as info:
        lagrangian_flow(sys, SpacePoint(J1, [0, 0, 1]), IntegratorConfig(0, 1, 0.1))
    err = info.value
    assert err.index == 0 and len(err.trajectory) == 1
    assert isinstance(err.cause, SingularLagrangian)


def test_abort_midway():
    # a field that blows up once t passes 0.5
    def field(x):
        if x[0] > 0.5:
            raise ZeroDivisionError("boom")
        return np.array([1.0, 0.0, 0.0])

    with pytest.raises(IntegrationError) as info:
        integrate(field, SpacePoint(V1, [0, 0, 0]), IntegratorConfig(0, 1, 0.1))
    err = info.value
    assert err.index == 5
    assert len(err.trajectory) == 6
    assert err.trajectory.times[-1] == pytest.approx(0.5)


def test_non_finite_state_aborts():
    with pytest.raises(IntegrationError):
        integrate(lambda x: np.array([1.0, math.exp(min(x[1], 800.0)) * 1e300, 0.0]), SpacePoint(V1, [0, 0, 0]), IntegratorConfig(0, 1, 0.1))


def test_five_point_rate_is_fourth_order():
    t = np.linspace(0, 1, 101)
    step = t[1] - t[0]
    err = np.max(np.abs(five_point_rate(np.sin(t), step) - np.cos(t[2:-2])))
    assert err <= 1e-9
    with pytest.raises(ValueError):
        five_point_rate(np.zeros(4), 0.1)


def test_base_curve_carries_exact_rates():
    flow = lagrangian_flow(builtin("harmonic").lagrangian, SpacePoint(J1, [0, 0, 1]), IntegratorConfig(0, 1, 0.01))
    curve = base_curve(flow)
    assert curve.space == space(Space.M, 1)
    assert np.array_equal(curve.derivative[:, 0], flow.samples[:, 2])
    with pytest.raises(ValueError):
        base_curve(curve)


def test_order_estimate_driven():
    sysL = builtin("driven_oscillator").lagrangian
    ratio = richardson_ratio(lambda c: lagrangian_flow(sysL, [0, 0, 0], c), IntegratorConfig(0, 2, 1e-3))
    assert 8 <= ratio <= 32


def test_order_estimate_against_closed_form():
    sys = builtin("driven_oscillator").hamiltonian
    errs = []
    for step in (0.008, 0.004):
        flow = hamiltonian_flow(sys, SpacePoint(V1, [0, 0, 0]), IntegratorConfig(0, 10, step))
        errs.append(abs(flow.samples[-1, 1] - driven_q(10)))
    assert 8 <= errs[0] / errs[1] <= 32


def test_order_estimate_is_none_for_exact_flows():
    sysL = builtin("free_particle").lagrangian
    assert richardson_ratio(lambda c: lagrangian_flow(sysL, [0, 0, 2], c), IntegratorConfig(0, 1, 1e-3)) is None


def test_route_gap_caldirola_kanai():
    sysL = builtin("caldirola_kanai").lagrangian
    sysH = HamiltonianSystem.from_lagrangian(sysL)
    gap, flow, ham = route_gap(sysL, sysH, [0, 0.5, 0.3], IntegratorConfig(0, 5, 1e-3))
    assert gap <= 1e-6
    assert len(flow) == len(ham) == 5001


@pytest.mark.parametrize("name", REGULAR_NAMES)
def test_energy_law(name):
    sc = builtin(name)
    sysH = sc.hamiltonian_system()
    a0 = legendre_extended(sc.lagrangian, [0, 0.4, -0.3])
    flow = extended_flow(sysH, a0, IntegratorConfig(0, 1, 1e-3))
    assert energy_law_residual(sysH, flow) <= 1e-6


def test_energy_law_needs_extended_flow():
    flow = hamiltonian_flow(kinetic(), SpacePoint(V1, [0, 0, 1]), IntegratorConfig(0, 1, 0.1))
    with pytest.raises(ValueError):
        energy_law_residual(kinetic(), flow)


def test_lifted_momenta_stay_on_both_submanifolds():
    sysL = builtin("harmonic").lagrangian
    sysH = HamiltonianSystem.from_lagrangian(sysL)
    flow = lagrangian_flow(sysL, [0, 1, 0], IntegratorConfig(0, 2, 1e-3))
    sl, sh = lifted_membership(sysL, sysH, flow)
    assert sl <= 1e-6 and sh <= 1e-6


def test_free_particle_report():
    report = equivalence_report(builtin("free_particle").lagrangian, IntegratorConfig(0, 1, 1e-3), [0, 0.5, 2])
    assert set(report) == {
        "scenario", "t0", "t1", "step", "sup_gap", "max_SL_residual", "max_SH_residual",
        "lemma_l1_max", "ec2_residual_max", "order_estimate",
    }
    for key in ("sup_gap", "max_SL_residual", "max_SH_residual", "lemma_l1_max", "ec2_residual_max"):
        assert report[key] <= 1e-10, key
    assert report["order_estimate"] is None
