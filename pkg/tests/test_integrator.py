import math

import numpy as np
import pytest

from galorbit import closedform as cf
from galorbit.errors import ChartBoundaryError, DomainError, IntegrationError, NoReturnError, OutsideEnergyShellError
from galorbit.integrator import (
    IntegratorConfig,
    Section,
    check_jacobian,
    floquet,
    flow,
    integrate_ode,
    integrate_variational,
    poincare_return,
)
from galorbit.model import J4, ModelParams, energy, field_function, jacobian_function
from galorbit.reduction import BranchFields, lift
from galorbit.verify import axial_period, axial_state

from conftest import SQRT2

TIGHT = IntegratorConfig(rtol=1e-12, atol=1e-12)


def test_linear_period_x(generic):
    end = flow(field_function(generic, 0.0), (1, 0, 0, 0), 2 * math.pi, TIGHT)
    assert np.max(np.abs(end - (1, 0, 0, 0))) <= 1e-10


def test_linear_period_y(generic):
    end = flow(field_function(generic, 0.0), (0, 1, 0, 0), 2 * math.pi * SQRT2, TIGHT)
    assert np.max(np.abs(end - (0, 1, 0, 0))) <= 1e-10


def test_trajectory_dense_matches_nodes(generic):
    traj = integrate_ode(field_function(generic, 0.01), (0.5, 0.3, 0.1, 0.2), (0.0, 10.0), TIGHT)
    assert np.all(np.diff(traj.times) > 0)
    for i in (0, len(traj.times) // 2, -1):
        np.testing.assert_allclose(traj(traj.times[i]), traj.states[i], atol=1e-14)


def test_energy_drift(generic):
    eps, h = 0.01, 0.5
    ic = lift("x", h, generic, eps, (0.3, 0.2, 0.1))
    traj = integrate_ode(field_function(generic, eps), ic, (0.0, 200 * math.pi), TIGHT)
    drift = max(abs(energy(generic, eps, s) - h) for s in traj.states)
    assert drift <= 1e-9 * (1 + h)


def test_unperturbed_monodromy(generic):
    res = integrate_variational(field_function(generic, 0.0), jacobian_function(generic, 0.0),
                                (1, 0, 0, 0), 2 * math.pi, TIGHT)
    M = res.monodromy
    np.testing.assert_allclose(M[np.ix_([0, 2], [0, 2])], np.eye(2), atol=1e-10)
    w = 2 * math.pi / SQRT2
    rot = np.array([[math.cos(w), math.sin(w)], [-math.sin(w), math.cos(w)]])
    np.testing.assert_allclose(M[np.ix_([1, 3], [1, 3])], rot, atol=1e-10)
    spectrum = floquet(M)
    expected = np.sort_complex(np.array([1, 1, np.exp(1j * w), np.exp(-1j * w)]))
    np.testing.assert_allclose(np.sort_complex(spectrum.multipliers), expected, atol=1e-9)
    assert np.allclose(np.abs(spectrum.multipliers), 1.0, atol=1e-9)


@pytest.mark.parametrize("t", [0.5, 1.0, 1.5])
def test_reduced_monodromy_matches_closed_form(generic, t):
    fields = BranchFields("x", 0.5, generic)
    res = integrate_variational(lambda s, r: fields.F0(r), lambda s, r: fields.jacobian_F0(r),
                                (0, 0, 0), t, TIGHT)
    anchor = cf.FamilyAnchor("x", 0.0, 1.0, generic)
    assert np.max(np.abs(res.monodromy - cf.analytic_fundamental(anchor, t))) <= 1e-8


def test_symplectic_along_axial_orbit(generic):
    eps, h = 0.01, 0.5
    ic = axial_state("x", h, generic, eps)
    T = axial_period("x", h, generic, eps)
    res = integrate_variational(field_function(generic, eps), jacobian_function(generic, eps), ic, T,
                                IntegratorConfig(rtol=1e-13, atol=1e-14))
    M = res.monodromy
    assert np.max(np.abs(M.T @ J4 @ M - J4)) <= 1e-9
    assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-9)
    spectrum = floquet(M)
    assert abs(spectrum.product - 1.0) <= 1e-9
    assert spectrum.trivial_defect <= 1e-6
    assert spectrum.reciprocal_defect <= 1e-8


def test_floquet_identity():
    spectrum = floquet(np.eye(4))
    np.testing.assert_array_equal(spectrum.multipliers, np.ones(4))
    assert spectrum.trivial_defect == 0.0 and spectrum.reciprocal_defect == 0.0


def test_floquet_pairs():
    lam = 2.5
    M = np.diag([1.0, 1.0, lam, 1.0 / lam])
    spectrum = floquet(M)
    np.testing.assert_allclose(np.abs(spectrum.multipliers), [0.4, 1, 1, 2.5])
    np.testing.assert_allclose(spectrum.trivial, [1, 1])
    assert spectrum.reciprocal_defect <= 1e-15
    assert spectrum.product == pytest.approx(1.0)


def test_floquet_rejects_nonsquare():
    with pytest.raises(DomainError):
        floquet(np.ones((2, 3)))


def test_section_quarter_period(generic):
    ret = poincare_return(field_function(generic, 0.0), Section(0, 0.0, -1), (1, 0, 0, 0), TIGHT)
    assert ret.time == pytest.approx(math.pi / 2, abs=1e-12)
    np.testing.assert_allclose(ret.state, (0, 0, -1, 0), atol=1e-12)


def test_section_full_period(generic):
    f = field_function(generic, 0.0)
    first = poincare_return(f, Section(0, 0.0, -1), (1, 0, 0, 0), TIGHT)
    second = poincare_return(f, Section(0, 0.0, -1), first.state, TIGHT)
    assert second.time == pytest.approx(2 * math.pi, abs=1e-10)


def test_section_oracle_period(generic):
    eps, h = 0.01, 0.5
    ic = axial_state("x", h, generic, eps)
    ic[2] = 0.0
    ret = poincare_return(field_function(generic, eps), Section(2, 0.0, -1), ic,
                          IntegratorConfig(rtol=1e-13, atol=1e-14), t_max=10.0)
    # p_x next decreases through zero back at the turning point
    assert ret.time == pytest.approx(axial_period("x", h, generic, eps), abs=1e-8)


def test_no_return(generic):
    with pytest.raises(NoReturnError):
        poincare_return(field_function(generic, 0.0), Section(1, 5.0, 1), (1, 0, 0, 0), TIGHT, t_max=20.0)


def test_bad_section_direction(generic):
    with pytest.raises(DomainError):
        poincare_return(field_function(generic, 0.0), Section(0, 0.0, 0), (1, 0, 0, 0))


def test_reversibility(generic):
    f = field_function(generic, 0.05)
    ic = np.array([0.4, 0.3, -0.2, 0.5])
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-10)
    there = flow(f, ic, 20.0, cfg)
    back = integrate_ode(f, there, (20.0, 0.0), cfg).final
    assert np.max(np.abs(back - ic)) <= 10 * 1e-10 * 20


def test_error_decreases_with_tolerance(generic):
    f = field_function(generic, 0.0)
    exact = np.array([1.0, 0.0, 0.0, 0.0])
    errs = [np.max(np.abs(flow(f, exact, 20 * math.pi, IntegratorConfig(rtol=t, atol=t)) - exact))
            for t in (1e-6, 1e-8, 1e-10, 1e-12)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))
    assert errs[-1] <= 1e-9


def test_step_limit(generic):
    with pytest.raises(IntegrationError):
        integrate_ode(field_function(generic, 0.0), (1, 0, 0, 0), (0.0, 1000.0),
                      IntegratorConfig(max_steps=10))


def test_failing_field_is_reported(generic):
    fields = BranchFields("x", 0.5, generic)
    # p_x reaches zero at t = pi/2 and the chart refuses the point
    with pytest.raises(IntegrationError) as info:
        integrate_ode(lambda t, r: fields.F0(r), (0, 0, 0), (0.0, 3.0), TIGHT)
    assert 0.0 < info.value.t <= 3.0
    assert isinstance(info.value.__cause__, (ChartBoundaryError, OutsideEnergyShellError))


@pytest.mark.parametrize("kwargs", [{"rtol": 0.0}, {"atol": 0.1}, {"max_steps": 0}])
def test_config_validation(kwargs):
    with pytest.raises(DomainError):
        IntegratorConfig(**kwargs)


def test_jacobian_check_catches_mistake(generic):
    f = field_function(generic, 0.3)
    wrong = lambda t, s: jacobian_function(generic, 0.3)(t, s) * 1.01
    with pytest.raises(DomainError):
        check_jacobian(f, wrong, 0.0, np.array([0.3, 0.2, 0.1, 0.4]))
    with pytest.raises(DomainError):
        integrate_variational(f, wrong, np.array([0.3, 0.2, 0.1, 0.4]), 1.0)

