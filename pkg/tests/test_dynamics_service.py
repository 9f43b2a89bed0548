import math

import numpy as np
import pytest

from services.calculus_service import Chart, VectorFieldHandle
from services.catalog_service import hopf_ambient, load
from services.dynamics_service import (
    DynamicsError,
    FieldResolutionError,
    FlowDomainExit,
    PeriodError,
    flow,
    minimal_period,
    period_constancy_suite,
    reeb_flow,
)

PLANE = Chart("plane", ("x", "y"))
ROTATION = VectorFieldHandle.parse(PLANE, {"x": "-y", "y": "x"})


def test_rk4_follows_a_rotation():
    result = flow(ROTATION, (1.0, 0.0), math.pi / 2)
    assert np.allclose(result.final_point, [0.0, 1.0], atol=1e-10)
    assert result.steps == math.ceil((math.pi / 2) / 1e-3)


def test_backward_flow_undoes_forward_flow():
    forward = flow(ROTATION, (0.3, -0.7), 1.25)
    back = flow(ROTATION, forward.final_point, -1.25)
    assert np.allclose(back.final_point, [0.3, -0.7], atol=1e-10)


@pytest.mark.parametrize("s, t", [(0.4, 0.9), (1.3, -0.6), (2.5, 2.5)])
def test_flow_is_a_one_parameter_group(s, t):
    x0 = (0.3, -0.7)
    twice = flow(ROTATION, flow(ROTATION, x0, s).final_point, t)
    once = flow(ROTATION, x0, s + t)
    assert np.abs(np.array(twice.final_point) - once.final_point).max() < 1e-8


def test_reeb_flow_is_a_one_parameter_group(hopf):
    chart = hopf.contact.chart
    x0 = hopf.contact.sample(1, 11)[0]
    field_ = hopf.contact.reeb_field
    twice = flow(field_, flow(field_, x0, 0.8).final_point, 1.7)
    once = flow(field_, x0, 2.5)
    assert np.abs(chart.displacement(twice.final_point, once.final_point)).max() < 1e-8


def test_rk4_is_fourth_order_on_the_ambient_rotation():
    *_, rotation = hopf_ambient()
    x0 = np.array([0.6, -0.2, 0.1, 0.9])
    q0, p0 = x0[0::2], x0[1::2]
    exact = np.empty(4)
    exact[0::2] = q0 * math.cos(1.0) - p0 * math.sin(1.0)
    exact[1::2] = p0 * math.cos(1.0) + q0 * math.sin(1.0)
    coarse, fine = (np.abs(np.array(flow(rotation, x0, 1.0, step=h).final_point) - exact).max() for h in (0.1, 0.05))
    assert coarse / fine >= 8


def test_step_must_be_positive():
    with pytest.raises(DynamicsError):
        flow(ROTATION, (1.0, 0.0), 1.0, step=0.0)


def test_start_outside_the_chart():
    half = Chart("half", ("x",), ((0.0, math.inf),))
    with pytest.raises(DynamicsError):
        flow(VectorFieldHandle.parse(half, {"x": "1"}), (-1.0,), 1.0)


def test_unresolvable_field():
    broken = VectorFieldHandle.pointwise(PLANE, lambda p: np.array([np.nan, 0.0]))
    with pytest.raises(FieldResolutionError):
        flow(broken, (0.0, 0.0), 0.1)


def test_rotation_period():
    result = minimal_period(ROTATION, (1.0, 0.0), horizon=10.0)
    assert result.status == "periodic"
    assert result.period == pytest.approx(2 * math.pi, abs=1e-6)


def test_hopf_reeb_period(hopf):
    x0 = hopf.contact.sample(1, seed=11)[0]
    result = minimal_period(hopf.contact.reeb_field, x0)
    assert result.status == "periodic"
    assert result.refined
    assert abs(result.period - 2 * math.pi) < 1e-6


def test_hopf_reeb_flow_keeps_residual_small(hopf):
    x0 = hopf.contact.sample(1, seed=3)[0]
    result = reeb_flow(hopf.contact, x0, 1.0)
    assert result.max_residual < 1e-10


@pytest.mark.parametrize("k, l", [(2, 3), (3, 5), (1, 4)])
def test_torus_return_time_is_l(k, l):
    descriptor = load(f"torus_fixture({k},{l})")
    result = minimal_period(descriptor.vector_field, (0.2, 0.7), horizon=l + 1.0)
    assert result.status == "periodic"
    assert result.period == pytest.approx(l, abs=1e-6)


def test_darboux_orbits_do_not_return(darboux1):
    result = minimal_period(darboux1.contact.reeb_field, (0.0, 0.1, 0.2), horizon=5.0)
    assert result.status == "no-return-within-horizon"
    assert result.period is None


def test_suite_reports_non_periodic_darboux(darboux1):
    report = period_constancy_suite(darboux1.contact, n_orbits=3, horizon=2.0)
    assert report.status == "non-periodic"
    assert report.passed


def test_suite_refuses_when_periodicity_is_expected(darboux1):
    with pytest.raises(PeriodError):
        period_constancy_suite(darboux1.contact, n_orbits=2, horizon=1.0, expect_periodic=True)


def test_hopf_periods_are_constant(hopf):
    report = period_constancy_suite(hopf.contact, n_orbits=20, seed=5)
    assert len(report.periods) == 20
    assert report.status == "periodic"
    assert report.passed
    assert report.mean == pytest.approx(2 * math.pi, abs=1e-6)


def test_rescaled_hopf_doubles_the_period(hopf):
    report = period_constancy_suite(hopf.contact.scaled(2.0), n_orbits=3, seed=5, horizon=20.0)
    assert report.status == "periodic"
    assert report.passed
    assert report.mean == pytest.approx(4 * math.pi, abs=1e-6)


def test_punctured_chart_exits_the_domain():
    descriptor = load("punctured_hopf")
    witness = descriptor.witnesses[0]
    with pytest.raises(FlowDomainExit) as info:
        flow(descriptor.contact.reeb_field, witness, 2.0)
    assert 0.8 < info.value.exit_time < 0.83


def test_punctured_suite_is_incomplete():
    descriptor = load("punctured_hopf")
    report = period_constancy_suite(descriptor.contact, n_orbits=1, horizon=1.0, witnesses=descriptor.witnesses)
    assert report.status == "incomplete"
    assert not report.passed
    assert len(report.exits) >= 1
