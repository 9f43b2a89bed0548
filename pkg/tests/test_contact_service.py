import math

import numpy as np
import pytest

from services.calculus_service import Chart, DifferentialForm, SmoothMap, VectorFieldHandle, pullback, sample_points
from services.catalog_service import darboux_chart, hopf_ambient, hopf_chart, hopf_normal_form
from services.contact_service import (
    ContactChart,
    ContactError,
    NotContactError,
    ReductionError,
    RescaleError,
    additive_agreement,
    conformal_rescale,
    contact_to_symplectic,
    contact_volume,
    integrality_check,
    is_contact,
    kernel_basis,
    liouville_projection_check,
    reduce_to_normal_form,
    reeb,
    symplectic_to_contact,
    symplectize,
)
from services.expression_service import evaluate_at, parse


@pytest.mark.parametrize("n", [1, 2, 3])
def test_darboux_volume_is_plus_or_minus_one(n):
    chart, eta, _ = darboux_chart(n)
    volume = contact_volume(eta)
    coefficient = volume.coefficient(tuple(range(chart.dimension)))
    for p in sample_points(chart, 10, seed=0):
        assert abs(evaluate_at(coefficient, chart.coordinates, p)) == 1.0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_darboux_reeb_is_d_z(n):
    chart, eta, _ = darboux_chart(n)
    field_ = reeb(eta)
    unit = np.zeros(chart.dimension)
    unit[0] = 1.0
    for p in sample_points(chart, 200, seed=42):
        assert np.abs(field_.at(p) - unit).max() < 1e-12


def test_dz_is_not_contact():
    chart = Chart("r3", ("z", "q", "p"))
    report = is_contact(DifferentialForm.parse(chart, {"z": "1"}))
    assert not report.passed
    assert report.min_volume == 0.0
    with pytest.raises(NotContactError):
        ContactChart(DifferentialForm.parse(chart, {"z": "1"}))


def test_even_dimension_is_rejected():
    chart = Chart("r2", ("q", "p"))
    with pytest.raises(NotContactError):
        contact_volume(DifferentialForm.parse(chart, {"q": "p"}))


def test_hopf_reeb_residuals(hopf):
    report = hopf.contact.reeb_residuals()
    assert report.passed
    assert report.max_residual < 1e-10
    field_ = reeb(hopf.contact.eta)
    for p in hopf.contact.sample(20):
        assert np.allclose(field_.at(p), [1.0, 1.0, 0.0], atol=1e-10)


def test_lie_derivative_along_reeb_vanishes(hopf):
    assert hopf.contact.lie_reeb_residuals().passed


def test_kernel_basis_annihilates_eta(hopf):
    p = hopf.contact.sample(1)[0]
    basis = kernel_basis(hopf.contact.eta, p)
    assert basis.shape == (3, 2)
    assert np.abs(hopf.contact.eta.covector(p) @ basis).max() < 1e-14


def test_declared_reeb_field_is_used_once_verified(darboux1):
    assert darboux1.contact.reeb_field is darboux1.known_reeb


def test_wrong_declared_reeb_falls_back_to_solve():
    chart, eta, _ = darboux_chart(1)
    wrong = ContactChart(eta, known_reeb=None)
    wrong.known_reeb = VectorFieldHandle.coordinate(chart, "q1")
    assert not wrong.reeb_field.is_symbolic


@pytest.mark.parametrize("seed", range(20))
def test_conformal_rescaling_law(darboux1, seed):
    rng = np.random.default_rng(seed)
    a, b, c = rng.uniform(0.1, 0.5, size=3)
    f = f"2 + {a}*sin(z) + {b}*cos(q1) + {c}*p1*q1/(1 + p1^2)"
    eta_new, report = conformal_rescale(darboux1.contact, parse(f, darboux1.chart.coordinates), seed=seed)
    assert report.passed, report
    assert report.max_residual < 1e-8
    assert is_contact(eta_new).passed


def test_rescaling_by_a_vanishing_function(darboux1):
    with pytest.raises(RescaleError):
        conformal_rescale(darboux1.contact, parse("0*z", darboux1.chart.coordinates))


def test_scaled_chart_rescales_the_declared_reeb(darboux1):
    doubled = darboux1.contact.scaled(2.0)
    assert np.allclose(doubled.reeb_field.at((0.1, 0.2, 0.3)), [0.5, 0.0, 0.0])


# Symplectization


@pytest.mark.parametrize("target", ["darboux1", "hopf"])
def test_symplectization_laws(target, request):
    descriptor = request.getfixturevalue(target)
    symp = symplectize(descriptor.contact)
    reports = symp.verify(samples=50)
    assert all(r.passed for r in reports.values()), reports


def test_symplectization_round_trip(darboux1):
    symp = symplectize(darboux1.contact)
    recovered = pullback(symp.section(1.0), symp.liouville_form)
    for p in darboux1.contact.sample(20):
        assert np.allclose(recovered.covector(p), darboux1.contact.eta.covector(p), atol=1e-15)


def test_additive_symplectization_agrees(hopf):
    assert additive_agreement(hopf.contact, samples=30).passed


def test_liouville_kernel_projects_onto_contact_distribution(hopf):
    assert liouville_projection_check(symplectize(hopf.contact), samples=30).passed


# Reductions


def test_sphere_in_r4_is_contact():
    omega, nu, embed, _ = hopf_ambient()
    eta = symplectic_to_contact(omega, nu, embed, samples=50)
    _, chart_eta, _ = hopf_chart()
    for p in sample_points(embed.source, 20, seed=1):
        assert np.allclose(eta.covector(p), 0.5 * chart_eta.covector(p), atol=1e-12)


def test_non_liouville_field_is_rejected():
    omega, _, embed, rotation = hopf_ambient()
    with pytest.raises(ReductionError):
        symplectic_to_contact(omega, rotation, embed, samples=20)


def test_hopf_base_form(hopf):
    reduction = hopf.reduction
    omega = contact_to_symplectic(hopf.contact, reduction.projection, reduction.section)
    for y in sample_points(omega.chart, 20, seed=4):
        assert (omega - reduction.omega).max_abs(y) < 1e-10


def test_projection_not_constant_along_reeb_is_rejected(hopf):
    bad = SmoothMap.parse(hopf.chart, hopf.reduction.projection.target, ["phi", "xi2"])
    with pytest.raises(ReductionError):
        contact_to_symplectic(hopf.contact, bad, hopf.reduction.section, samples=20)


def test_hopf_integrality(hopf):
    omega = hopf.reduction.omega
    report = integrality_check(omega, hopf.surface, 2 * math.pi)
    assert report.passed
    assert report.nearest == 1
    assert report.integral == pytest.approx(2 * math.pi, abs=1e-6)


def test_half_period_doubles_the_class(hopf):
    report = integrality_check(hopf.reduction.omega, hopf.surface, math.pi)
    assert report.passed and report.nearest == 2


def test_non_integral_period_fails(hopf):
    assert not integrality_check(hopf.reduction.omega, hopf.surface, 3.0).passed


def test_integrality_needs_a_positive_period(hopf):
    with pytest.raises(ContactError):
        integrality_check(hopf.reduction.omega, hopf.surface, -1.0)


def test_normal_form_of_hopf():
    normal = reduce_to_normal_form(hopf_normal_form(), "t")
    assert normal.base.coordinates == ("psi", "phi")
    y = (1.0, 0.4)
    assert normal.omega.at(y, (1.0, 0.0), (0.0, 1.0)) == pytest.approx(-math.sin(0.8))


def test_normal_form_needs_unit_fiber_coefficient(hopf):
    with pytest.raises(ReductionError):
        reduce_to_normal_form(hopf.contact, "xi1")
