import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from services.calculus_service import Chart, DifferentialForm, SmoothMap
from services.catalog_service import load
from services.products_service import (
    CommensurabilityError,
    LegendrianCandidate,
    LegendrianDimensionError,
    PrincipalLocalData,
    PrincipalPeriodPair,
    ProductError,
    as_period,
    bezout,
    check_legendrian,
    contact_product,
    distribution_witness,
    graph_c,
    principal_product,
    principal_product_checks,
    principal_product_form,
    principal_product_period,
    reeb_translation,
    scaled_period,
    torus_first_return,
)

# Periods


@pytest.mark.parametrize("k, l", [(6, 4), (4, 6), (35, 21), (1, 1), (17, 5)])
def test_bezout(k, l):
    x, y, g = bezout(k, l)
    assert g == math.gcd(k, l)
    assert k * x + l * y == g


def test_six_and_four():
    pair = PrincipalPeriodPair.of(6, 4)
    assert (pair.k, pair.l) == (2, 3)
    assert principal_product_period(6, 4) == 2
    assert torus_first_return(Fraction(1, 6), Fraction(1, 4)) == 2


@pytest.mark.parametrize(
    "rho1, rho2, k, l",
    [(Fraction(3, 2), Fraction(5, 4), 5, 6), (Fraction(7, 3), 14, 6, 1), (10, Fraction(4, 9), 2, 45)],
)
def test_pair_reduces_rational_ratios(rho1, rho2, k, l):
    pair = PrincipalPeriodPair.of(rho1, rho2)
    assert (pair.k, pair.l) == (k, l)
    assert Fraction(pair.k, pair.l) == Fraction(rho2) / Fraction(rho1)
    assert principal_product_period(rho1, rho2) == Fraction(rho2) / k


def test_periods_accept_text():
    assert as_period("3/2") == Fraction(3, 2)
    assert as_period("inf") == math.inf
    assert principal_product_period("3/2", "5/4") == Fraction(1, 4)


def test_one_infinite_period_gives_the_other():
    assert principal_product_period("inf", 4) == 4
    assert principal_product_period(Fraction(2, 3), math.inf) == Fraction(2, 3)
    assert PrincipalPeriodPair.of(math.inf, 4).k is None


@pytest.mark.parametrize("bad", [0.5, 2 * math.pi, "pi", True])
def test_inexact_periods_are_rejected(bad):
    with pytest.raises(CommensurabilityError):
        as_period(bad)


def test_non_positive_period():
    with pytest.raises(ProductError):
        principal_product_period(0, 4)


def test_scaling_both_forms_scales_the_period():
    assert scaled_period(6, 4, 3) == 3 * principal_product_period(6, 4)


def test_torus_needs_a_plus_b_equal_one():
    with pytest.raises(ProductError):
        torus_first_return(1, 1, Fraction(1, 2), Fraction(1, 3))


@given(
    st.integers(min_value=1, max_value=30),
    st.integers(min_value=1, max_value=30),
    st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=12),
)
def test_principal_period_matches_torus_first_return(k, l, rho):
    assume(math.gcd(k, l) == 1 and rho > 0)
    rho1, rho2 = l * rho, k * rho
    assert principal_product_period(rho1, rho2) == rho
    assert torus_first_return(1 / rho1, 1 / rho2) == rho


# Contact products


@pytest.fixture(scope="module")
def darboux_product():
    darboux1 = load("darboux(1)")
    return darboux1, contact_product(darboux1.contact, darboux1.contact)


def test_product_reeb_fields(darboux_product):
    _, product = darboux_product
    reports = product.reeb_checks(samples=50)
    assert reports["product_reeb"].passed
    assert reports["product_reeb_alternate"].passed


def test_product_kernels_agree(darboux_product):
    _, product = darboux_product
    assert product.kernel_agreement(samples=50).passed


def test_product_coordinates(darboux_product):
    _, product = darboux_product
    assert product.chart.coordinates == ("z_1", "q1_1", "p1_1", "z_2", "q1_2", "p1_2", "t")
    assert product.chart.domain[-1] == (0.0, math.inf)


def test_distribution_witness_has_corank_one(darboux_product):
    _, product = darboux_product
    for point in product.sample(10, seed=2):
        witness = distribution_witness(product, point)
        assert witness.shape == (7, 6)
        assert np.linalg.matrix_rank(witness) == 6


def test_unknown_component(darboux1):
    with pytest.raises(ProductError):
        contact_product(darboux1.contact, darboux1.contact, "zero")


def test_hopf_with_darboux_product_is_contact(hopf, darboux1):
    product = contact_product(hopf.contact, darboux1.contact, "neg")
    assert product.contact.report.passed
    assert product.chart.domain[-1] == (-math.inf, 0.0)
    assert all(r.passed for r in product.reeb_checks(samples=30).values())


# Legendrian graphs


def test_graph_of_a_reeb_translation_is_legendrian(darboux1):
    product = contact_product(darboux1.contact, darboux1.contact, "neg")
    phi = reeb_translation(darboux1.contact, 0.5)
    assert phi.at((0.0, 0.1, 0.2))[0] == 0.5
    report = check_legendrian(product, graph_c(product, phi, 1.0), samples=50)
    assert report.passed


def test_wrong_conformal_factor_is_not_legendrian(darboux1):
    product = contact_product(darboux1.contact, darboux1.contact, "neg")
    identity = SmoothMap.identity(darboux1.chart)
    report = check_legendrian(product, graph_c(product, identity, 2.0), samples=50)
    assert not report.passed


def test_graph_must_stay_on_its_component(darboux1):
    product = contact_product(darboux1.contact, darboux1.contact, "pos")
    with pytest.raises(ProductError):
        check_legendrian(product, graph_c(product, SmoothMap.identity(darboux1.chart), 1.0), samples=5)


def test_reeb_translation_needs_an_unbounded_fiber(hopf):
    point = hopf.contact.sample(1)[0]
    assert np.array_equal(reeb_translation(hopf.contact).at(point), point)


def test_legendrian_dimension(darboux1):
    product = contact_product(darboux1.contact, darboux1.contact, "neg")
    line = Chart("line", ("s",))
    curve = SmoothMap.parse(line, product.chart, ["s", "0", "0", "s", "0", "0", "-1"])
    with pytest.raises(LegendrianDimensionError):
        check_legendrian(product, LegendrianCandidate(curve), samples=5)


# Principal products


def _plane(name):
    base = Chart(name, ("q", "p"))
    return PrincipalLocalData(base, DifferentialForm.parse(base, {"q": "-p"}))


def test_principal_product_checks():
    product = principal_product(_plane("left"), _plane("right"), period=6)
    assert product.contact.chart.domain[-1] == (0.0, 6.0)
    assert product.contact.chart.periodic[-1]
    reports = principal_product_checks(product, samples=50)
    assert all(r.passed for r in reports.values()), reports


def test_principal_product_form_without_period():
    contact = principal_product_form(_plane("left"), _plane("right"), samples=30)
    assert contact.chart.coordinates == ("q_1", "p_1", "q_2", "p_2", "t")
    assert contact.chart.domain[-1] == (-math.inf, math.inf)
