import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from services.calculus_service import (
    Ball,
    CalculusError,
    Chart,
    ChartMismatchError,
    DifferentialForm,
    FormDegreeError,
    ParametrizedSurface,
    QuadratureError,
    SmoothMap,
    UnsupportedOperandError,
    VectorFieldHandle,
    bracket,
    exterior_derivative,
    gauss_legendre,
    interior_product,
    lie_derivative,
    pullback,
    sample_points,
    surface_integral,
    wedge,
)

R3 = Chart("r3", ("x", "y", "z"))
R2 = Chart("r2", ("u", "v"))

BASIS = ["x*y", "sin(z)", "exp(x) - y^2", "cos(x*z)", "x + y*z", "1", "y^3"]
scalar = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False, allow_subnormal=False)
coefficient = st.builds(
    lambda a, e1, b, e2: f"{a:.6f}*({e1}) + {b:.6f}*({e2})", scalar, st.sampled_from(BASIS), scalar, st.sampled_from(BASIS)
)
point = st.tuples(*(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False) for _ in range(3)))


def one_form(a, b, c):
    return DifferentialForm.parse(R3, {"x": a, "y": b, "z": c})


# Charts


def test_chart_rejects_bad_domains():
    with pytest.raises(CalculusError):
        Chart("bad", ("x", "x"))
    with pytest.raises(CalculusError):
        Chart("bad", ("x",), ((1.0, 0.0),))
    with pytest.raises(CalculusError):
        Chart("bad", ("x",), ((-math.inf, math.inf),), (True,))


def test_wrap_and_displacement():
    circle = Chart("circle", ("a",), ((0.0, 2 * math.pi),), (True,))
    assert circle.wrap([2 * math.pi + 0.5])[0] == pytest.approx(0.5)
    assert circle.displacement([0.1], [2 * math.pi - 0.1])[0] == pytest.approx(-0.2)


def test_samples_respect_margin_and_exclusions():
    chart = Chart("box", ("a", "b"), ((0.0, 1.0), (0.0, 1.0)), margin=0.05, excluded=(Ball((0.5, 0.5), 0.2),))
    points = sample_points(chart, 200, seed=3)
    assert points.shape == (200, 2)
    assert np.all(points > 0.05) and np.all(points < 0.95)
    assert np.all(np.linalg.norm(points - 0.5, axis=1) > 0.2)


def test_samples_are_seeded():
    assert np.array_equal(sample_points(R3, 10, seed=42), sample_points(R3, 10, seed=42))
    assert not np.array_equal(sample_points(R3, 10, seed=42), sample_points(R3, 10, seed=43))


# Exterior algebra


@given(coefficient, coefficient, coefficient, point)
def test_d_squared_vanishes(a, b, c, p):
    alpha = one_form(a, b, c)
    assert exterior_derivative(exterior_derivative(alpha)).max_abs(p) == pytest.approx(0.0, abs=1e-12)


def test_d_squared_cancels_symbolically():
    alpha = DifferentialForm.parse(R3, {"z": "x*y"})
    assert not exterior_derivative(alpha).is_zero
    assert exterior_derivative(exterior_derivative(alpha)).is_zero


def test_d_of_top_form_is_a_degree_error():
    volume = DifferentialForm.parse(R3, {("x", "y", "z"): "x"})
    with pytest.raises(FormDegreeError):
        exterior_derivative(volume)


@given(coefficient, coefficient, coefficient, coefficient, point)
def test_d_is_an_antiderivation(a, b, c, f, p):
    alpha = one_form(a, b, c)
    beta = DifferentialForm.parse(R3, {"z": f})
    left = exterior_derivative(wedge(alpha, beta))
    right = wedge(exterior_derivative(alpha), beta) - wedge(alpha, exterior_derivative(beta))
    assert (left - right).max_abs(p) == pytest.approx(0.0, abs=1e-9)


def test_wedge_is_graded_commutative():
    alpha = one_form("x", "y", "z")
    beta = one_form("y", "1", "x*z")
    p = (0.3, -0.2, 0.5)
    assert (wedge(alpha, beta) + wedge(beta, alpha)).max_abs(p) == pytest.approx(0.0, abs=1e-15)
    assert wedge(alpha, alpha).max_abs(p) == 0.0


def test_wedge_needs_matching_charts():
    with pytest.raises(ChartMismatchError):
        wedge(one_form("x", "y", "z"), DifferentialForm.parse(R2, {"u": "1"}))


def test_parse_with_unordered_pairs_picks_up_sign():
    omega = DifferentialForm.parse(R3, {("y", "x"): "1"})
    assert omega.at((0, 0, 0), (1, 0, 0), (0, 1, 0)) == -1.0


def test_matrix_and_covector_conventions():
    omega = DifferentialForm.parse(R3, {("x", "y"): "2"})
    m = omega.matrix((0, 0, 0))
    x, y = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    assert x @ m @ y == omega.at((0, 0, 0), x, y) == 2.0
    assert list(one_form("1", "x", "0").covector((3, 0, 0))) == [1.0, 3.0, 0.0]


# Interior product and Lie derivative


def test_interior_product_symbolic_matches_pointwise():
    omega = DifferentialForm.parse(R3, {("x", "y"): "z", ("y", "z"): "x*y"})
    field_ = VectorFieldHandle.parse(R3, {"x": "y", "z": "1"})
    symbolic = interior_product(field_, omega)
    pointwise = interior_product(field_.as_pointwise(), omega)
    for p in sample_points(R3, 20, seed=1):
        assert np.allclose(symbolic.covector(p), pointwise.covector(p), atol=1e-14)


@given(coefficient, coefficient, coefficient, point)
def test_cartan_formula_symbolic_vs_finite_difference(a, b, c, p):
    alpha = one_form(a, b, c)
    field_ = VectorFieldHandle.parse(R3, {"x": "y", "y": "-x", "z": "z^2"})
    symbolic = lie_derivative(field_, alpha, method="symbolic")
    numeric = lie_derivative(field_.as_pointwise(), alpha, method="finite_difference")
    assert np.allclose(symbolic.covector(p), numeric.covector(p), atol=1e-7)


@settings(max_examples=100)
@given(coefficient, coefficient, coefficient, coefficient, coefficient, coefficient, point)
def test_interior_product_is_an_antiderivation(a, b, c, f, g, h, p):
    alpha = one_form(a, b, c)
    beta = DifferentialForm.parse(R3, {("x", "y"): f, ("y", "z"): g, ("x", "z"): h})
    field_ = VectorFieldHandle.parse(R3, {"x": "y", "y": "z^2", "z": "1 - x"})
    left = interior_product(field_, wedge(alpha, beta))
    right = wedge(interior_product(field_, alpha), beta) - wedge(alpha, interior_product(field_, beta))
    assert (left - right).max_abs(p) == pytest.approx(0.0, abs=1e-10)


def test_symbolic_lie_derivative_needs_symbolic_operands():
    field_ = VectorFieldHandle.coordinate(R3, "x").as_pointwise()
    with pytest.raises(UnsupportedOperandError):
        lie_derivative(field_, one_form("y", "0", "0"), method="symbolic")


def test_lie_derivative_of_rotation_invariant_form():
    rotation = VectorFieldHandle.parse(R3, {"x": "-y", "y": "x"})
    alpha = one_form("-y", "x", "0")
    result = lie_derivative(rotation, alpha)
    assert max(result.max_abs(p) for p in sample_points(R3, 20, seed=2)) == pytest.approx(0.0, abs=1e-12)


def test_bracket_of_coordinate_fields():
    x = VectorFieldHandle.parse(R3, {"x": "1"})
    rotation = VectorFieldHandle.parse(R3, {"x": "-y", "y": "x"})
    assert np.allclose(bracket(x, rotation).at((0.4, 0.1, 0.2)), [0.0, 1.0, 0.0])
    with pytest.raises(UnsupportedOperandError):
        bracket(x.as_pointwise(), rotation)


# Pullback


def test_pullback_is_functorial():
    f = SmoothMap.parse(R2, R3, ["u*v", "sin(u)", "v^2"])
    g = SmoothMap.parse(R3, R3, ["x + y", "y*z", "exp(x)"])
    alpha = one_form("x*y", "z", "1")
    direct = pullback(g.compose(f), alpha)
    stepwise = pullback(f, pullback(g, alpha))
    for p in sample_points(R2, 20, seed=5):
        assert np.allclose(direct.covector(p), stepwise.covector(p), atol=1e-12)


def test_pullback_commutes_with_d():
    f = SmoothMap.parse(R2, R3, ["u", "v", "u*v"])
    alpha = one_form("y*z", "x", "x*y")
    left = exterior_derivative(pullback(f, alpha))
    right = pullback(f, exterior_derivative(alpha))
    assert (left - right).max_abs((0.3, 0.7)) == pytest.approx(0.0, abs=1e-12)


def test_pullback_of_the_area_form_along_u_squared():
    plane = Chart("qp", ("q", "p"))
    f = SmoothMap.parse(R2, plane, ["u^2", "v"])
    area = pullback(f, DifferentialForm.parse(plane, {("q", "p"): "1"}))
    assert area.degree == 2
    assert area.at((0.3, 0.5), (1.0, 0.0), (0.0, 1.0)) == pytest.approx(0.6)
    for p in sample_points(R2, 10, seed=3):
        assert area.at(p, (1.0, 0.0), (0.0, 1.0)) == pytest.approx(2 * p[0], abs=1e-14)


# Quadrature


def test_gauss_legendre_is_exact_for_polynomials():
    nodes, weights = gauss_legendre((0.0, 2.0), 8)
    assert weights @ nodes**5 == pytest.approx(2.0**6 / 6, rel=1e-13)


def test_sphere_area_form_integrates_to_two_pi():
    base = Chart("base", ("phi", "psi"), ((0.0, math.pi / 2), (0.0, 2 * math.pi)), (False, True))
    params = Chart("params", ("phi", "psi"), base.domain, base.periodic, margin=0.0)
    surface = ParametrizedSurface(SmoothMap.parse(params, base, ["phi", "psi"]), periodic=(False, True), collapsed=(True, False))
    omega = DifferentialForm.parse(base, {("phi", "psi"): "sin(2*phi)"})
    assert surface.closed
    assert surface_integral(omega, surface) == pytest.approx(2 * math.pi, abs=1e-6)


def test_surface_integral_grid_floor():
    params = Chart("square", ("u", "v"), ((0.0, 1.0), (0.0, 1.0)))
    surface = ParametrizedSurface(SmoothMap.identity(params))
    omega = DifferentialForm.parse(params, {("u", "v"): "1"})
    assert not surface.closed
    assert surface_integral(omega, surface, (8, 8)) == pytest.approx(1.0)
    with pytest.raises(CalculusError):
        surface_integral(omega, surface, (4, 8))


def test_quadrature_reports_the_failing_node():
    params = Chart("square", ("u", "v"), ((0.0, 1.0), (-1.0, 1.0)))
    surface = ParametrizedSurface(SmoothMap.identity(params))
    omega = DifferentialForm.parse(params, {("u", "v"): "log(v)"})
    with pytest.raises(QuadratureError) as info:
        surface_integral(omega, surface, (8, 8))
    assert info.value.node[1] < 0


TORUS_PARAMS = Chart("torus", ("u", "v"), ((0.0, 2 * math.pi), (0.0, 2 * math.pi)), (True, True), margin=0.0)
TORUS = ParametrizedSurface(
    SmoothMap.parse(TORUS_PARAMS, R3, ["(2 + cos(v))*cos(u)", "(2 + cos(v))*sin(u)", "sin(v)"]),
    periodic=(True, True),
)


@pytest.mark.parametrize(
    "a, b, c",
    [("x*y", "sin(z)", "x + y*z"), ("y^3", "cos(x*z)", "x*y"), ("z", "x", "y"), ("-y", "x", "0")],
)
def test_exact_forms_integrate_to_zero_over_a_torus(a, b, c):
    assert TORUS.closed
    assert surface_integral(exterior_derivative(one_form(a, b, c)), TORUS, (48, 48)) == pytest.approx(0.0, abs=1e-8)
