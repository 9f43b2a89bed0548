import math

import pytest
from hypothesis import given, settings, strategies as st

from services.expression_service import (
    Constant,
    EvaluationDomainError,
    ExpressionSyntaxError,
    UnboundVariableError,
    UnknownIdentifierError,
    diff,
    evaluate,
    evaluate_at,
    free_variables,
    parse,
    substitute,
    to_text,
    var,
)

XY = ("x", "y")


@pytest.mark.parametrize(
    "text, binding, expected",
    [
        ("1 + 2 * 3", {}, 7.0),
        ("2^3^2", {}, 512.0),
        ("-x^2", {"x": 3.0}, 9.0),
        ("x / y - 1", {"x": 6.0, "y": 3.0}, 1.0),
        ("sin(pi / 2) + cos(0)", {}, 2.0),
        ("exp(log(x))", {"x": 2.5}, 2.5),
        ("sqrt(x) * 2", {"x": 4.0}, 4.0),
        ("1.5e1 + .5", {}, 15.5),
    ],
)
def test_parse_and_evaluate(text, binding, expected):
    expr = parse(text, list(binding) or XY)
    assert evaluate(expr, binding) == pytest.approx(expected, abs=1e-12)


def test_operators_build_the_parsed_tree():
    x, y = var("x"), var("y")
    built = (x * 2 + 1) / y - x ** 2
    parsed = parse("(x*2 + 1)/y - x^2", XY)
    binding = {"x": 0.7, "y": -1.3}
    assert evaluate(built, binding) == pytest.approx(evaluate(parsed, binding))


def test_declared_variable_shadows_constant():
    assert evaluate(parse("e + 1", ("e",)), {"e": 0.0}) == 1.0
    assert evaluate(parse("e", ()), {}) == pytest.approx(math.e)


def test_syntax_error_reports_byte_offset():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse("x + @", XY)
    assert info.value.offset == 4


def test_unbalanced_parenthesis():
    with pytest.raises(ExpressionSyntaxError):
        parse("sin(x", XY)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse("x + z", XY)
    with pytest.raises(UnknownIdentifierError):
        parse("sinh(x)", XY)


@pytest.mark.parametrize("text", ["x / 0", "x / -0", "x / (-(0.0))", "1 / --0"])
def test_literal_division_by_zero_is_rejected(text):
    with pytest.raises(ExpressionSyntaxError):
        parse(text, XY)


@pytest.mark.parametrize(
    "text, binding",
    [
        ("log(x)", {"x": 0.0}),
        ("sqrt(x)", {"x": -1.0}),
        ("1 / x", {"x": 0.0}),
        ("x^0.5", {"x": -4.0}),
    ],
)
def test_domain_errors(text, binding):
    with pytest.raises(EvaluationDomainError):
        evaluate(parse(text, XY), binding)


def test_unbound_variable():
    with pytest.raises(UnboundVariableError):
        evaluate(parse("x + y", XY), {"x": 1.0})


def test_positional_evaluation():
    assert evaluate_at(parse("x - 2*y", XY), XY, (1.0, 2.0)) == -3.0


def test_free_variables_and_substitute():
    expr = parse("x*y + sin(x)", XY)
    assert free_variables(expr) == {"x", "y"}
    replaced = substitute(expr, {"y": Constant(0.0)})
    assert free_variables(replaced) == {"x"}
    assert evaluate(replaced, {"x": 0.3}) == pytest.approx(math.sin(0.3))


@pytest.mark.parametrize(
    "text, name, expected",
    [
        ("x^3", "x", "3*x^2"),
        ("sin(x)*y", "x", "cos(x)*y"),
        ("x / y", "y", "-x/y^2"),
        ("exp(2*x)", "x", "2*exp(2*x)"),
        ("cos(x)^2", "x", "-2*cos(x)*sin(x)"),
        ("log(x*y)", "x", "1/x"),
        ("x^y", "y", "x^y*log(x)"),
    ],
)
def test_symbolic_derivatives(text, name, expected):
    got = diff(parse(text, XY), name)
    want = parse(expected, XY)
    for point in [(0.7, 1.3), (1.9, 0.4), (1.1, 2.2)]:
        assert evaluate_at(got, XY, point) == pytest.approx(evaluate_at(want, XY, point), rel=1e-12)


def test_derivative_of_absent_variable_is_zero():
    assert diff(parse("sin(x)", XY), "y") == Constant(0.0)


def _binary(op):
    return lambda pair: f"({pair[0]}) {op} ({pair[1]})"


# polynomial / trig mixes over x, y; squares only on leaves to keep growth bounded on [-1, 1]²
atom = st.one_of(
    st.sampled_from(["x", "y"]),
    st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_subnormal=False).map(lambda c: f"{c:.6f}"),
)
leaf = st.one_of(atom, atom.map(lambda a: f"({a})^2"))
expression_text = st.recursive(
    leaf,
    lambda inner: st.one_of(
        st.tuples(inner, inner).map(_binary("+")),
        st.tuples(inner, inner).map(_binary("-")),
        st.tuples(inner, inner).map(_binary("*")),
        inner.map(lambda a: f"sin({a})"),
        inner.map(lambda a: f"cos({a})"),
    ),
    max_leaves=6,
)
expressions = expression_text.map(lambda text: parse(text, XY))
unit = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)


def _close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


@settings(max_examples=100)
@given(expressions, unit, unit)
def test_generated_derivatives_match_central_differences(expr, x, y):
    h = 1e-5
    for i, name in enumerate(XY):
        p, m = [x, y], [x, y]
        p[i] += h
        m[i] -= h
        numeric = (evaluate_at(expr, XY, p) - evaluate_at(expr, XY, m)) / (2 * h)
        assert _close(evaluate_at(diff(expr, name), XY, (x, y)), numeric, 1e-7)


@settings(max_examples=100)
@given(expressions, expressions, unit, unit)
def test_product_rule(f, g, x, y):
    left = evaluate_at(diff(f * g, "x"), XY, (x, y))
    right = evaluate_at(diff(f, "x") * g + f * diff(g, "x"), XY, (x, y))
    assert _close(left, right, 1e-12)


@settings(max_examples=100)
@given(expressions, unit, unit)
def test_mixed_partials_commute(expr, x, y):
    xy = evaluate_at(diff(diff(expr, "x"), "y"), XY, (x, y))
    yx = evaluate_at(diff(diff(expr, "y"), "x"), XY, (x, y))
    assert _close(xy, yx, 1e-10)


@settings(max_examples=100)
@given(expressions, expressions, unit, unit, unit, unit)
def test_derivative_is_linear(f, g, a, b, x, y):
    left = evaluate_at(diff(a * f + b * g, "y"), XY, (x, y))
    right = a * evaluate_at(diff(f, "y"), XY, (x, y)) + b * evaluate_at(diff(g, "y"), XY, (x, y))
    assert _close(left, right, 1e-12)


@pytest.mark.parametrize("text", ["-x^2", "2^3^2", "(x - y) - (x + y)", "x / (y * 2)", "-(x + 1)", "sin(-x)^2"])
def test_printed_text_parses_back_to_the_same_values(text):
    expr = parse(text, XY)
    again = parse(to_text(expr), XY)
    for point in [(0.3, 1.7), (-1.2, 0.9)]:
        assert evaluate_at(again, XY, point) == pytest.approx(evaluate_at(expr, XY, point), rel=1e-15)
