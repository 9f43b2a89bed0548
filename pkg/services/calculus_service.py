"""Exterior calculus on a single coordinate chart.

Forms carry symbolic coefficients (``Expr``) over strictly increasing
multi-indices; vector fields are either symbolic or resolved pointwise.
Anything that involves a pointwise field becomes a ``PointwiseForm`` and
is checked by sampling.
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from config import get_settings
from services.expression_service import (
    ZERO,
    Expr,
    ExpressionError,
    ExprLike,
    Variable,
    as_expr,
    compiled,
    diff,
    is_constant,
    parse,
    substitute,
)

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]
Interval = Tuple[float, float]
Point = Union[Sequence[float], np.ndarray]


class CalculusError(ValueError):
    """Base class for exterior-calculus failures."""


class ChartMismatchError(CalculusError):
    pass


class FormDegreeError(CalculusError):
    pass


class UnsupportedOperandError(CalculusError):
    pass


class QuadratureError(CalculusError):
    def __init__(self, message: str, node: Tuple[float, float]):
        super().__init__(f"{message} at node {node}")
        self.node = node


# Charts


@dataclass(frozen=True)
class Ball:
    """A closed ball removed from a chart domain."""

    center: Tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class Chart:
    name: str
    coordinates: Tuple[str, ...]
    domain: Optional[Tuple[Interval, ...]] = None
    periodic: Optional[Tuple[bool, ...]] = None
    margin: float = 1e-3
    excluded: Tuple[Ball, ...] = ()

    def __post_init__(self):
        coordinates = tuple(self.coordinates)
        object.__setattr__(self, "coordinates", coordinates)
        d = len(coordinates)
        if len(set(coordinates)) != d:
            raise CalculusError(f"chart {self.name}: coordinate names are not distinct")
        domain = self.domain or tuple((-math.inf, math.inf) for _ in coordinates)
        domain = tuple((float(lo), float(hi)) for lo, hi in domain)
        periodic = tuple(bool(flag) for flag in (self.periodic or (False,) * d))
        if len(domain) != d or len(periodic) != d:
            raise CalculusError(f"chart {self.name}: domain/periodic flags do not match {d} coordinates")
        for name, (lo, hi), flag in zip(coordinates, domain, periodic):
            if not lo < hi:
                raise CalculusError(f"chart {self.name}: empty interval for {name}")
            if flag and not (math.isfinite(lo) and math.isfinite(hi)):
                raise CalculusError(f"chart {self.name}: periodic coordinate {name} needs a finite interval")
        if self.margin < 0:
            raise CalculusError("margin must be non-negative")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "periodic", periodic)
        object.__setattr__(self, "excluded", tuple(self.excluded))

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    def index(self, name: str) -> int:
        try:
            return self.coordinates.index(name)
        except ValueError:
            raise CalculusError(f"chart {self.name} has no coordinate {name!r}") from None

    def wrap(self, point: Point) -> np.ndarray:
        x = np.array(point, dtype=float)
        for i, flag in enumerate(self.periodic):
            if flag:
                lo, hi = self.domain[i]
                x[i] = lo + (x[i] - lo) % (hi - lo)
        return x

    def displacement(self, a: Point, b: Point) -> np.ndarray:
        """``b - a`` with periodic coordinates wrapped to the nearest image."""
        delta = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        for i, flag in enumerate(self.periodic):
            if flag:
                lo, hi = self.domain[i]
                period = hi - lo
                delta[i] = (delta[i] + period / 2) % period - period / 2
        return delta

    def contains(self, point: Point, margin: float = 0.0) -> bool:
        x = self.wrap(point)
        for i, flag in enumerate(self.periodic):
            lo, hi = self.domain[i]
            if not flag and not (lo + margin < x[i] < hi - margin):
                return False
        for ball in self.excluded:
            if np.linalg.norm(self.displacement(ball.center, x)) <= ball.radius + margin:
                return False
        return True

    def sampling_box(self, extent: Optional[float] = None) -> List[Interval]:
        extent = get_settings().sample_extent if extent is None else extent
        box = []
        for lo, hi in self.domain:
            if math.isfinite(lo) and math.isfinite(hi):
                box.append((lo + self.margin, hi - self.margin))
            elif math.isfinite(lo):
                box.append((lo + self.margin, lo + 2 * extent))
            elif math.isfinite(hi):
                box.append((hi - 2 * extent, hi - self.margin))
            else:
                box.append((-extent, extent))
        return box

    def sample(self, count: int, rng: np.random.Generator, extent: Optional[float] = None) -> np.ndarray:
        box = np.array(self.sampling_box(extent))
        points = []
        attempts = 0
        while len(points) < count:
            attempts += 1
            if attempts > 1000 * max(count, 1):
                raise CalculusError(f"chart {self.name}: could not sample {count} interior points")
            x = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random(self.dimension)
            if self.contains(x, self.margin):
                points.append(x)
        return np.array(points).reshape(count, self.dimension)

    def renamed(self, name: str, renaming: Mapping[str, str]) -> "Chart":
        return Chart(
            name=name,
            coordinates=tuple(renaming.get(c, c) for c in self.coordinates),
            domain=self.domain,
            periodic=self.periodic,
            margin=self.margin,
            excluded=self.excluded,
        )


def sample_points(chart: Chart, count: int, seed: int, extent: Optional[float] = None) -> np.ndarray:
    """Seeded sample of interior points (at distance >= margin from the boundary)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return chart.sample(count, rng, extent)


def _same_chart(a: Chart, b: Chart, what: str) -> None:
    if a != b:
        raise ChartMismatchError(f"{what}: chart {a.name} differs from chart {b.name}")


def _sorted_with_sign(indices: Sequence[int]) -> Tuple[int, Optional[MultiIndex]]:
    if len(set(indices)) != len(indices):
        return 0, None
    inversions = sum(1 for i in range(len(indices)) for j in range(i + 1, len(indices)) if indices[i] > indices[j])
    return (-1 if inversions % 2 else 1), tuple(sorted(indices))


def _contract(values: Mapping[MultiIndex, float], vector: np.ndarray) -> Dict[MultiIndex, float]:
    out: Dict[MultiIndex, float] = defaultdict(float)
    for index, c in values.items():
        for r, i in enumerate(index):
            out[index[:r] + index[r + 1:]] += (-1) ** r * vector[i] * c
    return dict(out)


# Pointwise evaluation shared by symbolic and pointwise forms


class _PointEvaluation:
    chart: Chart
    degree: int

    def evaluate(self, point: Point) -> Dict[MultiIndex, float]:
        raise NotImplementedError

    def at(self, point: Point, *vectors: Point) -> float:
        """ω(V₁, …, V_k) at ``point``."""
        if len(vectors) != self.degree:
            raise FormDegreeError(f"{self.degree}-form evaluated on {len(vectors)} vectors")
        values = self.evaluate(point)
        if self.degree == 0:
            return values.get((), 0.0)
        v = np.array(vectors, dtype=float)
        return float(sum(c * np.linalg.det(v[:, list(index)]) for index, c in values.items()))

    def covector(self, point: Point) -> np.ndarray:
        if self.degree != 1:
            raise FormDegreeError("covector() needs a 1-form")
        out = np.zeros(self.chart.dimension)
        for (i,), c in self.evaluate(point).items():
            out[i] = c
        return out

    def matrix(self, point: Point) -> np.ndarray:
        """Antisymmetric matrix M with ω(X, Y) = Xᵀ M Y."""
        if self.degree != 2:
            raise FormDegreeError("matrix() needs a 2-form")
        d = self.chart.dimension
        out = np.zeros((d, d))
        for (i, j), c in self.evaluate(point).items():
            out[i, j] = c
            out[j, i] = -c
        return out

    def max_abs(self, point: Point) -> float:
        return max((abs(c) for c in self.evaluate(point).values()), default=0.0)


@dataclass(frozen=True)
class PointwiseForm(_PointEvaluation):
    chart: Chart
    degree: int
    evaluator: Callable[[np.ndarray], Dict[MultiIndex, float]] = field(compare=False)

    def evaluate(self, point: Point) -> Dict[MultiIndex, float]:
        return self.evaluator(np.asarray(point, dtype=float))


@dataclass(frozen=True)
class DifferentialForm(_PointEvaluation):
    chart: Chart
    degree: int
    terms: Tuple[Tuple[MultiIndex, Expr], ...] = ()

    def __post_init__(self):
        d = self.chart.dimension
        if not 0 <= self.degree <= d:
            raise FormDegreeError(f"degree {self.degree} outside 0..{d}")
        for index, _ in self.terms:
            if len(index) != self.degree or list(index) != sorted(set(index)) or (index and index[-1] >= d):
                raise FormDegreeError(f"{index} is not a strictly increasing {self.degree}-index on {self.chart.name}")

    @classmethod
    def build(cls, chart: Chart, degree: int, coefficients: Mapping[MultiIndex, ExprLike]) -> "DifferentialForm":
        terms = tuple(
            (tuple(index), as_expr(c))
            for index, c in sorted(coefficients.items())
            if not is_constant(as_expr(c), 0.0)
        )
        return cls(chart, degree, terms)

    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "DifferentialForm":
        return cls(chart, degree, ())

    @classmethod
    def function(cls, chart: Chart, expr: ExprLike) -> "DifferentialForm":
        return cls.build(chart, 0, {(): expr})

    @classmethod
    def differential(cls, chart: Chart, name: str) -> "DifferentialForm":
        return cls.build(chart, 1, {(chart.index(name),): 1.0})

    @classmethod
    def parse(cls, chart: Chart, coefficients: Mapping[Union[str, Tuple[str, ...]], Union[str, ExprLike]]) -> "DifferentialForm":
        """Build a form from ``{coordinate(s): coefficient}``.

        Keys are a coordinate name (1-forms) or a tuple of names, in any
        order; unordered tuples pick up the permutation sign.
        """
        degree = None
        acc: Dict[MultiIndex, Expr] = defaultdict(lambda: ZERO)
        for key, value in coefficients.items():
            names = (key,) if isinstance(key, str) else tuple(key)
            if degree is None:
                degree = len(names)
            elif degree != len(names):
                raise FormDegreeError("mixed degrees in form coefficients")
            expr = parse(value, chart.coordinates) if isinstance(value, str) else as_expr(value)
            sign, index = _sorted_with_sign([chart.index(n) for n in names])
            if sign == 0:
                continue
            acc[index] = acc[index] + (expr if sign > 0 else -expr)
        return cls.build(chart, degree or 0, acc)

    @property
    def coefficients(self) -> Dict[MultiIndex, Expr]:
        return dict(self.terms)

    def coefficient(self, index: MultiIndex) -> Expr:
        return self.coefficients.get(tuple(index), ZERO)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @cached_property
    def _evaluators(self):
        return [(index, compiled(c, self.chart.coordinates)) for index, c in self.terms]

    def evaluate(self, point: Point) -> Dict[MultiIndex, float]:
        return {index: float(fn(point)) for index, fn in self._evaluators}

    def pointwise(self) -> PointwiseForm:
        return PointwiseForm(self.chart, self.degree, self.evaluate)

    def _combine(self, other: "DifferentialForm", sign: float) -> "DifferentialForm":
        _same_chart(self.chart, other.chart, "form sum")
        if self.degree != other.degree:
            raise FormDegreeError("cannot add forms of different degree")
        acc = dict(self.terms)
        for index, c in other.terms:
            acc[index] = acc.get(index, ZERO) + (c if sign > 0 else -c)
        return DifferentialForm.build(self.chart, self.degree, acc)

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        return self._combine(other, 1.0)

    def __sub__(self, other: "DifferentialForm") -> "DifferentialForm":
        return self._combine(other, -1.0)

    def __neg__(self) -> "DifferentialForm":
        return self.scaled(-1.0)

    def scaled(self, factor: ExprLike) -> "DifferentialForm":
        factor = as_expr(factor)
        return DifferentialForm.build(self.chart, self.degree, {i: factor * c for i, c in self.terms})

    def __rmul__(self, factor: ExprLike) -> "DifferentialForm":
        return self.scaled(factor)

    def moved(self, target: Chart, renaming: Optional[Mapping[str, str]] = None) -> "DifferentialForm":
        """Re-express on ``target``, whose coordinates include the renamed ones."""
        renaming = dict(renaming or {})
        substitution = {old: Variable(new) for old, new in renaming.items() if old != new}
        acc: Dict[MultiIndex, Expr] = defaultdict(lambda: ZERO)
        for index, c in self.terms:
            names = [renaming.get(self.chart.coordinates[i], self.chart.coordinates[i]) for i in index]
            sign, new_index = _sorted_with_sign([target.index(n) for n in names])
            expr = substitute(c, substitution) if substitution else c
            acc[new_index] = acc[new_index] + (expr if sign > 0 else -expr)
        return DifferentialForm.build(target, self.degree, acc)

    def __str__(self):
        if not self.terms:
            return "0"
        coords = self.chart.coordinates
        parts = []
        for index, c in self.terms:
            basis = "∧".join(f"d{coords[i]}" for i in index)
            parts.append(f"({c})" + (f" {basis}" if basis else ""))
        return " + ".join(parts)


Form = Union[DifferentialForm, PointwiseForm]


# Vector fields and maps


@dataclass(frozen=True)
class VectorFieldHandle:
    chart: Chart
    components: Optional[Tuple[Expr, ...]] = None
    resolver: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if (self.components is None) == (self.resolver is None):
            raise CalculusError("a vector field needs exactly one of components or resolver")
        if self.components is not None:
            components = tuple(as_expr(c) for c in self.components)
            if len(components) != self.chart.dimension:
                raise CalculusError(f"{len(components)} components on a {self.chart.dimension}-chart")
            object.__setattr__(self, "components", components)

    @classmethod
    def symbolic(cls, chart: Chart, components: Sequence[ExprLike]) -> "VectorFieldHandle":
        return cls(chart, tuple(as_expr(c) for c in components))

    @classmethod
    def parse(cls, chart: Chart, components: Mapping[str, Union[str, ExprLike]]) -> "VectorFieldHandle":
        values = [ZERO] * chart.dimension
        for name, value in components.items():
            values[chart.index(name)] = parse(value, chart.coordinates) if isinstance(value, str) else as_expr(value)
        return cls(chart, tuple(values))

    @classmethod
    def coordinate(cls, chart: Chart, name: str) -> "VectorFieldHandle":
        return cls.parse(chart, {name: 1.0})

    @classmethod
    def pointwise(cls, chart: Chart, resolver: Callable[[np.ndarray], np.ndarray]) -> "VectorFieldHandle":
        return cls(chart, None, resolver)

    @property
    def is_symbolic(self) -> bool:
        return self.components is not None

    @cached_property
    def _evaluators(self):
        return [compiled(c, self.chart.coordinates) for c in self.components]

    def at(self, point: Point) -> np.ndarray:
        if self.components is not None:
            return np.array([fn(point) for fn in self._evaluators], dtype=float)
        return np.asarray(self.resolver(np.asarray(point, dtype=float)), dtype=float)

    def as_pointwise(self) -> "VectorFieldHandle":
        return VectorFieldHandle.pointwise(self.chart, self.at)

    def apply(self, f: Expr) -> Expr:
        """X(f) for a symbolic field."""
        if self.components is None:
            raise UnsupportedOperandError("X(f) symbolically needs a symbolic field")
        total: Expr = ZERO
        for name, c in zip(self.chart.coordinates, self.components):
            total = total + c * diff(f, name)
        return total

    def _combine(self, other: "VectorFieldHandle", sign: float) -> "VectorFieldHandle":
        _same_chart(self.chart, other.chart, "vector field sum")
        if self.is_symbolic and other.is_symbolic:
            return VectorFieldHandle.symbolic(
                self.chart, [a + b if sign > 0 else a - b for a, b in zip(self.components, other.components)]
            )
        return VectorFieldHandle.pointwise(self.chart, lambda p: self.at(p) + sign * other.at(p))

    def __add__(self, other: "VectorFieldHandle") -> "VectorFieldHandle":
        return self._combine(other, 1.0)

    def __sub__(self, other: "VectorFieldHandle") -> "VectorFieldHandle":
        return self._combine(other, -1.0)

    def scaled(self, factor: ExprLike) -> "VectorFieldHandle":
        factor = as_expr(factor)
        if self.is_symbolic:
            return VectorFieldHandle.symbolic(self.chart, [factor * c for c in self.components])
        fn = compiled(factor, self.chart.coordinates)
        return VectorFieldHandle.pointwise(self.chart, lambda p: fn(p) * self.at(p))

    def __neg__(self) -> "VectorFieldHandle":
        return self.scaled(-1.0)


@dataclass(frozen=True)
class SmoothMap:
    source: Chart
    target: Chart
    components: Tuple[Expr, ...]

    def __post_init__(self):
        components = tuple(as_expr(c) for c in self.components)
        if len(components) != self.target.dimension:
            raise CalculusError(f"map needs {self.target.dimension} components, got {len(components)}")
        object.__setattr__(self, "components", components)

    @classmethod
    def parse(cls, source: Chart, target: Chart, components: Sequence[Union[str, ExprLike]]) -> "SmoothMap":
        return cls(
            source,
            target,
            tuple(parse(c, source.coordinates) if isinstance(c, str) else as_expr(c) for c in components),
        )

    @classmethod
    def identity(cls, chart: Chart) -> "SmoothMap":
        return cls(chart, chart, tuple(Variable(name) for name in chart.coordinates))

    @cached_property
    def _evaluators(self):
        return [compiled(c, self.source.coordinates) for c in self.components]

    @cached_property
    def jacobian_exprs(self) -> Tuple[Tuple[Expr, ...], ...]:
        return tuple(tuple(diff(c, y) for y in self.source.coordinates) for c in self.components)

    @cached_property
    def _jacobian_evaluators(self):
        return [[compiled(e, self.source.coordinates) for e in row] for row in self.jacobian_exprs]

    def at(self, point: Point) -> np.ndarray:
        return np.array([fn(point) for fn in self._evaluators], dtype=float)

    def jacobian(self, point: Point) -> np.ndarray:
        return np.array([[fn(point) for fn in row] for row in self._jacobian_evaluators], dtype=float)

    def pull_function(self, expr: Expr) -> Expr:
        return substitute(expr, dict(zip(self.target.coordinates, self.components)))

    def compose(self, inner: "SmoothMap") -> "SmoothMap":
        """``self ∘ inner``."""
        _same_chart(inner.target, self.source, "map composition")
        substitution = dict(zip(self.source.coordinates, inner.components))
        return SmoothMap(inner.source, self.target, tuple(substitute(c, substitution) for c in self.components))


@dataclass(frozen=True)
class ParametrizedSurface:
    """A map from a parameter rectangle (the source chart's domain) into a chart.

    The surface is closed when each parameter is periodic or has both of
    its edges collapsed to points.
    """

    map: SmoothMap
    periodic: Tuple[bool, bool] = (False, False)
    collapsed: Tuple[bool, bool] = (False, False)
    margin: float = 0.0

    def __post_init__(self):
        if self.map.source.dimension != 2:
            raise CalculusError("a parametrized surface needs two parameters")
        for lo, hi in self.map.source.domain:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise CalculusError("the parameter rectangle must be bounded")

    @property
    def rectangle(self) -> Tuple[Interval, Interval]:
        (a1, b1), (a2, b2) = self.map.source.domain
        m = self.margin
        return (a1 + m, b1 - m), (a2 + m, b2 - m)

    @property
    def closed(self) -> bool:
        return all(p or c for p, c in zip(self.periodic, self.collapsed))


# Operations


def exterior_derivative(form: DifferentialForm) -> DifferentialForm:
    chart = form.chart
    d = chart.dimension
    if form.degree >= d:
        raise FormDegreeError(f"d of a {form.degree}-form on a {d}-chart has no valid degree")
    acc: Dict[MultiIndex, Expr] = defaultdict(lambda: ZERO)
    for index, c in form.terms:
        for j, name in enumerate(chart.coordinates):
            if j in index:
                continue
            partial = diff(c, name)
            if is_constant(partial, 0.0):
                continue
            sign, new_index = _sorted_with_sign((j,) + index)
            acc[new_index] = acc[new_index] + (partial if sign > 0 else -partial)
    return DifferentialForm.build(chart, form.degree + 1, acc)


def wedge(alpha: DifferentialForm, beta: DifferentialForm) -> DifferentialForm:
    _same_chart(alpha.chart, beta.chart, "wedge")
    degree = alpha.degree + beta.degree
    if degree > alpha.chart.dimension:
        raise FormDegreeError(f"wedge of degree {degree} exceeds dimension {alpha.chart.dimension}")
    acc: Dict[MultiIndex, Expr] = defaultdict(lambda: ZERO)
    for i, a in alpha.terms:
        for j, b in beta.terms:
            sign, index = _sorted_with_sign(i + j)
            if sign == 0:
                continue
            product = a * b
            acc[index] = acc[index] + (product if sign > 0 else -product)
    return DifferentialForm.build(alpha.chart, degree, acc)


def interior_product(field_: VectorFieldHandle, form: Form) -> Form:
    _same_chart(field_.chart, form.chart, "interior product")
    if form.degree < 1:
        raise FormDegreeError("interior product needs a form of degree >= 1")
    if field_.is_symbolic and isinstance(form, DifferentialForm):
        acc: Dict[MultiIndex, Expr] = defaultdict(lambda: ZERO)
        for index, c in form.terms:
            for r, i in enumerate(index):
                rest = index[:r] + index[r + 1:]
                term = field_.components[i] * c
                acc[rest] = acc[rest] + (term if r % 2 == 0 else -term)
        return DifferentialForm.build(form.chart, form.degree - 1, acc)
    return PointwiseForm(form.chart, form.degree - 1, lambda p: _contract(form.evaluate(p), field_.at(p)))


def _numeric_exterior_derivative(form: Form, point: np.ndarray, step: float) -> Dict[MultiIndex, float]:
    """Central-difference d of a pointwise form at one point (error O(step²))."""
    out: Dict[MultiIndex, float] = defaultdict(float)
    for j in range(form.chart.dimension):
        shift = np.zeros(form.chart.dimension)
        shift[j] = step
        plus = form.evaluate(point + shift)
        minus = form.evaluate(point - shift)
        for index in set(plus) | set(minus):
            if j in index:
                continue
            sign, new_index = _sorted_with_sign((j,) + index)
            out[new_index] += sign * (plus.get(index, 0.0) - minus.get(index, 0.0)) / (2 * step)
    return dict(out)


def lie_derivative_symbolic(field_: VectorFieldHandle, form: DifferentialForm) -> DifferentialForm:
    """Cartan's formula L_X = i_X d + d i_X with everything symbolic."""
    if not field_.is_symbolic:
        raise UnsupportedOperandError("symbolic Lie derivative needs a symbolic field")
    _same_chart(field_.chart, form.chart, "Lie derivative")
    result = DifferentialForm.zero(form.chart, form.degree)
    if form.degree < form.chart.dimension:
        result = result + interior_product(field_, exterior_derivative(form))
    if form.degree > 0:
        result = result + exterior_derivative(interior_product(field_, form))
    return result


def lie_derivative(
    field_: VectorFieldHandle,
    form: Form,
    method: str = "auto",
    step: Optional[float] = None,
) -> PointwiseForm:
    """L_X ω as a pointwise form.

    ``method`` is ``"symbolic"``, ``"finite_difference"`` or ``"auto"``
    (symbolic whenever both operands are). The finite-difference variant
    differentiates i_X ω by central differences with ``step`` (default
    ``Settings.fd_step``), accurate to O(step²).
    """
    _same_chart(field_.chart, form.chart, "Lie derivative")
    if method not in ("auto", "symbolic", "finite_difference"):
        raise CalculusError(f"unknown Lie derivative method {method!r}")
    symbolic_ok = field_.is_symbolic and isinstance(form, DifferentialForm)
    if method == "symbolic" or (method == "auto" and symbolic_ok):
        if not symbolic_ok:
            raise UnsupportedOperandError("symbolic Lie derivative needs a symbolic field and form")
        return lie_derivative_symbolic(field_, form).pointwise()

    h = get_settings().fd_step if step is None else step
    chart = form.chart
    k = form.degree
    d_form: Optional[Form] = None
    if k < chart.dimension and isinstance(form, DifferentialForm):
        d_form = exterior_derivative(form)
    contracted = PointwiseForm(chart, k - 1, lambda p: _contract(form.evaluate(p), field_.at(p))) if k > 0 else None

    def evaluator(point: np.ndarray) -> Dict[MultiIndex, float]:
        out: Dict[MultiIndex, float] = defaultdict(float)
        if k < chart.dimension:
            d_values = d_form.evaluate(point) if d_form is not None else _numeric_exterior_derivative(form, point, h)
            for index, c in _contract(d_values, field_.at(point)).items():
                out[index] += c
        if contracted is not None:
            for index, c in _numeric_exterior_derivative(contracted, point, h).items():
                out[index] += c
        return dict(out)

    return PointwiseForm(chart, k, evaluator)


def pullback(mapping: SmoothMap, form: DifferentialForm) -> DifferentialForm:
    _same_chart(mapping.target, form.chart, "pullback")
    source = mapping.source
    if form.degree > source.dimension:
        raise FormDegreeError(f"cannot pull a {form.degree}-form back to a {source.dimension}-chart")
    if form.degree == 0:
        return DifferentialForm.function(source, mapping.pull_function(form.coefficient(())))
    images = [
        DifferentialForm.build(source, 1, {(j,): partial for j, partial in enumerate(row)})
        for row in mapping.jacobian_exprs
    ]
    result = DifferentialForm.zero(source, form.degree)
    for index, c in form.terms:
        term = DifferentialForm.function(source, mapping.pull_function(c))
        for i in index:
            term = wedge(term, images[i])
        result = result + term
    return result


def bracket(x: VectorFieldHandle, y: VectorFieldHandle) -> VectorFieldHandle:
    """[X, Y]ⁱ = X(Yⁱ) − Y(Xⁱ)."""
    if not (x.is_symbolic and y.is_symbolic):
        raise UnsupportedOperandError("the bracket is only available for symbolic fields")
    _same_chart(x.chart, y.chart, "bracket")
    return VectorFieldHandle.symbolic(
        x.chart, [x.apply(yi) - y.apply(xi) for xi, yi in zip(x.components, y.components)]
    )


def gauss_legendre(interval: Interval, n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(n)
    lo, hi = interval
    half = (hi - lo) / 2
    return half * nodes + (lo + hi) / 2, half * weights


def surface_integral(
    form: DifferentialForm,
    surface: ParametrizedSurface,
    grid: Optional[Tuple[int, int]] = None,
) -> float:
    """∫∫ (Σ*ω)(∂u, ∂v) du dv by tensor-product Gauss–Legendre quadrature."""
    if form.degree != 2:
        raise FormDegreeError("surface integrals need a 2-form")
    _same_chart(surface.map.target, form.chart, "surface integral")
    n1, n2 = grid or get_settings().quadrature_grid
    if n1 < 8 or n2 < 8:
        raise CalculusError(f"quadrature grid {(n1, n2)} is below (8, 8)")
    density = pullback(surface.map, form).coefficient((0, 1))
    fn = compiled(density, surface.map.source.coordinates)
    (u_nodes, u_weights), (v_nodes, v_weights) = (
        gauss_legendre(interval, n) for interval, n in zip(surface.rectangle, (n1, n2))
    )
    values = np.empty((n1, n2))
    for i, u in enumerate(u_nodes):
        for j, v in enumerate(v_nodes):
            try:
                values[i, j] = fn((u, v))
            except ExpressionError as exc:
                raise QuadratureError(str(exc), (float(u), float(v))) from exc
    integral = float(u_weights @ values @ v_weights)
    logger.debug("surface integral over %s on grid %s: %r", surface.map.source.name, (n1, n2), integral)
    return integral


def max_residual(points: Iterable[np.ndarray], residual: Callable[[np.ndarray], float]) -> float:
    return max((float(residual(p)) for p in points), default=0.0)
