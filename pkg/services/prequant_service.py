"""Prequantization on principal contact charts.

Sections of the prequantum line bundle are modelled as equivariant
complex functions F(x, t + τ) = e^{−iτ/ħ}·F(x, t) on a chart in normal
form η = dt + h_a dxᵃ. Sign conventions:

* i_{X_H} ω = dH with ω = dϑ,
* {f, g} = ω(X_f, X_g),
* curvature (D_X D_Y − D_Y D_X − D_[X,Y]) F = +(2πi/ρ)·ω(X, Y)·F,
* [Ĥ_f, Ĥ_g] = iħ·Ĥ_{f,g}.

The signs are re-derived by ``calibrate_signs`` on the Darboux data.
"""
import cmath
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.linalg import LinAlgError

from config import get_settings
from services.calculus_service import (
    Chart,
    DifferentialForm,
    Interval,
    SmoothMap,
    VectorFieldHandle,
    bracket,
    gauss_legendre,
    sample_points,
    wedge,
)
from services.contact_service import CheckReport, ContactChart, NormalForm, _check, reduce_to_normal_form
from services.expression_service import ZERO, Constant, Expr, ExprLike, Variable, as_expr, compiled, diff, parse
from services.products_service import PrincipalLocalData, PrincipalProduct, principal_product

logger = logging.getLogger(__name__)

Section = Callable[[np.ndarray], complex]
Hamiltonian = Union[ExprLike, str]
HAMILTONIAN_TOL = 1e-10


def _as_function(value: Hamiltonian, chart: Chart) -> Expr:
    return parse(value, chart.coordinates) if isinstance(value, str) else as_expr(value)


class PrequantError(ValueError):
    """Base class for prequantization failures."""


class EquivarianceError(PrequantError):
    pass


class PeriodMismatchError(PrequantError):
    pass


class SingularFormError(PrequantError):
    pass


# Principal data in normal form


class PrincipalContactData:
    """A contact chart in normal form η = dt + ϑ with period ρ and ħ = ρ/2π.

    For ρ = ∞ (ℝ-bundles) any ħ > 0 may be supplied.
    """

    def __init__(self, contact: ContactChart, fiber: str, period: float, hbar: Optional[float] = None):
        if not period > 0:
            raise PrequantError(f"period must be positive, got {period}")
        if math.isinf(period) and hbar is None:
            raise PrequantError("an infinite period needs an explicit ħ")
        self.normal: NormalForm = reduce_to_normal_form(contact, fiber)
        self.period = float(period)
        self.hbar = float(hbar) if hbar is not None else self.period / (2 * math.pi)
        if not self.hbar > 0:
            raise PrequantError(f"ħ must be positive, got {self.hbar}")
        self.t_index = contact.chart.index(fiber)
        logger.info("principal data on %s: ρ = %s, ħ = %.6f", contact.chart.name, self.period, self.hbar)

    @property
    def contact(self) -> ContactChart:
        return self.normal.contact

    @property
    def chart(self) -> Chart:
        return self.contact.chart

    @property
    def base(self) -> Chart:
        return self.normal.base

    @property
    def fiber(self) -> str:
        return self.normal.fiber

    @property
    def potential(self) -> DifferentialForm:
        return self.normal.potential

    @property
    def omega(self) -> DifferentialForm:
        return self.normal.omega

    @property
    def local_data(self) -> PrincipalLocalData:
        return PrincipalLocalData(self.base, self.potential)

    def phase(self, tau: float) -> complex:
        return cmath.exp(-1j * tau / self.hbar)

    def flow(self, point: np.ndarray, tau: float) -> np.ndarray:
        """exp(τR) for R = ∂t."""
        y = np.array(point, dtype=float)
        y[self.t_index] += tau
        return self.chart.wrap(y)

    def base_point(self, point: np.ndarray) -> np.ndarray:
        return np.delete(np.asarray(point, dtype=float), self.t_index)

    def lift_point(self, base_point: Sequence[float], t: float = 0.0) -> np.ndarray:
        return np.insert(np.asarray(base_point, dtype=float), self.t_index, t)

    def projection(self) -> SmoothMap:
        return SmoothMap(self.chart, self.base, tuple(Variable(c) for c in self.base.coordinates))

    def section(self) -> SmoothMap:
        """σ: t = 0."""
        components = [Variable(c) if c != self.fiber else ZERO for c in self.chart.coordinates]
        return SmoothMap(self.base, self.chart, tuple(components))

    def sample(self, count: int, seed: Optional[int] = None) -> np.ndarray:
        return sample_points(self.chart, count, get_settings().seed if seed is None else seed)


# Equivariant functions


@dataclass(frozen=True)
class EquivariantFunction:
    chart: Chart
    period: float
    hbar: float
    function: Section
    shift: Callable[[np.ndarray, float], np.ndarray]

    def __call__(self, point: Sequence[float]) -> complex:
        return complex(self.function(np.asarray(point, dtype=float)))

    def _with(self, function: Section) -> "EquivariantFunction":
        return EquivariantFunction(self.chart, self.period, self.hbar, function, self.shift)

    def __add__(self, other: "EquivariantFunction") -> "EquivariantFunction":
        return self._with(lambda y: self(y) + other(y))

    def __sub__(self, other: "EquivariantFunction") -> "EquivariantFunction":
        return self._with(lambda y: self(y) - other(y))

    def scaled(self, factor: complex) -> "EquivariantFunction":
        return self._with(lambda y: factor * self(y))

    def times(self, weight: Callable[[np.ndarray], complex]) -> "EquivariantFunction":
        """Multiply by a fiber-invariant function."""
        return self._with(lambda y: weight(y) * self(y))

    @classmethod
    def from_base(
        cls, data: PrincipalContactData, profile: Union[Hamiltonian, Callable[[np.ndarray], complex]]
    ) -> "EquivariantFunction":
        """F(x, t) = e^{−it/ħ}·g(x)."""
        if callable(profile) and not isinstance(profile, Expr):
            g = profile
        else:
            fn = compiled(_as_function(profile, data.base), data.base.coordinates)
            g = lambda x: fn(x)  # noqa: E731
        t_index = data.t_index

        def function(y: np.ndarray) -> complex:
            return data.phase(y[t_index]) * g(data.base_point(y))

        return cls(data.chart, data.period, data.hbar, function, data.flow)


def equivariance_check(
    section: EquivariantFunction,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
    tolerance: float = 1e-8,
) -> CheckReport:
    """|F(exp(τR)y) − e^{−iτ/ħ}F(y)| at seeded (y, τ) pairs with τ ∈ [−1, 1]."""
    settings = get_settings()
    count = samples or settings.load_samples
    seed = settings.seed if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence(seed + 1))
    residuals = []
    for y in sample_points(section.chart, count, seed):
        tau = float(rng.uniform(-1.0, 1.0))
        expected = cmath.exp(-1j * tau / section.hbar) * section(y)
        residuals.append(abs(section(section.shift(y, tau)) - expected))
    return _check("equivariance", residuals, tolerance)


def _require_equivariant(section: EquivariantFunction) -> None:
    report = equivariance_check(section)
    if not report.passed:
        raise EquivarianceError(f"section is not equivariant (residual {report.max_residual:.3e})")


# Hamiltonian fields and brackets


def hamiltonian_field(h: Hamiltonian, omega: DifferentialForm) -> VectorFieldHandle:
    """Pointwise solution of i_{X_H} ω = dH."""
    h = _as_function(h, omega.chart)
    chart = omega.chart
    gradient = [compiled(diff(h, c), chart.coordinates) for c in chart.coordinates]

    def resolve(point: np.ndarray) -> np.ndarray:
        grad = np.array([g(point) for g in gradient])
        # (i_X ω)_j = Σ_i X^i M_ij, i.e. Mᵀ X = dH
        matrix = omega.matrix(point).T
        try:
            x = np.linalg.solve(matrix, grad)
        except LinAlgError:
            raise SingularFormError(f"ω is degenerate at {list(point)}") from None
        residual = float(np.abs(matrix @ x - grad).max(initial=0.0))
        if not residual < HAMILTONIAN_TOL * max(1.0, float(np.abs(grad).max(initial=0.0))):
            raise SingularFormError(f"i_X ω = dH misses by {residual:.3e} at {list(point)}")
        return x

    return VectorFieldHandle.pointwise(chart, resolve)


def hamiltonian_field_symbolic(h: Hamiltonian, omega: DifferentialForm) -> VectorFieldHandle:
    """Symbolic X_H for two-dimensional bases or constant-coefficient ω."""
    h = _as_function(h, omega.chart)
    chart = omega.chart
    partials = [diff(h, c) for c in chart.coordinates]
    if chart.dimension == 2:
        w = omega.coefficient((0, 1))
        return VectorFieldHandle.symbolic(chart, [partials[1] / w, -partials[0] / w])
    values = [c for _, c in omega.terms]
    if not all(isinstance(c, Constant) for c in values):
        raise PrequantError("symbolic Hamiltonian fields need a 2-dimensional base or constant ω")
    matrix = omega.matrix(np.zeros(chart.dimension))
    try:
        inverse = np.linalg.inv(matrix.T)
    except LinAlgError:
        raise SingularFormError("ω is degenerate") from None
    components = []
    for row in inverse:
        total: Expr = ZERO
        for coefficient, partial in zip(row, partials):
            if coefficient != 0.0:
                total = total + float(coefficient) * partial
        components.append(total)
    return VectorFieldHandle.symbolic(chart, components)


def poisson_bracket(f: Hamiltonian, g: Hamiltonian, omega: DifferentialForm) -> Expr:
    """{f, g} = ω(X_f, X_g)."""
    xf = hamiltonian_field_symbolic(f, omega)
    xg = hamiltonian_field_symbolic(g, omega)
    total: Expr = ZERO
    for (i, j), c in omega.terms:
        total = total + c * (xf.components[i] * xg.components[j] - xf.components[j] * xg.components[i])
    return total


# Connection


def horizontal_lift(field_: VectorFieldHandle, data: PrincipalContactData) -> VectorFieldHandle:
    """X^h = Xᵃ∂ₐ − (h_a Xᵃ)∂t."""
    if field_.chart != data.base:
        raise PrequantError("horizontal lifts start from fields on the base chart")
    potential = [data.potential.coefficient((i,)) for i in range(data.base.dimension)]
    if field_.is_symbolic:
        vertical: Expr = ZERO
        for h_a, x_a in zip(potential, field_.components):
            vertical = vertical - h_a * x_a
        values = dict(zip(data.base.coordinates, field_.components))
        values[data.fiber] = vertical
        return VectorFieldHandle.parse(data.chart, values)

    def resolve(point: np.ndarray) -> np.ndarray:
        x = data.base_point(point)
        horizontal = field_.at(x)
        return np.insert(horizontal, data.t_index, -float(data.potential.covector(x) @ horizontal))

    return VectorFieldHandle.pointwise(data.chart, resolve)


def lift_residuals(field_: VectorFieldHandle, data: PrincipalContactData, samples: Optional[int] = None) -> CheckReport:
    """η(X^h) = 0 and Tp(X^h) = X."""
    lifted = horizontal_lift(field_, data)
    residuals = []
    for y in data.sample(samples or get_settings().load_samples):
        v = lifted.at(y)
        vertical = abs(float(data.contact.eta.covector(y) @ v))
        projected = float(np.abs(np.delete(v, data.t_index) - field_.at(data.base_point(y))).max(initial=0.0))
        residuals.append(max(vertical, projected))
    return _check("horizontal_lift", residuals, 1e-12)


def _directional(section: Section, lifted: VectorFieldHandle, step: float) -> Section:
    def derivative(y: np.ndarray) -> complex:
        v = lifted.at(y)
        return (section(y + step * v) - section(y - step * v)) / (2 * step)

    return derivative


def covariant_derivative(
    field_: VectorFieldHandle,
    section: EquivariantFunction,
    data: PrincipalContactData,
    step: Optional[float] = None,
    check: bool = True,
) -> EquivariantFunction:
    """D_X F = X^h(F) by central differences.

    With ``check`` the input must be equivariant and the output is
    re-tested over 50 seeded (y, τ) pairs at 1e-6.
    """
    if check:
        _require_equivariant(section)
    step = get_settings().fd_step if step is None else step
    derivative = section._with(_directional(section, horizontal_lift(field_, data), step))
    if check:
        report = equivariance_check(derivative, samples=50, tolerance=1e-6)
        if not report.passed:
            raise EquivarianceError(f"D_X F is not equivariant (residual {report.max_residual:.3e})")
    return derivative


def curvature_residual(
    x: VectorFieldHandle,
    y: VectorFieldHandle,
    section: EquivariantFunction,
    data: PrincipalContactData,
    points: Sequence[np.ndarray],
    sign: int = 1,
) -> float:
    """max |(D_X D_Y − D_Y D_X − D_[X,Y])F − sign·(2πi/ρ)ω(X, Y)F| over ``points``."""
    commutator = curvature_commutator(x, y, section, data)
    worst = 0.0
    for point in points:
        base = data.base_point(point)
        scalar = data.omega.at(base, x.at(base), y.at(base))
        expected = sign * (1j / data.hbar) * scalar * section(point)
        worst = max(worst, abs(commutator(point) - expected))
    return worst


def curvature_commutator(
    x: VectorFieldHandle, y: VectorFieldHandle, section: EquivariantFunction, data: PrincipalContactData
) -> EquivariantFunction:
    dx = lambda s: covariant_derivative(x, s, data, check=False)  # noqa: E731
    dy = lambda s: covariant_derivative(y, s, data, check=False)  # noqa: E731
    return dx(dy(section)) - dy(dx(section)) - covariant_derivative(bracket(x, y), section, data, check=False)


# Prequantum operators


@dataclass(frozen=True)
class PrequantumOperatorResult:
    section: EquivariantFunction
    hamiltonian: Expr
    equivariance: CheckReport


def prequantum_op(
    h: Hamiltonian,
    section: EquivariantFunction,
    data: PrincipalContactData,
    check: bool = True,
) -> PrequantumOperatorResult:
    """Ĥψ = −iħ·D_{X_H}ψ + H·ψ."""
    h = _as_function(h, data.base)
    if check:
        _require_equivariant(section)
    x_h = hamiltonian_field(h, data.omega)
    derivative = covariant_derivative(x_h, section, data, check=False)
    h_fn = compiled(h, data.base.coordinates)
    hbar = data.hbar
    output = section._with(lambda y: -1j * hbar * derivative(y) + h_fn(data.base_point(y)) * section(y))
    return PrequantumOperatorResult(output, h, equivariance_check(output, tolerance=1e-6))


def dirac_residual(
    f: Hamiltonian,
    g: Hamiltonian,
    section: EquivariantFunction,
    data: PrincipalContactData,
    points: Sequence[np.ndarray],
    sign: int = 1,
) -> float:
    """max |([Ĥ_f, Ĥ_g] − sign·iħ·Ĥ_{f,g})ψ| over ``points``."""
    op = lambda h, s: prequantum_op(h, s, data, check=False).section  # noqa: E731
    commutator = op(f, op(g, section)) - op(g, op(f, section))
    bracket_op = op(poisson_bracket(f, g, data.omega), section)
    return max(abs(commutator(p) - sign * 1j * data.hbar * bracket_op(p)) for p in points)


def calibrate_signs(data: PrincipalContactData, point: Optional[Sequence[float]] = None) -> Dict[str, int]:
    """Measure the curvature and Dirac signs on one section and point.

    Uses X = ∂ of the first base coordinate, Y = ∂ of the second, and
    f, g the first two base coordinates.
    """
    base = data.base
    point = np.asarray(point if point is not None else data.sample(1)[0], dtype=float)
    section = EquivariantFunction.from_base(data, 1.0)
    x = VectorFieldHandle.coordinate(base, base.coordinates[0])
    y = VectorFieldHandle.coordinate(base, base.coordinates[1])
    commutator = curvature_commutator(x, y, section, data)
    scalar = data.omega.at(data.base_point(point), x.at(data.base_point(point)), y.at(data.base_point(point)))
    curvature = commutator(point) / ((1j / data.hbar) * scalar * section(point))

    f, g = Variable(base.coordinates[0]), Variable(base.coordinates[1])
    op = lambda h, s: prequantum_op(h, s, data, check=False).section  # noqa: E731
    commutator_fg = op(f, op(g, section)) - op(g, op(f, section))
    dirac = commutator_fg(point) / (1j * data.hbar * op(poisson_bracket(f, g, data.omega), section)(point))
    signs = {"curvature": 1 if curvature.real > 0 else -1, "dirac": 1 if dirac.real > 0 else -1}
    logger.info("calibrated signs: %s", signs)
    return signs


# Hermitian structure


def liouville_density(omega: DifferentialForm) -> Callable[[np.ndarray], float]:
    """|ωⁿ/n!| as a top-degree coefficient."""
    d = omega.chart.dimension
    if d % 2:
        raise PrequantError("the Liouville volume needs an even-dimensional base")
    volume = DifferentialForm.function(omega.chart, 1.0)
    for _ in range(d // 2):
        volume = wedge(volume, omega)
    fn = compiled(volume.coefficient(tuple(range(d))), omega.chart.coordinates)
    factorial = math.factorial(d // 2)
    return lambda x: abs(fn(x)) / factorial


def _fiber_invariance(first: EquivariantFunction, second: EquivariantFunction, tolerance: float = 1e-8) -> None:
    settings = get_settings()
    rng = np.random.default_rng(np.random.SeedSequence(settings.seed + 2))
    for y in sample_points(first.chart, settings.load_samples, settings.seed):
        tau = float(rng.uniform(-1.0, 1.0))
        shifted = first.shift(y, tau)
        miss = abs(first(shifted) * np.conj(second(shifted)) - first(y) * np.conj(second(y)))
        if miss >= tolerance:
            raise EquivarianceError(f"F·conj(G) is not fiber-invariant at {list(y)} ({miss:.3e})")


def hermitian_pairing(
    first: EquivariantFunction,
    second: EquivariantFunction,
    data: PrincipalContactData,
    box: Sequence[Interval],
    grid: Optional[int] = None,
) -> complex:
    """⟨F, G⟩ = ∫ (F·conj G)∘σ |ωⁿ/n!| over a base box, tensor Gauss–Legendre."""
    if len(box) != data.base.dimension:
        raise PrequantError(f"quadrature box needs {data.base.dimension} intervals")
    _fiber_invariance(first, second)
    n = grid or get_settings().quadrature_grid[0]
    density = liouville_density(data.omega)
    rules = [gauss_legendre(interval, n) for interval in box]
    total = 0j
    for index in np.ndindex(*(n,) * len(box)):
        x = np.array([rules[axis][0][i] for axis, i in enumerate(index)])
        weight = math.prod(rules[axis][1][i] for axis, i in enumerate(index))
        y = data.lift_point(x)
        total += weight * density(x) * first(y) * np.conj(second(y))
    return complex(total)


# Tensor products on M₁ × M₂


@dataclass(frozen=True)
class TensorSection:
    first_data: PrincipalContactData
    second_data: PrincipalContactData
    section: EquivariantFunction

    @property
    def chart(self) -> Chart:
        return self.section.chart

    def split(self, point: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        d1 = self.first_data.chart.dimension
        return point[:d1], point[d1:]

    def join(self, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
        return np.concatenate([y1, y2])

    def antidiagonal_flow(self, point: np.ndarray, tau: float) -> np.ndarray:
        """exp(τR₁) × exp(−τR₂)."""
        y1, y2 = self.split(np.asarray(point, dtype=float))
        return self.join(self.first_data.flow(y1, tau), self.second_data.flow(y2, -tau))

    def invariance_check(self, samples: Optional[int] = None, seed: Optional[int] = None) -> CheckReport:
        settings = get_settings()
        seed = settings.seed if seed is None else seed
        rng = np.random.default_rng(np.random.SeedSequence(seed + 3))
        residuals = []
        for y in sample_points(self.chart, samples or settings.load_samples, seed):
            tau = float(rng.uniform(-1.0, 1.0))
            residuals.append(abs(self.section(self.antidiagonal_flow(y, tau)) - self.section(y)))
        return _check("tensor_invariance", residuals, 1e-6)


def _product_total_chart(first: Chart, second: Chart) -> Chart:
    return Chart(
        name=f"{first.name}x{second.name}_total",
        coordinates=tuple(f"{c}_1" for c in first.coordinates) + tuple(f"{c}_2" for c in second.coordinates),
        domain=first.domain + second.domain,
        periodic=first.periodic + second.periodic,
        margin=min(first.margin, second.margin),
    )


def tensor_section(
    first: EquivariantFunction,
    second: EquivariantFunction,
    first_data: PrincipalContactData,
    second_data: PrincipalContactData,
) -> TensorSection:
    """(F₁⊗F₂)(y₁, y₂) = F₁(y₁)·F₂(y₂), equivariant along (½R₁, ½R₂)."""
    if not math.isclose(first.period, second.period, rel_tol=0.0, abs_tol=1e-12) or not math.isclose(
        first_data.period, second_data.period, rel_tol=0.0, abs_tol=1e-12
    ):
        raise PeriodMismatchError(f"periods {first.period} and {second.period} differ")
    chart = _product_total_chart(first_data.chart, second_data.chart)
    d1 = first_data.chart.dimension

    def function(y: np.ndarray) -> complex:
        return first(y[:d1]) * second(y[d1:])

    def diagonal(y: np.ndarray, tau: float) -> np.ndarray:
        return np.concatenate([first_data.flow(y[:d1], tau / 2), second_data.flow(y[d1:], tau / 2)])

    section = EquivariantFunction(chart, first.period, first.hbar, function, diagonal)
    tensor = TensorSection(first_data, second_data, section)
    invariance = tensor.invariance_check()
    if not invariance.passed:
        raise EquivarianceError(f"F₁⊗F₂ varies along exp(τR₁)×exp(−τR₂) (residual {invariance.max_residual:.3e})")
    diagonal_report = equivariance_check(section, tolerance=1e-6)
    if not diagonal_report.passed:
        raise EquivarianceError(f"F₁⊗F₂ breaks the diagonal phase law (residual {diagonal_report.max_residual:.3e})")
    return tensor


def product_connection(
    first_field: VectorFieldHandle,
    second_field: VectorFieldHandle,
    first: EquivariantFunction,
    second: EquivariantFunction,
    tensor: TensorSection,
    samples: Optional[int] = None,
) -> CheckReport:
    """D_{X₁⊕X₂}(F₁⊗F₂) = D¹F₁⊗F₂ + F₁⊗D²F₂ at samples."""
    settings = get_settings()
    d1 = covariant_derivative(first_field, first, tensor.first_data, check=False)
    d2 = covariant_derivative(second_field, second, tensor.second_data, check=False)
    lift1 = horizontal_lift(first_field, tensor.first_data)
    lift2 = horizontal_lift(second_field, tensor.second_data)
    lifted = VectorFieldHandle.pointwise(
        tensor.chart, lambda y: np.concatenate([lift1.at(tensor.split(y)[0]), lift2.at(tensor.split(y)[1])])
    )
    combined = _directional(tensor.section, lifted, settings.fd_step)
    residuals = []
    for y in sample_points(tensor.chart, samples or settings.load_samples, settings.seed):
        y1, y2 = tensor.split(y)
        residuals.append(abs(combined(y) - (d1(y1) * second(y2) + first(y1) * d2(y2))))
    return _check("product_connection", residuals, 1e-6)


def descend(tensor: TensorSection) -> Tuple[PrincipalProduct, EquivariantFunction]:
    """Push F₁⊗F₂ to the reduced chart (x₁, x₂, t) with t = t₁ + t₂."""
    first_data, second_data = tensor.first_data, tensor.second_data
    product = principal_product(first_data.local_data, second_data.local_data, first_data.period)
    reduced = product.contact.chart
    fiber_names = {f"{first_data.fiber}_1": "fiber", f"{second_data.fiber}_2": "zero"}
    positions: List[Tuple[str, int]] = []
    for name in tensor.chart.coordinates:
        role = fiber_names.get(name)
        if role is None:
            positions.append(("coordinate", reduced.index(name)))
        else:
            positions.append((role, reduced.index(product.fiber)))

    def lift(point: np.ndarray) -> np.ndarray:
        return np.array(
            [point[i] if role != "zero" else 0.0 for role, i in positions],
            dtype=float,
        )

    t_index = reduced.index(product.fiber)

    def shift(point: np.ndarray, tau: float) -> np.ndarray:
        y = np.array(point, dtype=float)
        y[t_index] += tau
        return reduced.wrap(y)

    section = EquivariantFunction(
        reduced, tensor.section.period, tensor.section.hbar, lambda y: tensor.section(lift(y)), shift
    )
    return product, section


def descend_check(tensor: TensorSection, samples: Optional[int] = None) -> CheckReport:
    """F(x₁, x₂, t₁ + t₂) = (F₁⊗F₂)(x₁, t₁, x₂, t₂) at samples."""
    settings = get_settings()
    product, section = descend(tensor)
    reduced = product.contact.chart
    residuals = []
    for y in sample_points(tensor.chart, samples or settings.load_samples, settings.seed):
        values = dict(zip(tensor.chart.coordinates, y))
        t = values.pop(f"{tensor.first_data.fiber}_1") + values.pop(f"{tensor.second_data.fiber}_2")
        values[product.fiber] = t
        point = reduced.wrap([values[c] for c in reduced.coordinates])
        residuals.append(abs(section(point) - tensor.section(y)))
    return _check("descend", residuals, 1e-8)
