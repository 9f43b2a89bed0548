"""Contact forms on a chart: validation, Reeb fields, rescaling, symplectization
and the two reductions between contact and symplectic charts."""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, null_space

from config import get_settings
from services.calculus_service import (
    Chart,
    DifferentialForm,
    SmoothMap,
    ParametrizedSurface,
    VectorFieldHandle,
    exterior_derivative,
    interior_product,
    lie_derivative,
    pullback,
    sample_points,
    surface_integral,
    wedge,
)
from services.expression_service import (
    Constant,
    Expr,
    ExprLike,
    Variable,
    as_expr,
    call,
    compiled,
    diff,
    free_variables,
    is_constant,
)

logger = logging.getLogger(__name__)


class ContactError(ValueError):
    """Base class for contact-geometry failures."""


class NotContactError(ContactError):
    pass


class ReebSolveError(ContactError):
    def __init__(self, message: str, point: Optional[np.ndarray] = None):
        super().__init__(message)
        self.point = None if point is None else [float(x) for x in point]


class RescaleError(ContactError):
    pass


class ReductionError(ContactError):
    pass


# Reports


class ContactReport(BaseModel):
    passed: bool
    min_volume: float
    threshold: float
    samples: int
    worst_point: List[float] = []


class CheckReport(BaseModel):
    """Residual of one sampled identity."""

    check: str
    max_residual: float
    tolerance: float
    samples: int
    passed: bool


class IntegralityReport(BaseModel):
    integral: float
    period: float
    quotient: Optional[float] = None
    nearest: Optional[int] = None
    deviation: Optional[float] = None
    tolerance: float
    relative: bool = False
    passed: bool


def _check(name: str, residuals: List[float], tolerance: float) -> CheckReport:
    worst = max(residuals, default=0.0)
    return CheckReport(
        check=name,
        max_residual=worst,
        tolerance=tolerance,
        samples=len(residuals),
        passed=bool(worst < tolerance),
    )


# Contact condition and Reeb field


def contact_volume(eta: DifferentialForm) -> DifferentialForm:
    """η∧(dη)ⁿ/n!, which is ±dx¹∧…∧dx^{2n+1} on Darboux charts."""
    d = eta.chart.dimension
    if eta.degree != 1:
        raise ContactError("a contact form is a 1-form")
    if d % 2 == 0:
        raise NotContactError(f"chart {eta.chart.name} has even dimension {d}")
    n = (d - 1) // 2
    d_eta = exterior_derivative(eta)
    volume = eta
    for _ in range(n):
        volume = wedge(volume, d_eta)
    return volume.scaled(1.0 / math.factorial(n))


def is_contact(
    eta: DifferentialForm,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
    threshold: Optional[float] = None,
) -> ContactReport:
    settings = get_settings()
    samples = settings.samples if samples is None else samples
    seed = settings.seed if seed is None else seed
    threshold = settings.contact_threshold if threshold is None else threshold

    volume = contact_volume(eta)
    full = tuple(range(eta.chart.dimension))
    fn = compiled(volume.coefficient(full), eta.chart.coordinates)
    points = sample_points(eta.chart, samples, seed)
    values = np.array([abs(fn(p)) for p in points])
    worst = int(np.argmin(values)) if len(values) else 0
    min_volume = float(values[worst]) if len(values) else math.inf
    report = ContactReport(
        passed=bool(min_volume > threshold),
        min_volume=min_volume,
        threshold=threshold,
        samples=samples,
        worst_point=[float(x) for x in points[worst]] if len(values) else [],
    )
    logger.debug("contact check on %s: min |v| = %.3e", eta.chart.name, min_volume)
    return report


def _reeb_vector(eta: DifferentialForm, d_eta: DifferentialForm, point: np.ndarray) -> np.ndarray:
    # [[M, ηᵀ], [η, 0]] (R, λ) = (0, 1); λ vanishes for a contact form
    a = eta.covector(point)
    m = d_eta.matrix(point)
    d = len(a)
    bordered = np.zeros((d + 1, d + 1))
    bordered[:d, :d] = m
    bordered[:d, d] = a
    bordered[d, :d] = a
    rhs = np.zeros(d + 1)
    rhs[d] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        factor = lu_factor(bordered, check_finite=True)
    pivots = np.abs(np.diag(factor[0]))
    if pivots.min() <= 1e-14 * max(1.0, np.abs(bordered).max()):
        raise ReebSolveError(f"Reeb system is singular on chart {eta.chart.name}", point)
    return lu_solve(factor, rhs)[:d]


def reeb(eta: DifferentialForm) -> VectorFieldHandle:
    """Pointwise Reeb field: one LU solve per query point."""
    d_eta = exterior_derivative(eta)
    return VectorFieldHandle.pointwise(eta.chart, lambda p: _reeb_vector(eta, d_eta, p))


def reeb_residual(eta: DifferentialForm, d_eta: DifferentialForm, field_: VectorFieldHandle, point: np.ndarray) -> float:
    """max(|η(R) − 1|, |i_R dη|∞) at one point."""
    r = field_.at(point)
    return max(abs(float(eta.covector(point) @ r) - 1.0), float(np.abs(r @ d_eta.matrix(point)).max(initial=0.0)))


def kernel_basis(eta: DifferentialForm, point: np.ndarray) -> np.ndarray:
    """Columns spanning ker η at ``point``."""
    return null_space(eta.covector(point).reshape(1, -1))


class ContactChart:
    """A chart together with a validated contact form.

    ``known_reeb`` is an optional closed-form Reeb field; it is used (for
    speed and symbolic brackets) only after it matches the defining
    equations at the sampled points.
    """

    def __init__(
        self,
        eta: DifferentialForm,
        known_reeb: Optional[VectorFieldHandle] = None,
        samples: Optional[int] = None,
        seed: Optional[int] = None,
    ):
        settings = get_settings()
        self.eta = eta
        self.samples = settings.samples if samples is None else samples
        self.seed = settings.seed if seed is None else seed
        self.report = is_contact(eta, self.samples, self.seed)
        if not self.report.passed:
            raise NotContactError(
                f"η∧(dη)ⁿ drops to {self.report.min_volume:.3e} on chart {eta.chart.name} "
                f"(threshold {self.report.threshold:.0e}) at {self.report.worst_point}"
            )
        self.d_eta = exterior_derivative(eta)
        self.known_reeb = known_reeb
        self._reeb: Optional[VectorFieldHandle] = None

    @property
    def chart(self) -> Chart:
        return self.eta.chart

    @property
    def n(self) -> int:
        return (self.chart.dimension - 1) // 2

    def sample(self, count: Optional[int] = None, seed: Optional[int] = None) -> np.ndarray:
        return sample_points(self.chart, self.samples if count is None else count, self.seed if seed is None else seed)

    @property
    def reeb_field(self) -> VectorFieldHandle:
        if self._reeb is None:
            self._reeb = reeb(self.eta)
            if self.known_reeb is not None:
                tol = get_settings().reeb_tol
                worst = max(
                    reeb_residual(self.eta, self.d_eta, self.known_reeb, p) for p in self.sample(get_settings().load_samples)
                )
                if worst < tol:
                    self._reeb = self.known_reeb
                else:
                    logger.warning("declared Reeb field on %s misses by %.3e; using the LU solve", self.chart.name, worst)
        return self._reeb

    def reeb_residuals(self, samples: Optional[int] = None, seed: Optional[int] = None) -> CheckReport:
        field_ = reeb(self.eta)
        residuals = [reeb_residual(self.eta, self.d_eta, field_, p) for p in self.sample(samples, seed)]
        return _check("reeb", residuals, get_settings().reeb_tol)

    def lie_reeb_residuals(self, samples: Optional[int] = None, seed: Optional[int] = None) -> CheckReport:
        """L_R η = 0 with the finite-difference Lie derivative."""
        derivative = lie_derivative(self.reeb_field.as_pointwise(), self.eta, method="finite_difference")
        residuals = [derivative.max_abs(p) for p in self.sample(samples or 100, seed)]
        return _check("lie_reeb", residuals, get_settings().lie_tol)

    def scaled(self, factor: ExprLike) -> "ContactChart":
        factor = as_expr(factor)
        known = None
        if self.known_reeb is not None and self.known_reeb.is_symbolic and isinstance(factor, Constant):
            known = self.known_reeb.scaled(1.0 / factor.value)
        return ContactChart(self.eta.scaled(factor), known, self.samples, self.seed)


# Conformal rescaling


def conformal_rescale(
    contact: ContactChart,
    f: ExprLike,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> Tuple[DifferentialForm, CheckReport]:
    """η′ = f·η, with the Reeb change R′ = R/f + X verified at samples.

    The measured X = R′ − R/f lies in ker η and satisfies
    f²·i_X dη = df − R(f)η.
    """
    settings = get_settings()
    f = as_expr(f)
    chart = contact.chart
    points = contact.sample(samples if samples is not None else 100, seed)
    f_fn = compiled(f, chart.coordinates)
    gradient = [compiled(diff(f, name), chart.coordinates) for name in chart.coordinates]
    for p in points:
        if abs(f_fn(p)) <= settings.contact_threshold:
            raise RescaleError(f"rescaling function {f} vanishes at {list(p)}")

    eta_new = contact.eta.scaled(f)
    r_old = reeb(contact.eta)
    r_new = reeb(eta_new)
    residuals = []
    for p in points:
        value = f_fn(p)
        df = np.array([g(p) for g in gradient])
        r = r_old.at(p)
        x = r_new.at(p) - r / value
        a = contact.eta.covector(p)
        m = contact.d_eta.matrix(p)
        law = value ** 2 * (x @ m) - (df - (df @ r) * a)
        kernel = abs(a @ x)
        # ker η′ = ker η
        conformal = float(np.abs(value * a @ kernel_basis(contact.eta, p)).max(initial=0.0))
        residuals.append(max(float(np.abs(law).max()), kernel, conformal))
    return eta_new, _check("conformal_rescale", residuals, settings.rescale_tol)


# Symplectization


def _fresh_name(chart: Chart, preferred: str) -> str:
    name = preferred
    while name in chart.coordinates:
        name += "_"
    return name


def _extend(chart: Chart, name: str, interval: Tuple[float, float], suffix: str) -> Chart:
    return Chart(
        name=f"{chart.name}{suffix}",
        coordinates=chart.coordinates + (name,),
        domain=chart.domain + (interval,),
        periodic=chart.periodic + (False,),
        margin=chart.margin,
    )


@dataclass(frozen=True)
class SymplectizationChart:
    base: ContactChart
    chart: Chart
    fiber: str
    omega: DifferentialForm
    liouville_form: DifferentialForm
    liouville_field: VectorFieldHandle

    def scale_map(self, factor: float) -> SmoothMap:
        """h_ν: s ↦ ν·s."""
        components = [Variable(c) for c in self.chart.coordinates[:-1]] + [factor * Variable(self.fiber)]
        return SmoothMap(self.chart, self.chart, tuple(components))

    def section(self, value: float = 1.0) -> SmoothMap:
        """The global section s = value, from the contact chart."""
        base = self.base.chart
        return SmoothMap(base, self.chart, tuple(Variable(c) for c in base.coordinates) + (as_expr(value),))

    def sample(self, count: int, seed: int) -> np.ndarray:
        return sample_points(self.chart, count, seed)

    def verify(self, samples: Optional[int] = None, seed: Optional[int] = None) -> Dict[str, CheckReport]:
        settings = get_settings()
        points = self.sample(samples or settings.samples, settings.seed if seed is None else seed)
        contracted = interior_product(self.liouville_field, self.omega) - self.liouville_form
        lie = lie_derivative(self.liouville_field, self.omega, method="finite_difference")
        doubled = pullback(self.scale_map(2.0), self.omega) - self.omega.scaled(2.0)
        reports = {
            "liouville_contraction": _check("liouville_contraction", [contracted.max_abs(p) for p in points], 1e-12),
            "homogeneity": _check("homogeneity", [doubled.max_abs(p) for p in points], 1e-12),
            "liouville_lie": _check(
                "liouville_lie",
                [float(np.abs(lie.matrix(p) - self.omega.matrix(p)).max()) for p in points],
                settings.lie_tol,
            ),
        }
        determinants = [abs(np.linalg.det(self.omega.matrix(p))) for p in points]
        min_det = min(determinants, default=math.inf)
        reports["nondegenerate"] = CheckReport(
            check="nondegenerate",
            max_residual=0.0 if min_det > settings.contact_threshold else 1.0,
            tolerance=settings.contact_threshold,
            samples=len(points),
            passed=bool(min_det > settings.contact_threshold),
        )
        return reports


def symplectize(contact: ContactChart) -> SymplectizationChart:
    """ω = ds∧η + s·dη on M × (0, ∞) with ϑ = sη and ∇ = s∂ₛ."""
    fiber = _fresh_name(contact.chart, "s")
    chart = _extend(contact.chart, fiber, (0.0, math.inf), "_symplectization")
    s = Variable(fiber)
    eta = contact.eta.moved(chart)
    omega = wedge(DifferentialForm.differential(chart, fiber), eta) + contact.d_eta.moved(chart).scaled(s)
    symp = SymplectizationChart(
        base=contact,
        chart=chart,
        fiber=fiber,
        omega=omega,
        liouville_form=eta.scaled(s),
        liouville_field=VectorFieldHandle.parse(chart, {fiber: s}),
    )
    logger.info("symplectized %s with fiber %s", contact.chart.name, fiber)
    return symp


@dataclass(frozen=True)
class AdditiveSymplectization:
    base: ContactChart
    chart: Chart
    fiber: str
    omega: DifferentialForm

    def exponential_map(self, multiplicative: SymplectizationChart) -> SmoothMap:
        """s = eᵗ into the multiplicative picture."""
        components = [Variable(c) for c in self.chart.coordinates[:-1]] + [call("exp", Variable(self.fiber))]
        return SmoothMap(self.chart, multiplicative.chart, tuple(components))


def additive_symplectization(contact: ContactChart) -> AdditiveSymplectization:
    """ω = d(eᵗη) = eᵗ(dt∧η + dη) on M × ℝ."""
    fiber = _fresh_name(contact.chart, "t")
    chart = _extend(contact.chart, fiber, (-math.inf, math.inf), "_additive")
    weight = call("exp", Variable(fiber))
    omega = exterior_derivative(contact.eta.moved(chart).scaled(weight))
    return AdditiveSymplectization(contact, chart, fiber, omega)


def additive_agreement(contact: ContactChart, samples: Optional[int] = None, seed: Optional[int] = None) -> CheckReport:
    """The additive form is the pullback of the multiplicative one along s = eᵗ."""
    settings = get_settings()
    multiplicative = symplectize(contact)
    additive = additive_symplectization(contact)
    difference = pullback(additive.exponential_map(multiplicative), multiplicative.omega) - additive.omega
    points = sample_points(additive.chart, samples or settings.samples, settings.seed if seed is None else seed)
    return _check("additive_symplectization", [difference.max_abs(p) for p in points], 1e-10)


def liouville_projection_check(
    symp: SymplectizationChart, samples: Optional[int] = None, seed: Optional[int] = None
) -> CheckReport:
    """The projection of ker ϑ onto TM is ker η, of rank 2n."""
    settings = get_settings()
    points = symp.sample(samples or settings.samples, settings.seed if seed is None else seed)
    base = symp.base
    residuals = []
    for point in points:
        kernel = null_space(symp.liouville_form.covector(point).reshape(1, -1))
        projected = kernel[:-1, :]
        x = point[:-1]
        annihilated = float(np.abs(base.eta.covector(x) @ projected).max(initial=0.0))
        rank_ok = np.linalg.matrix_rank(projected, tol=settings.transversality_tol) == 2 * base.n
        residuals.append(annihilated if rank_ok else math.inf)
    return _check("liouville_projection", residuals, settings.reeb_tol)


# Reductions


def _image_points(embed: SmoothMap, samples: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    params = sample_points(embed.source, samples, seed)
    return params, np.array([embed.at(y) for y in params])


def symplectic_to_contact(
    omega: DifferentialForm,
    nu: VectorFieldHandle,
    embed: SmoothMap,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> DifferentialForm:
    """η = embed*(i_ν Ω) for a Liouville field ν transversal to the hypersurface."""
    settings = get_settings()
    samples = samples or settings.samples
    seed = settings.seed if seed is None else seed
    if embed.target != omega.chart:
        raise ReductionError("the hypersurface must be embedded in the chart of Ω")
    if embed.source.dimension != omega.chart.dimension - 1:
        raise ReductionError("the embedded chart must be a hypersurface")
    params, images = _image_points(embed, samples, seed)

    lie = lie_derivative(nu, omega)
    homogeneity = max(float(np.abs(lie.matrix(x) - omega.matrix(x)).max()) for x in images)
    if homogeneity >= settings.lie_tol:
        raise ReductionError(f"L_ν Ω ≠ Ω: residual {homogeneity:.3e}")

    for y, x in zip(params, images):
        stacked = np.column_stack([embed.jacobian(y), nu.at(x)])
        singular = np.linalg.svd(stacked, compute_uv=False)
        if singular[-1] <= settings.transversality_tol * max(singular[0], 1.0):
            raise ReductionError(f"ν is not transversal to the hypersurface at {list(y)}")

    eta = pullback(embed, interior_product(nu, omega))
    report = is_contact(eta, samples, seed)
    if not report.passed:
        raise ReductionError(f"the induced form is not contact (min |v| = {report.min_volume:.3e})")
    difference = pullback(embed, omega) - exterior_derivative(eta)
    worst = max(difference.max_abs(y) for y in params)
    if worst >= settings.reduction_tol:
        raise ReductionError(f"embed*Ω ≠ dη: residual {worst:.3e}")
    return eta


def contact_to_symplectic(
    contact: ContactChart,
    projection: SmoothMap,
    section: SmoothMap,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> DifferentialForm:
    """ω = σ*(dη) on the base of a regular contact chart, with p*ω = dη."""
    settings = get_settings()
    samples = samples or settings.samples
    seed = settings.seed if seed is None else seed
    if projection.source != contact.chart or section.target != contact.chart:
        raise ReductionError("projection and section must start/end on the contact chart")
    base = projection.target
    if section.source != base:
        raise ReductionError("the section must be defined on the base chart of the projection")

    base_points = sample_points(base, samples, seed)
    for y in base_points:
        miss = float(np.abs(base.displacement(y, projection.at(section.at(y)))).max())
        if miss >= settings.section_tol:
            raise ReductionError(f"σ is not a section of p at {list(y)}: |p∘σ − id| = {miss:.3e}")

    reeb_field = contact.reeb_field
    total_points = contact.sample(samples, seed)
    for x in total_points:
        drift = float(np.abs(projection.jacobian(x) @ reeb_field.at(x)).max())
        if drift >= settings.reduction_tol:
            raise ReductionError(f"Tp(R) = {drift:.3e} ≠ 0 at {list(x)}")

    omega = pullback(section, contact.d_eta)
    difference = pullback(projection, omega) - contact.d_eta
    worst = max(difference.max_abs(x) for x in total_points)
    if worst >= settings.reduction_tol:
        raise ReductionError(f"p*ω ≠ dη: residual {worst:.3e}")
    if base.dimension % 2 or min(abs(np.linalg.det(omega.matrix(y))) for y in base_points) <= settings.contact_threshold:
        raise ReductionError("the reduced 2-form is degenerate")
    return omega


def reduction_residuals(
    contact: ContactChart, projection: SmoothMap, omega: DifferentialForm, samples: Optional[int] = None, seed: Optional[int] = None
) -> CheckReport:
    difference = pullback(projection, omega) - contact.d_eta
    return _check(
        "reduction", [difference.max_abs(x) for x in contact.sample(samples, seed)], get_settings().reeb_tol
    )


def integrality_check(
    omega: DifferentialForm,
    surface: ParametrizedSurface,
    period: float,
    tolerance: Optional[float] = None,
    relative: bool = False,
    grid: Optional[Tuple[int, int]] = None,
) -> IntegralityReport:
    """Is ∫_Σ ω in ρ·ℤ? Relative cycles only report the raw integral."""
    tolerance = get_settings().integrality_tol if tolerance is None else tolerance
    if not (period > 0 and math.isfinite(period)):
        raise ContactError(f"period must be a positive real, got {period}")
    if not (surface.closed or relative):
        raise ContactError("surface is not closed; flag it as a relative cycle to integrate anyway")
    integral = surface_integral(omega, surface, grid)
    if relative:
        return IntegralityReport(integral=integral, period=period, tolerance=tolerance, relative=True, passed=True)
    quotient = integral / period
    nearest = int(round(quotient))
    deviation = abs(quotient - nearest)
    logger.info("∫ω = %.12f, ∫ω/ρ = %.12f", integral, quotient)
    return IntegralityReport(
        integral=integral,
        period=period,
        quotient=quotient,
        nearest=nearest,
        deviation=deviation,
        tolerance=tolerance,
        passed=bool(deviation < tolerance),
    )


# Local normal form η = dt + ϑ


@dataclass(frozen=True)
class NormalForm:
    contact: ContactChart
    fiber: str
    base: Chart
    potential: DifferentialForm

    @property
    def omega(self) -> DifferentialForm:
        return exterior_derivative(self.potential)


def reduce_to_normal_form(contact: ContactChart, fiber: str) -> NormalForm:
    """Split η = dt + h_a dxᵃ with t-independent h_a and Reeb field ∂t."""
    chart = contact.chart
    t_index = chart.index(fiber)
    coefficients = contact.eta.coefficients
    if not is_constant(coefficients.get((t_index,), as_expr(0.0)), 1.0):
        raise ReductionError(f"the d{fiber} coefficient of η is not 1")
    keep = [i for i in range(chart.dimension) if i != t_index]
    base = Chart(
        name=f"{chart.name}_base",
        coordinates=tuple(chart.coordinates[i] for i in keep),
        domain=tuple(chart.domain[i] for i in keep),
        periodic=tuple(chart.periodic[i] for i in keep),
        margin=chart.margin,
    )
    potential: Dict[Tuple[int, ...], Expr] = {}
    for (i,), c in contact.eta.terms:
        if i == t_index:
            continue
        if fiber in free_variables(c):
            raise ReductionError(f"coefficient of d{chart.coordinates[i]} depends on {fiber}")
        potential[(base.index(chart.coordinates[i]),)] = c
    unit = np.zeros(chart.dimension)
    unit[t_index] = 1.0
    field_ = reeb(contact.eta)
    worst = max(float(np.abs(field_.at(p) - unit).max()) for p in contact.sample(get_settings().load_samples))
    if worst >= get_settings().reeb_tol:
        raise ReductionError(f"the Reeb field is not ∂{fiber} (residual {worst:.3e})")
    return NormalForm(contact, fiber, base, DifferentialForm.build(base, 1, potential))
