"""Contact products, Legendrian graphs of contactomorphisms, and the period
of a product of two principal contact charts."""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Literal, Optional, Tuple, Union

import numpy as np

from config import get_settings
from services.calculus_service import (
    Chart,
    DifferentialForm,
    SmoothMap,
    VectorFieldHandle,
    exterior_derivative,
    pullback,
    sample_points,
)
from services.contact_service import (
    CheckReport,
    ContactChart,
    _check,
    kernel_basis,
    reeb,
)
from services.expression_service import ExprLike, Variable, as_expr, free_variables, is_constant, substitute

logger = logging.getLogger(__name__)

INT64_MAX = 2 ** 63 - 1

Component = Literal["pos", "neg"]
PeriodLike = Union[int, Fraction, str]


class ProductError(ValueError):
    """Base class for product-construction failures."""


class CommensurabilityError(ProductError):
    pass


class PeriodOverflowError(ProductError):
    pass


class ImmersionError(ProductError):
    pass


class LegendrianDimensionError(ProductError):
    pass


class RankDeficiencyError(ProductError):
    pass


# Contact product η = t·η₁ + η₂


def _fresh(names, preferred: str) -> str:
    while preferred in names:
        preferred += "_"
    return preferred


def _suffixed(chart: Chart, suffix: str) -> Dict[str, str]:
    return {c: f"{c}_{suffix}" for c in chart.coordinates}


def _product_chart(first: Chart, second: Chart, fiber: str, component: Component, name: str) -> Chart:
    interval = (0.0, math.inf) if component == "pos" else (-math.inf, 0.0)
    r1, r2 = _suffixed(first, "1"), _suffixed(second, "2")
    return Chart(
        name=name,
        coordinates=tuple(r1[c] for c in first.coordinates) + tuple(r2[c] for c in second.coordinates) + (fiber,),
        domain=first.domain + second.domain + (interval,),
        periodic=first.periodic + second.periodic + (False,),
        margin=min(first.margin, second.margin),
    )


def _lift(contact: ContactChart, field_: Optional[VectorFieldHandle], target: Chart, suffix: str) -> Optional[VectorFieldHandle]:
    if field_ is None or not field_.is_symbolic:
        return None
    renaming = {c: Variable(f"{c}_{suffix}") for c in contact.chart.coordinates}
    values = {f"{c}_{suffix}": substitute(x, renaming) for c, x in zip(contact.chart.coordinates, field_.components)}
    return VectorFieldHandle.parse(target, values)


@dataclass
class ProductContactChart:
    first: ContactChart
    second: ContactChart
    component: Component
    fiber: str
    contact: ContactChart
    alternate: ContactChart
    alternate_fiber: str
    _inversion: Optional[SmoothMap] = field(default=None, repr=False)

    @property
    def chart(self) -> Chart:
        return self.contact.chart

    @property
    def eta(self) -> DifferentialForm:
        return self.contact.eta

    def split(self, point) -> Tuple[np.ndarray, np.ndarray, float]:
        d1 = self.first.chart.dimension
        d2 = self.second.chart.dimension
        point = np.asarray(point, dtype=float)
        return point[:d1], point[d1:d1 + d2], float(point[d1 + d2])

    def embed_first(self, vector: np.ndarray) -> np.ndarray:
        out = np.zeros(self.chart.dimension)
        out[: self.first.chart.dimension] = vector
        return out

    def embed_second(self, vector: np.ndarray) -> np.ndarray:
        d1 = self.first.chart.dimension
        out = np.zeros(self.chart.dimension)
        out[d1:d1 + self.second.chart.dimension] = vector
        return out

    @property
    def inversion(self) -> SmoothMap:
        """t ↦ t′ = 1/t, from the η-chart to the η′-chart."""
        if self._inversion is None:
            components = [Variable(c) for c in self.chart.coordinates[:-1]] + [1.0 / Variable(self.fiber)]
            self._inversion = SmoothMap(self.chart, self.alternate.chart, tuple(components))
        return self._inversion

    def sample(self, count: int, seed: int) -> np.ndarray:
        return sample_points(self.chart, count, seed)

    def reeb_checks(self, samples: Optional[int] = None, seed: Optional[int] = None) -> Dict[str, CheckReport]:
        """reeb(η) = R₂ and reeb(η′) = R₁ at samples."""
        settings = get_settings()
        samples = samples or 100
        seed = settings.seed if seed is None else seed
        tol = settings.rescale_tol
        r_eta = reeb(self.eta)
        r_alt = reeb(self.alternate.eta)
        second_field = self.second.reeb_field
        first_field = self.first.reeb_field
        eta_res, alt_res = [], []
        for point in self.sample(samples, seed):
            x1, x2, _ = self.split(point)
            eta_res.append(float(np.abs(r_eta.at(point) - self.embed_second(second_field.at(x2))).max()))
            alt_point = self.inversion.at(point)
            alt_res.append(float(np.abs(r_alt.at(alt_point) - self.embed_first(first_field.at(x1))).max()))
        return {
            "product_reeb": _check("product_reeb", eta_res, tol),
            "product_reeb_alternate": _check("product_reeb_alternate", alt_res, tol),
        }

    def kernel_agreement(self, samples: Optional[int] = None, seed: Optional[int] = None) -> CheckReport:
        """ker η = ker η′ once η′ is written in the t chart."""
        settings = get_settings()
        pulled = pullback(self.inversion, self.alternate.eta)
        residuals = []
        for point in self.sample(samples or 100, settings.seed if seed is None else seed):
            basis = kernel_basis(self.eta, point)
            residuals.append(float(np.abs(pulled.covector(point) @ basis).max(initial=0.0)))
        return _check("kernel_agreement", residuals, settings.reeb_tol)


def contact_product(first: ContactChart, second: ContactChart, component: Component = "pos") -> ProductContactChart:
    """η = t·η₁ + η₂ on M₁ × M₂ × ℝ^× (one component), with η′ = η₁ + t′η₂."""
    if component not in ("pos", "neg"):
        raise ProductError(f"component must be 'pos' or 'neg', got {component!r}")
    names = tuple(f"{c}_1" for c in first.chart.coordinates) + tuple(f"{c}_2" for c in second.chart.coordinates)
    fiber = _fresh(names, "t")
    chart = _product_chart(first.chart, second.chart, fiber, component, f"{first.chart.name}x{second.chart.name}")
    alternate_fiber = _fresh(names, "t_inv")
    alt_chart = _product_chart(
        first.chart, second.chart, alternate_fiber, component, f"{first.chart.name}x{second.chart.name}_alt"
    )

    eta1 = first.eta.moved(chart, _suffixed(first.chart, "1"))
    eta2 = second.eta.moved(chart, _suffixed(second.chart, "2"))
    eta = eta1.scaled(Variable(fiber)) + eta2
    alt1 = first.eta.moved(alt_chart, _suffixed(first.chart, "1"))
    alt2 = second.eta.moved(alt_chart, _suffixed(second.chart, "2"))
    eta_alt = alt1 + alt2.scaled(Variable(alternate_fiber))

    product = ProductContactChart(
        first=first,
        second=second,
        component=component,
        fiber=fiber,
        contact=ContactChart(eta, _lift(second, second.known_reeb, chart, "2"), first.samples, first.seed),
        alternate=ContactChart(eta_alt, _lift(first, first.known_reeb, alt_chart, "1"), first.samples, first.seed),
        alternate_fiber=alternate_fiber,
    )
    logger.info("contact product %s (%s component), dimension %d", chart.name, component, chart.dimension)
    return product


def distribution_witness(product: ProductContactChart, point) -> np.ndarray:
    """Columns spanning C₁ ⊕ C₂ ⊕ ⟨R₁ − tR₂, ∂t⟩ at ``point``.

    Every column annihilates η (i_{∂t}η = 0 since η has no dt term) and
    the columns have rank dim − 1.
    """
    point = np.asarray(point, dtype=float)
    x1, x2, t = product.split(point)
    columns = [product.embed_first(v) for v in kernel_basis(product.first.eta, x1).T]
    columns += [product.embed_second(v) for v in kernel_basis(product.second.eta, x2).T]
    columns.append(
        product.embed_first(product.first.reeb_field.at(x1)) - t * product.embed_second(product.second.reeb_field.at(x2))
    )
    d_t = np.zeros(product.chart.dimension)
    d_t[-1] = 1.0
    columns.append(d_t)
    witness = np.column_stack(columns)

    covector = product.eta.covector(point)
    worst = float(np.abs(covector @ witness).max())
    if worst >= get_settings().reeb_tol:
        raise RankDeficiencyError(f"witness vector leaves ker η by {worst:.3e} at {list(point)}")
    rank = np.linalg.matrix_rank(witness, tol=get_settings().transversality_tol)
    if rank != product.chart.dimension - 1:
        raise RankDeficiencyError(f"witness has rank {rank}, expected {product.chart.dimension - 1}")
    return witness


# Legendrian graphs


@dataclass(frozen=True)
class LegendrianCandidate:
    map: SmoothMap

    @property
    def parameters(self) -> Chart:
        return self.map.source


def graph_c(product: ProductContactChart, phi: SmoothMap, f: ExprLike) -> LegendrianCandidate:
    """{(x, φ(x), t = −f(x))} for φ: M₁ → M₂ with φ*η₂ = f·η₁."""
    if phi.source != product.first.chart or phi.target != product.second.chart:
        raise ProductError("φ must map the first factor to the second")
    components = [Variable(c) for c in phi.source.coordinates] + list(phi.components) + [-as_expr(f)]
    return LegendrianCandidate(SmoothMap(phi.source, product.chart, tuple(components)))


def reeb_translation(contact: ContactChart, shift: float = 1.0) -> SmoothMap:
    """x ↦ x + shift·∂c when the Reeb field is ∂c and η does not involve c.

    Such a translation preserves η, so its conformal factor is 1. Charts
    without such a coordinate, or where c is bounded, get the identity.
    """
    chart = contact.chart
    known = contact.known_reeb
    components = [Variable(c) for c in chart.coordinates]
    if known is None or not known.is_symbolic:
        return SmoothMap.identity(chart)
    ones = [i for i, c in enumerate(known.components) if not is_constant(c, 0.0)]
    if len(ones) != 1 or not is_constant(known.components[ones[0]], 1.0):
        return SmoothMap.identity(chart)
    name = chart.coordinates[ones[0]]
    lo, hi = chart.domain[ones[0]]
    involved = any(name in free_variables(c) for _, c in contact.eta.terms)
    if involved or math.isfinite(lo) or math.isfinite(hi):
        return SmoothMap.identity(chart)
    components[ones[0]] = Variable(name) + shift
    return SmoothMap(chart, chart, tuple(components))


def check_legendrian(
    product: ProductContactChart,
    candidate: LegendrianCandidate,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> CheckReport:
    settings = get_settings()
    expected = (product.chart.dimension - 1) // 2
    if candidate.parameters.dimension != expected:
        raise LegendrianDimensionError(
            f"candidate has dimension {candidate.parameters.dimension}, a Legendrian needs {expected}"
        )
    if candidate.map.target != product.chart:
        raise ProductError("candidate does not map into the product chart")
    points = sample_points(candidate.parameters, samples or 100, settings.seed if seed is None else seed)
    for y in points:
        if np.linalg.matrix_rank(candidate.map.jacobian(y), tol=settings.transversality_tol) != expected:
            raise ImmersionError(f"candidate is not immersed at {list(y)}")
        if not product.chart.contains(candidate.map.at(y)):
            raise ProductError(f"candidate leaves the {product.component} component at {list(y)}")
    pulled = pullback(candidate.map, product.eta)
    return _check("legendrian", [pulled.max_abs(y) for y in points], settings.reeb_tol)


# Periods of principal products


def as_period(value: Union[PeriodLike, float]) -> Union[Fraction, float]:
    """An exact positive rational, or ``math.inf``."""
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "∞"):
            return math.inf
        try:
            value = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise CommensurabilityError(f"{value!r} is not an exact rational") from None
    if isinstance(value, float):
        if math.isinf(value) and value > 0:
            return math.inf
        raise CommensurabilityError(f"float period {value!r} is not an exact rational; pass a Fraction")
    if isinstance(value, bool) or not isinstance(value, (int, Fraction)):
        raise CommensurabilityError(f"period {value!r} is not an exact rational")
    value = Fraction(value)
    if value <= 0:
        raise ProductError(f"periods must be positive, got {value}")
    return value


def bezout(k: int, l: int) -> Tuple[int, int, int]:
    """(x, y, g) with k·x + l·y = g = gcd(k, l)."""
    x, x0 = 1, 0
    y, y0 = 0, 1
    r, r0 = k, l
    while r0 != 0:
        q = r // r0
        r, r0 = r0, r - q * r0
        x, x0 = x0, x - q * x0
        y, y0 = y0, y - q * y0
    return x, y, r


@dataclass(frozen=True)
class PrincipalPeriodPair:
    """Two periods (exact rationals or inf) and ρ₂/ρ₁ = k/l in lowest terms."""

    rho1: Union[Fraction, float]
    rho2: Union[Fraction, float]
    k: Optional[int] = None
    l: Optional[int] = None

    @classmethod
    def of(cls, rho1: Union[PeriodLike, float], rho2: Union[PeriodLike, float]) -> "PrincipalPeriodPair":
        first, second = as_period(rho1), as_period(rho2)
        if math.inf in (first, second):
            return cls(rho1=first, rho2=second)
        # common denominator, then k/l = b/a with gcd(k, l) = 1 certified by Bézout
        scale = math.lcm(first.denominator, second.denominator)
        a, b = int(first * scale), int(second * scale)
        x, y, g = bezout(b, a)
        k, l = b // g, a // g
        if k * x + l * y != 1:
            raise CommensurabilityError(f"could not reduce {second}/{first} to lowest terms")
        if k > INT64_MAX or l > INT64_MAX:
            raise PeriodOverflowError(f"k/l = {k}/{l} does not fit in machine integers")
        return cls(rho1=first, rho2=second, k=k, l=l)


def principal_product_period(rho1: Union[PeriodLike, float], rho2: Union[PeriodLike, float]) -> Union[Fraction, float]:
    """ρ = ρ₂/k = ρ₁/l where ρ₂/ρ₁ = k/l in lowest terms."""
    pair = PrincipalPeriodPair.of(rho1, rho2)
    if pair.rho1 == math.inf:
        return pair.rho2
    if pair.rho2 == math.inf:
        return pair.rho1
    rho = pair.rho2 / pair.k
    if rho != pair.rho1 / pair.l:
        raise CommensurabilityError(f"ρ₂/k = {rho} differs from ρ₁/l = {pair.rho1 / pair.l}")
    return rho


def scaled_period(rho1: PeriodLike, rho2: PeriodLike, factor: PeriodLike) -> Union[Fraction, float]:
    """Period of the product of (M₁, cη₁) and (M₂, cη₂): c times the unscaled one."""
    c = as_period(factor)
    first, second = as_period(rho1), as_period(rho2)
    return principal_product_period(*(p if p == math.inf else c * p for p in (first, second)))


def torus_first_return(
    alpha: PeriodLike,
    beta: PeriodLike,
    a: PeriodLike = Fraction(1, 2),
    b: PeriodLike = Fraction(1, 2),
    bound: int = 64,
) -> Fraction:
    """Smallest t > 0 where γ(t) = (aαt, bβt) meets {(sα, −sβ)} + ℤ².

    Brute force over the lattice shifts |m|, |n| ≤ ``bound``. Speeds are
    turns per unit time on ℝ²/ℤ², so α = 1/ρ₁ and β = 1/ρ₂.
    """
    alpha, beta = as_period(alpha), as_period(beta)
    a, b = Fraction(a), Fraction(b)
    if math.inf in (alpha, beta):
        raise CommensurabilityError("torus speeds must be finite rationals")
    if a + b != 1:
        raise ProductError(f"the curve projects onto the Reeb field only when a + b = 1, got {a + b}")
    best: Optional[Fraction] = None
    for m in range(-bound, bound + 1):
        for n in range(-bound, bound + 1):
            t = (m * beta + n * alpha) / (alpha * beta * (a + b))
            if t > 0 and (best is None or t < best):
                best = t
    if best is None:
        raise ProductError("no intersection within the lattice bound")
    return best


# Principal product η = dt + h_a dxᵃ + g_i dyⁱ


@dataclass(frozen=True)
class PrincipalLocalData:
    """Base chart and potential ϑ of a normal form η = dt + ϑ."""

    base: Chart
    potential: DifferentialForm

    @property
    def omega(self) -> DifferentialForm:
        return exterior_derivative(self.potential)


@dataclass
class PrincipalProduct:
    contact: ContactChart
    fiber: str
    first: PrincipalLocalData
    second: PrincipalLocalData
    renaming1: Dict[str, str]
    renaming2: Dict[str, str]

    def base_form(self) -> DifferentialForm:
        """ω₁ ⊕ ω₂ pulled back to the product chart."""
        chart = self.contact.chart
        return self.first.omega.moved(chart, self.renaming1) + self.second.omega.moved(chart, self.renaming2)


def principal_product(
    first: PrincipalLocalData,
    second: PrincipalLocalData,
    period: Optional[Union[PeriodLike, float]] = None,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> PrincipalProduct:
    r1, r2 = _suffixed(first.base, "1"), _suffixed(second.base, "2")
    names = tuple(r1.values()) + tuple(r2.values())
    fiber = _fresh(names, "t")
    # the chart only needs the fiber length, so measured float periods are fine here
    rho = float(period) if isinstance(period, float) else None if period is None else as_period(period)
    if rho is not None and not rho > 0:
        raise ProductError(f"periods must be positive, got {period}")
    fiber_interval = (0.0, float(rho)) if rho not in (None, math.inf) else (-math.inf, math.inf)
    chart = Chart(
        name=f"{first.base.name}x{second.base.name}_principal",
        coordinates=names + (fiber,),
        domain=first.base.domain + second.base.domain + (fiber_interval,),
        periodic=first.base.periodic + second.base.periodic + (fiber_interval[1] != math.inf,),
        margin=min(first.base.margin, second.base.margin),
    )
    eta = (
        DifferentialForm.differential(chart, fiber)
        + first.potential.moved(chart, r1)
        + second.potential.moved(chart, r2)
    )
    known = VectorFieldHandle.coordinate(chart, fiber)
    product = PrincipalProduct(ContactChart(eta, known, samples, seed), fiber, first, second, r1, r2)
    logger.info("principal product chart %s with fiber %s", chart.name, fiber)
    return product


def principal_product_form(
    first: PrincipalLocalData,
    second: PrincipalLocalData,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> ContactChart:
    """dt + h_a dxᵃ + g_i dyⁱ, verified: contact, reeb = ∂t, dη = p*(ω₁ ⊕ ω₂)."""
    product = principal_product(first, second, samples=samples, seed=seed)
    reports = principal_product_checks(product, samples, seed)
    failed = [name for name, report in reports.items() if not report.passed]
    if failed:
        raise RankDeficiencyError(f"principal product fails {', '.join(failed)}")
    return product.contact


def principal_product_checks(
    product: PrincipalProduct, samples: Optional[int] = None, seed: Optional[int] = None
) -> Dict[str, CheckReport]:
    settings = get_settings()
    contact = product.contact
    points = contact.sample(samples or 100, seed)
    unit = np.zeros(contact.chart.dimension)
    unit[-1] = 1.0
    field_ = reeb(contact.eta)
    difference = contact.d_eta - product.base_form()
    rank_expected = contact.chart.dimension - 1
    ranks = [
        0.0 if np.linalg.matrix_rank(contact.d_eta.matrix(p), tol=settings.transversality_tol) == rank_expected else 1.0
        for p in points
    ]
    return {
        "principal_reeb": _check(
            "principal_reeb", [float(np.abs(field_.at(p) - unit).max()) for p in points], settings.reduction_tol
        ),
        "principal_curvature": _check(
            "principal_curvature", [difference.max_abs(p) for p in points], settings.reduction_tol
        ),
        "principal_rank": _check("principal_rank", ranks, 0.5),
    }

