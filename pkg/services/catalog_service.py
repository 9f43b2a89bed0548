"""Built-in examples: Darboux charts, the Hopf sphere, exact
contactifications, a punctured Hopf chart and torus fixtures.

Every declared closed-form datum is re-verified when an example loads.
"""
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from config import get_settings
from services.calculus_service import (
    Ball,
    Chart,
    DifferentialForm,
    ParametrizedSurface,
    SmoothMap,
    VectorFieldHandle,
    sample_points,
)
from services.contact_service import (
    ContactChart,
    ContactError,
    contact_to_symplectic,
    integrality_check,
    reeb_residual,
)
from services.dynamics_service import minimal_period
from services.prequant_service import PrincipalContactData

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
_ID = re.compile(r"^\s*([A-Za-z_][\w-]*)\s*(?:\(\s*([^)]*?)\s*\))?\s*$")


class CatalogError(ValueError):
    pass


class UnknownExampleError(CatalogError):
    pass


class DescriptorVerificationError(CatalogError):
    pass


@dataclass(frozen=True)
class Reduction:
    projection: SmoothMap
    section: SmoothMap
    omega: Optional[DifferentialForm] = None


@dataclass
class ExampleDescriptor:
    id: str
    contact: Optional[ContactChart] = None
    known_reeb: Optional[VectorFieldHandle] = None
    period: float = math.inf
    reduction: Optional[Reduction] = None
    surface: Optional[ParametrizedSurface] = None
    principal: Optional[PrincipalContactData] = None
    vector_field: Optional[VectorFieldHandle] = None
    witnesses: List[List[float]] = field(default_factory=list)
    notes: str = ""
    verified: Dict[str, float] = field(default_factory=dict)

    @property
    def chart(self) -> Chart:
        if self.contact is not None:
            return self.contact.chart
        return self.vector_field.chart

    @property
    def flow_field(self) -> VectorFieldHandle:
        return self.contact.reeb_field if self.contact is not None else self.vector_field


# Builders


def darboux_chart(n: int) -> Tuple[Chart, DifferentialForm, VectorFieldHandle]:
    coordinates = ["z"] + [f"{c}{i}" for i in range(1, n + 1) for c in ("q", "p")]
    chart = Chart(f"darboux_{n}", tuple(coordinates))
    eta = DifferentialForm.parse(chart, {"z": "1", **{f"q{i}": f"-p{i}" for i in range(1, n + 1)}})
    return chart, eta, VectorFieldHandle.coordinate(chart, "z")


def _base_chart(name: str, chart: Chart, drop: str) -> Chart:
    keep = [i for i, c in enumerate(chart.coordinates) if c != drop]
    return Chart(
        name,
        tuple(chart.coordinates[i] for i in keep),
        tuple(chart.domain[i] for i in keep),
        tuple(chart.periodic[i] for i in keep),
        chart.margin,
    )


def _trivial_reduction(chart: Chart, fiber: str, base_name: str) -> Reduction:
    base = _base_chart(base_name, chart, fiber)
    projection = SmoothMap.parse(chart, base, list(base.coordinates))
    section = SmoothMap.parse(base, chart, ["0" if c == fiber else c for c in chart.coordinates])
    return Reduction(projection, section)


def darboux(n: int) -> ExampleDescriptor:
    if not 1 <= n <= 4:
        raise CatalogError(f"darboux(n) supports 1 <= n <= 4, got {n}")
    chart, eta, known = darboux_chart(n)
    reduction = _trivial_reduction(chart, "z", f"darboux_{n}_base")
    omega = DifferentialForm.parse(reduction.projection.target, {(f"q{i}", f"p{i}"): "1" for i in range(1, n + 1)})
    return ExampleDescriptor(
        id=f"darboux({n})",
        contact=ContactChart(eta, known),
        known_reeb=known,
        reduction=Reduction(reduction.projection, reduction.section, omega),
        notes="η = dz − Σ pᵢ dqᵢ on ℝ^{2n+1}; Reeb field ∂z, all orbits non-compact.",
    )


def darboux_data() -> ExampleDescriptor:
    chart = Chart("darboux_data", ("q", "p", "t"), ((-math.inf, math.inf), (-math.inf, math.inf), (0.0, TWO_PI)), (False, False, True))
    eta = DifferentialForm.parse(chart, {"t": "1", "q": "-p"})
    known = VectorFieldHandle.coordinate(chart, "t")
    contact = ContactChart(eta, known)
    reduction = _trivial_reduction(chart, "t", "darboux_data_base")
    omega = DifferentialForm.parse(reduction.projection.target, {("q", "p"): "1"})
    return ExampleDescriptor(
        id="darboux_data",
        contact=contact,
        known_reeb=known,
        period=TWO_PI,
        reduction=Reduction(reduction.projection, reduction.section, omega),
        principal=PrincipalContactData(contact, "t", TWO_PI),
        notes="Normal form η = dt − p dq with t of period 2π (ħ = 1); prequantization fixture.",
    )


def hopf_chart(excluded: Tuple[Ball, ...] = ()) -> Tuple[Chart, DifferentialForm, VectorFieldHandle]:
    chart = Chart(
        "hopf" if not excluded else "hopf_punctured",
        ("xi1", "xi2", "phi"),
        ((0.0, TWO_PI), (0.0, TWO_PI), (0.0, math.pi / 2)),
        (True, True, False),
        excluded=excluded,
    )
    eta = DifferentialForm.parse(chart, {"xi1": "cos(phi)^2", "xi2": "sin(phi)^2"})
    known = VectorFieldHandle.parse(chart, {"xi1": "1", "xi2": "1"})
    return chart, eta, known


def hopf_base() -> Chart:
    return Chart("hopf_base", ("phi", "psi"), ((0.0, math.pi / 2), (0.0, TWO_PI)), (False, True))


def hopf_surface() -> ParametrizedSurface:
    base = hopf_base()
    params = Chart("hopf_sphere", ("phi", "psi"), base.domain, base.periodic, margin=0.0)
    return ParametrizedSurface(SmoothMap.parse(params, base, ["phi", "psi"]), periodic=(False, True), collapsed=(True, False))


def hopf_normal_form() -> ContactChart:
    """t = ξ₁, ψ = ξ₂ − ξ₁: η = dt + sin²φ dψ."""
    chart = Chart(
        "hopf_normal",
        ("t", "psi", "phi"),
        ((0.0, TWO_PI), (0.0, TWO_PI), (0.0, math.pi / 2)),
        (True, True, False),
    )
    eta = DifferentialForm.parse(chart, {"t": "1", "psi": "sin(phi)^2"})
    return ContactChart(eta, VectorFieldHandle.coordinate(chart, "t"))


def hopf_s3() -> ExampleDescriptor:
    chart, eta, known = hopf_chart()
    base = hopf_base()
    projection = SmoothMap.parse(chart, base, ["phi", "xi2 - xi1"])
    section = SmoothMap.parse(base, chart, ["0", "psi", "phi"])
    omega = DifferentialForm.parse(base, {("phi", "psi"): "sin(2*phi)"})
    return ExampleDescriptor(
        id="hopf_s3",
        contact=ContactChart(eta, known),
        known_reeb=known,
        period=TWO_PI,
        reduction=Reduction(projection, section, omega),
        surface=hopf_surface(),
        principal=PrincipalContactData(hopf_normal_form(), "t", TWO_PI),
        notes=(
            "Dense Hopf chart of S³: the Liouville form ½Σ(q dp − p dq) of ℝ⁴ restricts to "
            "½(cos²φ dξ₁ + sin²φ dξ₂); this chart carries twice that form, whose Reeb flow "
            "rotates both angles with period 2π over the base sphere."
        ),
    )


def hopf_ambient() -> Tuple[DifferentialForm, VectorFieldHandle, SmoothMap, VectorFieldHandle]:
    """(Ω, ν, S³ embedding, rotation field) on ℝ⁴."""
    ambient = Chart("r4", ("q1", "p1", "q2", "p2"))
    omega = DifferentialForm.parse(ambient, {("q1", "p1"): "1", ("q2", "p2"): "1"})
    nu = VectorFieldHandle.parse(ambient, {c: f"{c}/2" for c in ambient.coordinates})
    sphere, _, _ = hopf_chart()
    embed = SmoothMap.parse(
        sphere, ambient, ["cos(phi)*cos(xi1)", "cos(phi)*sin(xi1)", "sin(phi)*cos(xi2)", "sin(phi)*sin(xi2)"]
    )
    rotation = VectorFieldHandle.parse(ambient, {"q1": "-p1", "p1": "q1", "q2": "-p2", "p2": "q2"})
    return omega, nu, embed, rotation


PUNCTURE = Ball((math.pi, math.pi, math.pi / 4), 0.25)
PUNCTURE_WITNESS = [math.pi - 1.0, math.pi - 1.0, math.pi / 4]


def punctured_hopf() -> ExampleDescriptor:
    chart, eta, known = hopf_chart((PUNCTURE,))
    return ExampleDescriptor(
        id="punctured_hopf",
        contact=ContactChart(eta, known),
        known_reeb=known,
        period=TWO_PI,
        witnesses=[PUNCTURE_WITNESS],
        notes="Hopf chart minus a ball around one point of a fiber; the Reeb field is incomplete.",
    )


def exact(kind: str = "liouville") -> ExampleDescriptor:
    potentials = {"liouville": {"q": "-p/2", "p": "q/2"}, "canonical": {"q": "p"}}
    if kind not in potentials:
        raise CatalogError(f"exact(...) takes liouville or canonical, got {kind!r}")
    chart = Chart(f"exact_{kind}", ("q", "p", "t"))
    eta = DifferentialForm.parse(chart, {"t": "1", **potentials[kind]})
    known = VectorFieldHandle.coordinate(chart, "t")
    reduction = _trivial_reduction(chart, "t", f"exact_{kind}_base")
    base = reduction.projection.target
    omega = DifferentialForm.parse(base, {("q", "p"): "1" if kind == "liouville" else "-1"})
    return ExampleDescriptor(
        id=f"exact({kind})",
        contact=ContactChart(eta, known),
        known_reeb=known,
        reduction=Reduction(reduction.projection, reduction.section, omega),
        notes="η = dt + ϑ on ℝ² × ℝ; translation Reeb flow, all orbits non-compact.",
    )


def torus_fixture(k: int, l: int) -> ExampleDescriptor:
    """α∂x − β∂y on ℝ²/ℤ² with α = k/l, β = 1: first return after l."""
    if k <= 0 or l <= 0 or math.gcd(k, l) != 1:
        raise CatalogError(f"torus_fixture needs positive coprime k, l; got ({k}, {l})")
    chart = Chart("torus", ("x", "y"), ((0.0, 1.0), (0.0, 1.0)), (True, True), margin=0.0)
    alpha = Fraction(k, l)
    field_ = VectorFieldHandle.parse(chart, {"x": float(alpha), "y": -1.0})
    return ExampleDescriptor(
        id=f"torus_fixture({k},{l})",
        vector_field=field_,
        period=float(l),
        notes="Linear flow on the unit torus; the return time is the least t with kt/l and t integral.",
    )


# Loading


class CatalogService:
    """Parses example ids, builds descriptors and re-verifies them."""

    def __init__(self):
        self.settings = get_settings()
        self._cache: Dict[str, ExampleDescriptor] = {}

    @staticmethod
    def parse_id(example_id: str) -> Tuple[str, List[str]]:
        match = _ID.match(example_id)
        if not match:
            raise UnknownExampleError(f"cannot parse example id {example_id!r}")
        name = match.group(1).replace("-", "_").lower()
        args = [a.strip() for a in match.group(2).split(",")] if match.group(2) else []
        return name, args

    def build(self, example_id: str) -> ExampleDescriptor:
        name, args = self.parse_id(example_id)
        try:
            if name == "darboux":
                return darboux(int(args[0]) if args else 1)
            if name == "darboux_data" and not args:
                return darboux_data()
            if name == "hopf_s3" and not args:
                return hopf_s3()
            if name == "punctured_hopf" and not args:
                return punctured_hopf()
            if name == "exact":
                return exact(args[0] if args else "liouville")
            if name == "torus_fixture" and len(args) == 2:
                return torus_fixture(int(args[0]), int(args[1]))
        except ValueError as exc:
            if isinstance(exc, CatalogError):
                raise
            raise CatalogError(f"bad arguments in {example_id!r}: {exc}") from exc
        raise UnknownExampleError(
            f"unknown example {example_id!r}; known: darboux(n), darboux_data, hopf_s3, "
            "exact(liouville|canonical), punctured_hopf, torus_fixture(k,l)"
        )

    def load(self, example_id: str) -> ExampleDescriptor:
        name, args = self.parse_id(example_id)
        key = f"{name}({','.join(args)})"
        if key not in self._cache:
            descriptor = self.build(example_id)
            self.verify(descriptor)
            self._cache[key] = descriptor
            logger.info("loaded %s (%s)", descriptor.id, ", ".join(sorted(descriptor.verified)))
        return self._cache[key]

    def verify(self, descriptor: ExampleDescriptor) -> None:
        samples = self.settings.load_samples
        seed = self.settings.seed
        contact = descriptor.contact
        try:
            if contact is not None and descriptor.known_reeb is not None:
                worst = max(
                    reeb_residual(contact.eta, contact.d_eta, descriptor.known_reeb, p) for p in contact.sample(samples)
                )
                self._expect(descriptor, "known_reeb", worst, self.settings.reeb_tol)
            if contact is not None and descriptor.reduction is not None:
                reduction = descriptor.reduction
                omega = contact_to_symplectic(contact, reduction.projection, reduction.section, samples, seed)
                if reduction.omega is not None:
                    difference = omega - reduction.omega
                    base_points = sample_points(omega.chart, samples, seed)
                    worst = max(difference.max_abs(y) for y in base_points)
                    self._expect(descriptor, "known_omega", worst, self.settings.reduction_tol)
                if descriptor.surface is not None and math.isfinite(descriptor.period):
                    report = integrality_check(omega, descriptor.surface, descriptor.period)
                    self._expect(descriptor, "integrality", report.deviation, report.tolerance)
            if math.isfinite(descriptor.period) and not descriptor.witnesses:
                start = sample_points(descriptor.chart, 1, seed)[0]
                result = minimal_period(descriptor.flow_field, start)
                miss = abs(result.period - descriptor.period) if result.period is not None else math.inf
                self._expect(descriptor, "period", miss, 1e-6 * max(1.0, descriptor.period))
        except ContactError as exc:
            raise DescriptorVerificationError(f"{descriptor.id}: {exc}") from exc

    @staticmethod
    def _expect(descriptor: ExampleDescriptor, what: str, residual: float, tolerance: float) -> None:
        if not residual < tolerance:
            raise DescriptorVerificationError(
                f"{descriptor.id}: declared {what} misses by {residual:.3e} (tolerance {tolerance:.0e})"
            )
        descriptor.verified[what] = float(residual)


catalog_service = CatalogService()


def load(example_id: str) -> ExampleDescriptor:
    return catalog_service.load(example_id)
