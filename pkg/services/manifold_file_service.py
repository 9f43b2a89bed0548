"""Manifold files: a TOML description of a chart, a contact form and
optional reduction data, validated with pydantic."""
import hashlib
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ValidationError, field_validator, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from config import get_settings
from services.calculus_service import CalculusError, Chart, DifferentialForm, ParametrizedSurface, SmoothMap
from services.catalog_service import ExampleDescriptor, Reduction
from services.contact_service import ContactChart
from services.expression_service import evaluate, parse

logger = logging.getLogger(__name__)

Bound = Union[float, str]


class ManifoldFileError(ValueError):
    pass


def _bound(value: Bound) -> float:
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity"):
            return math.inf
        if text in ("-inf", "-infinity"):
            return -math.inf
        return evaluate(parse(value, ()), {})
    return float(value)


class ChartSpec(BaseModel):
    name: str = "manifold"
    coords: List[str]
    domain: Optional[List[Tuple[Bound, Bound]]] = None
    periodic: Optional[List[bool]] = None
    margin: Optional[float] = None

    @model_validator(mode="after")
    def _lengths(self):
        d = len(self.coords)
        if self.domain is not None and len(self.domain) != d:
            raise ValueError(f"domain lists {len(self.domain)} intervals for {d} coordinates")
        if self.periodic is not None and len(self.periodic) != d:
            raise ValueError(f"periodic lists {len(self.periodic)} flags for {d} coordinates")
        return self

    def build(self) -> Chart:
        domain = None
        if self.domain is not None:
            domain = tuple((_bound(lo), _bound(hi)) for lo, hi in self.domain)
        margin = get_settings().margin if self.margin is None else self.margin
        return Chart(self.name, tuple(self.coords), domain, tuple(self.periodic) if self.periodic else None, margin)


class ProjectionSpec(ChartSpec):
    name: str = "base"
    map: List[str]

    @model_validator(mode="after")
    def _map_length(self):
        if len(self.map) != len(self.coords):
            raise ValueError("projection map needs one component per base coordinate")
        return self


class SectionSpec(BaseModel):
    map: List[str]


class PeriodSpec(BaseModel):
    value: str

    def resolve(self) -> float:
        value = _bound(self.value)
        if not value > 0:
            raise ValueError(f"period must be positive, got {value}")
        return value


class SurfaceSpec(BaseModel):
    periodic: Tuple[bool, bool] = (False, False)
    collapsed: Tuple[bool, bool] = (False, False)


class ManifoldFile(BaseModel):
    chart: ChartSpec
    form: Dict[str, str]
    projection: Optional[ProjectionSpec] = None
    section: Optional[SectionSpec] = None
    period: Optional[PeriodSpec] = None
    surface: Optional[SurfaceSpec] = None

    @field_validator("form")
    @classmethod
    def _non_empty(cls, value: Dict[str, str]) -> Dict[str, str]:
        if not value:
            raise ValueError("[form] needs at least one coefficient")
        return value

    @model_validator(mode="after")
    def _reduction_pairs(self):
        if (self.projection is None) != (self.section is None):
            raise ValueError("[projection] and [section] come together")
        if self.surface is not None and self.projection is None:
            raise ValueError("[surface] lives on the [projection] base")
        return self


class ManifoldFileService:
    def __init__(self):
        self.settings = get_settings()

    def read(self, path: Union[str, Path]) -> Tuple[ManifoldFile, str]:
        path = Path(path)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise ManifoldFileError(f"cannot read {path}: {exc}") from exc
        digest = hashlib.sha256(raw).hexdigest()
        try:
            document = tomllib.loads(raw.decode("utf-8"))
            return ManifoldFile.model_validate(document), digest
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ManifoldFileError(f"{path}: not a TOML document: {exc}") from exc
        except ValidationError as exc:
            raise ManifoldFileError(f"{path}: {exc}") from exc

    def form(self, document: ManifoldFile, name: str) -> DifferentialForm:
        """The declared one-form, not yet checked for the contact condition."""
        try:
            chart = document.chart.build()
            return DifferentialForm.parse(chart, document.form)
        except CalculusError as exc:
            raise ManifoldFileError(f"{name}: {exc}") from exc

    def descriptor(self, document: ManifoldFile, name: str) -> ExampleDescriptor:
        """Build and contact-check the described chart."""
        eta = self.form(document, name)
        chart = eta.chart
        try:
            period = document.period.resolve() if document.period else math.inf
        except ValueError as exc:
            raise ManifoldFileError(f"{name}: {exc}") from exc
        contact = ContactChart(eta, samples=self.settings.load_samples)

        reduction = None
        surface = None
        if document.projection is not None:
            try:
                base = document.projection.build()
                projection = SmoothMap.parse(chart, base, document.projection.map)
                section = SmoothMap.parse(base, chart, document.section.map)
                reduction = Reduction(projection, section)
                if document.surface is not None:
                    params = Chart(f"{base.name}_surface", base.coordinates, base.domain, base.periodic, margin=0.0)
                    surface = ParametrizedSurface(
                        SmoothMap.parse(params, base, list(base.coordinates)),
                        periodic=document.surface.periodic,
                        collapsed=document.surface.collapsed,
                    )
            except CalculusError as exc:
                raise ManifoldFileError(f"{name}: {exc}") from exc
        logger.info("loaded manifold file %s on chart %s", name, chart.name)
        return ExampleDescriptor(
            id=name,
            contact=contact,
            period=period,
            reduction=reduction,
            surface=surface,
            notes=f"manifold file {name}",
        )

    def load(self, path: Union[str, Path]) -> Tuple[ExampleDescriptor, str]:
        document, digest = self.read(path)
        return self.descriptor(document, str(path)), digest


manifold_file_service = ManifoldFileService()
