import logging
import math
from pathlib import Path

from config import get_settings
from graph.state import VerifyState
from services.calculus_service import CalculusError, sample_points
from services.catalog_service import CatalogError, catalog_service
from services.contact_service import (
    CheckReport,
    ContactError,
    ContactReport,
    NotContactError,
    contact_to_symplectic,
    integrality_check,
    is_contact,
    reduction_residuals,
)
from services.dynamics_service import DynamicsError, minimal_period, period_constancy_suite
from services.expression_service import ExpressionError
from services.manifold_file_service import ManifoldFileError, manifold_file_service
from services.report_service import Report, digest_text, report_service, stopwatch

logger = logging.getLogger(__name__)

settings = get_settings()

INPUT_ERRORS = (ExpressionError, ManifoldFileError, CatalogError, CalculusError)


def is_manifold_file(target: str) -> bool:
    return target.endswith(".toml") or Path(target).is_file()


def _add(state: VerifyState, report: Report) -> None:
    state.setdefault("reports", []).append(report)
    logger.info("   %s %s: %.3e (tol %.0e)", "✅" if report.passed else "❌", report.check, report.max_residual, report.tolerance)


def _contact_report(state: VerifyState, report: ContactReport, elapsed: float) -> Report:
    return Report(
        check="contact",
        target=state["target"],
        input_digest=state["digest"],
        seed=state["seed"],
        samples=report.samples,
        max_residual=report.min_volume,
        tolerance=report.threshold,
        passed=report.passed,
        detail="min |η∧(dη)ⁿ/n!|, must exceed the threshold",
        timing=elapsed,
    )


def _from_check(state: VerifyState, check: CheckReport, elapsed: float, detail: str = "") -> Report:
    return report_service.from_check(
        check, state["target"], state["digest"], state["seed"], state.get("tol"), detail=detail, timing=elapsed
    )


def load_target(state: VerifyState) -> VerifyState:
    """Resolve a catalog id or a manifold file into a descriptor."""
    target = state["target"]
    state.setdefault("reports", [])
    try:
        if is_manifold_file(target):
            document, digest = manifold_file_service.read(target)
            state["digest"] = digest
            eta = manifold_file_service.form(document, target)
            with stopwatch() as elapsed:
                report = is_contact(eta, state["samples"], state["seed"])
            if not report.passed:
                _add(state, _contact_report(state, report, elapsed[0]))
                state["halted"] = True
                return state
            state["descriptor"] = manifold_file_service.descriptor(document, target)
        else:
            descriptor = catalog_service.load(target)
            state["descriptor"] = descriptor
            state["digest"] = digest_text(descriptor.id)
    except (NotContactError, *INPUT_ERRORS) as exc:
        state["error"] = str(exc)
    if state.get("error"):
        logger.error("cannot load %s: %s", target, state["error"])
    return state


def check_contact(state: VerifyState) -> VerifyState:
    if any(r.check == "contact" for r in state["reports"]):
        return state
    with stopwatch() as elapsed:
        report = is_contact(state["descriptor"].contact.eta, state["samples"], state["seed"])
    _add(state, _contact_report(state, report, elapsed[0]))
    state["halted"] = not report.passed
    return state


def check_reeb(state: VerifyState) -> VerifyState:
    contact = state["descriptor"].contact
    with stopwatch() as elapsed:
        check = contact.reeb_residuals(state["samples"], state["seed"])
    _add(state, _from_check(state, check, elapsed[0], "max(|η(R) − 1|, |i_R dη|)"))
    return state


def check_lie_derivative(state: VerifyState) -> VerifyState:
    contact = state["descriptor"].contact
    with stopwatch() as elapsed:
        check = contact.lie_reeb_residuals(min(state["samples"], 100), state["seed"])
    _add(state, _from_check(state, check, elapsed[0], "|L_R η| by finite differences"))
    return state


def _period_row(state: VerifyState, residual: float, tolerance: float, passed: bool, samples: int, detail: str, elapsed: float) -> Report:
    tol = state.get("tol")
    if tol is not None and math.isfinite(residual):
        tolerance, passed = tol, bool(residual < tol)
    return Report(
        check="period",
        target=state["target"],
        input_digest=state["digest"],
        seed=state["seed"],
        samples=samples,
        max_residual=residual,
        tolerance=tolerance,
        passed=passed,
        detail=detail,
        timing=elapsed,
    )


def check_period(state: VerifyState) -> VerifyState:
    """Period constancy of the flow; compared with the declared period when finite."""
    descriptor = state["descriptor"]
    declared = descriptor.period
    tolerance = 1e-6 * max(1.0, declared) if math.isfinite(declared) else 0.0
    with stopwatch() as elapsed:
        try:
            if descriptor.contact is not None:
                suite = period_constancy_suite(
                    descriptor.contact,
                    n_orbits=settings.verify_orbits,
                    seed=state["seed"],
                    horizon=state["horizon"],
                    step=state["step"],
                    witnesses=descriptor.witnesses,
                )
                status, periods = suite.status, suite.periods
            else:
                starts = sample_points(descriptor.chart, settings.verify_orbits, state["seed"])
                periods = [minimal_period(descriptor.flow_field, x0, state["horizon"], step=state["step"]).period for x0 in starts]
                closed = [p for p in periods if p is not None]
                status = "periodic" if len(closed) == len(periods) else ("non-periodic" if not closed else "mixed")
        except DynamicsError as exc:
            state["error"] = str(exc)
            return state

    closed = [p for p in periods if p is not None]
    count = len(periods)
    if status == "incomplete":
        row = _period_row(state, math.inf, tolerance, False, count, "incomplete: orbits left the chart", elapsed[0])
    elif status == "non-periodic":
        ok = not math.isfinite(declared)
        detail = "non-periodic" if ok else f"non-periodic, declared {declared:.10g}"
        row = _period_row(state, 0.0 if ok else math.inf, tolerance, ok, count, detail, elapsed[0])
    elif status == "mixed":
        row = _period_row(state, math.inf, tolerance, False, count, f"mixed: {len(closed)} of {count} closed", elapsed[0])
    elif math.isfinite(declared):
        residual = max(abs(p - declared) for p in closed)
        row = _period_row(state, residual, tolerance, residual < tolerance, count, f"periodic, ρ = {declared:.10g}", elapsed[0])
    else:
        mean = sum(closed) / len(closed)
        spread = max(closed) - min(closed)
        row = _period_row(state, spread, 1e-5 * mean, spread < 1e-5 * mean, count, f"periodic, mean {mean:.10g}", elapsed[0])
    _add(state, row)
    return state


def check_reduction(state: VerifyState) -> VerifyState:
    """p∘σ = id, Tp(R) = 0 and p*ω = dη for the declared projection."""
    descriptor = state["descriptor"]
    reduction = descriptor.reduction
    with stopwatch() as elapsed:
        try:
            omega = contact_to_symplectic(
                descriptor.contact, reduction.projection, reduction.section, state["samples"], state["seed"]
            )
        except ContactError as exc:
            _add(
                state,
                Report(
                    check="reduction",
                    target=state["target"],
                    input_digest=state["digest"],
                    seed=state["seed"],
                    samples=state["samples"],
                    max_residual=math.inf,
                    tolerance=settings.reduction_tol,
                    passed=False,
                    detail=str(exc),
                    timing=elapsed[0],
                ),
            )
            return state
        check = reduction_residuals(descriptor.contact, reduction.projection, omega, state["samples"], state["seed"])
    state["omega"] = omega
    _add(state, _from_check(state, check, elapsed[0], "|p*ω − dη|"))
    return state


def check_integrality(state: VerifyState) -> VerifyState:
    descriptor = state["descriptor"]
    with stopwatch() as elapsed:
        report = integrality_check(state["omega"], descriptor.surface, descriptor.period, state.get("tol"), grid=state.get("grid"))
    grid = state.get("grid") or settings.quadrature_grid
    _add(
        state,
        Report(
            check="integrality",
            target=state["target"],
            input_digest=state["digest"],
            seed=state["seed"],
            samples=grid[0] * grid[1],
            max_residual=report.deviation,
            tolerance=report.tolerance,
            passed=report.passed,
            detail=f"∫ω = {report.integral:.10f}, ∫ω/ρ ≈ {report.nearest}",
            timing=elapsed[0],
        ),
    )
    return state


# Routing


def route_after_load(state: VerifyState) -> str:
    if state.get("error") or state.get("halted"):
        return "END"
    if state["descriptor"].contact is None:
        return "check_period"
    return "check_contact"


def route_after_contact(state: VerifyState) -> str:
    return "END" if state.get("halted") else "check_reeb"


def route_after_period(state: VerifyState) -> str:
    if state.get("error"):
        return "END"
    descriptor = state["descriptor"]
    if descriptor.contact is not None and descriptor.reduction is not None:
        return "check_reduction"
    return "END"


def route_after_reduction(state: VerifyState) -> str:
    descriptor = state["descriptor"]
    if state.get("omega") is None or descriptor.surface is None or not math.isfinite(descriptor.period):
        return "END"
    return "check_integrality"
