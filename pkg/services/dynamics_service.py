"""Fixed-step RK4 flows, first-return (minimal period) detection and the
period-constancy suite.

Global error of the integrator is O(h⁴); return times are refined by
bisection on the derivative of the wrapped squared distance to x0.
"""
import logging
import math
from typing import Callable, List, Literal, Optional, Sequence

import numpy as np
from numpy.linalg import LinAlgError
from pydantic import BaseModel
from scipy.optimize import bisect

from config import get_settings
from services.calculus_service import CalculusError, Chart, VectorFieldHandle
from services.contact_service import ContactChart, ContactError, reeb_residual
from services.expression_service import ExpressionError

logger = logging.getLogger(__name__)


class DynamicsError(RuntimeError):
    """Base class for flow failures."""


class FlowDomainExit(DynamicsError):
    def __init__(self, exit_time: float, point: Sequence[float]):
        self.exit_time = float(exit_time)
        self.point = [float(x) for x in point]
        super().__init__(f"trajectory left the chart at t = {self.exit_time:.6f} near {self.point}")


class FieldResolutionError(DynamicsError):
    pass


class PeriodError(DynamicsError):
    pass


class FlowResult(BaseModel):
    final_point: List[float]
    elapsed: float
    step: float
    steps: int
    max_residual: float = 0.0


class PeriodResult(BaseModel):
    status: Literal["periodic", "no-return-within-horizon"]
    period: Optional[float] = None
    return_distance: Optional[float] = None
    refined: bool = False
    iterations: int = 0


class PeriodSuiteReport(BaseModel):
    status: Literal["periodic", "non-periodic", "mixed", "incomplete"]
    periods: List[Optional[float]]
    exits: List[float] = []
    mean: Optional[float] = None
    spread: Optional[float] = None
    passed: bool


def return_distance(chart: Chart, x0: np.ndarray, x: np.ndarray) -> float:
    """ℓ∞ distance with periodic coordinates wrapped."""
    return float(np.abs(chart.displacement(x0, x)).max())


class RK4Integrator:
    """Classical fourth-order Runge–Kutta with a fixed step."""

    def __init__(self, field_: VectorFieldHandle, step: Optional[float] = None):
        self.field = field_
        self.chart = field_.chart
        self.step = get_settings().rk4_step if step is None else step
        if not self.step > 0:
            raise DynamicsError(f"step must be positive, got {self.step}")

    def velocity(self, x: np.ndarray) -> np.ndarray:
        try:
            v = self.field.at(x)
        except (ExpressionError, CalculusError, ContactError, LinAlgError) as exc:
            raise FieldResolutionError(f"cannot resolve the field at {list(x)}: {exc}") from exc
        if not np.all(np.isfinite(v)):
            raise FieldResolutionError(f"field is not finite at {list(x)}")
        return v

    def advance(self, x: np.ndarray, h: float, k1: Optional[np.ndarray] = None) -> np.ndarray:
        k1 = self.velocity(x) if k1 is None else k1
        k2 = self.velocity(x + 0.5 * h * k1)
        k3 = self.velocity(x + 0.5 * h * k2)
        k4 = self.velocity(x + h * k3)
        return x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6

    def _accept(self, x: np.ndarray, t: float) -> np.ndarray:
        x = self.chart.wrap(x)
        if not self.chart.contains(x):
            raise FlowDomainExit(t, x)
        return x

    def flow(
        self,
        x0: Sequence[float],
        duration: float,
        residual: Optional[Callable[[np.ndarray], float]] = None,
    ) -> FlowResult:
        x = np.array(x0, dtype=float)
        if not self.chart.contains(x):
            raise DynamicsError(f"start point {list(x)} is outside chart {self.chart.name}")
        direction = 1.0 if duration >= 0 else -1.0
        full_steps = int(math.floor(abs(duration) / self.step + 1e-9))
        remainder = abs(duration) - full_steps * self.step
        worst = residual(x) if residual else 0.0
        t = 0.0
        for _ in range(full_steps):
            x = self._accept(self.advance(x, direction * self.step), t + direction * self.step)
            t += direction * self.step
            if residual:
                worst = max(worst, residual(x))
        if remainder > 1e-15:
            x = self._accept(self.advance(x, direction * remainder), duration)
            if residual:
                worst = max(worst, residual(x))
        return FlowResult(
            final_point=[float(v) for v in x],
            elapsed=float(duration),
            step=self.step,
            steps=full_steps + (1 if remainder > 1e-15 else 0),
            max_residual=float(worst),
        )

    def _distance_slope(self, x0: np.ndarray, x: np.ndarray, v: np.ndarray) -> float:
        # derivative of the wrapped squared distance |x(t) − x0|²
        return float(2.0 * self.chart.displacement(x0, x) @ v)

    def minimal_period(
        self,
        x0: Sequence[float],
        horizon: Optional[float] = None,
        return_tol: Optional[float] = None,
    ) -> PeriodResult:
        settings = get_settings()
        horizon = settings.period_horizon if horizon is None else horizon
        return_tol = settings.return_tol if return_tol is None else return_tol
        x0 = np.array(x0, dtype=float)
        if not self.chart.contains(x0):
            raise DynamicsError(f"start point {list(x0)} is outside chart {self.chart.name}")

        x = x0
        v = self.velocity(x)
        t = 0.0
        slope = 0.0
        steps = int(math.ceil(horizon / self.step))
        for _ in range(steps):
            x_next = self._accept(self.advance(x, self.step, v), t + self.step)
            v_next = self.velocity(x_next)
            slope_next = self._distance_slope(x0, x_next, v_next)
            # a local minimum of the distance lies in [t, t + h]
            if t > 0 and slope < 0 <= slope_next:
                result = self._refine(x0, x, v, t, slope, slope_next, return_tol)
                if result is not None:
                    return result
            x, v, t, slope = x_next, v_next, t + self.step, slope_next
        logger.debug("no return within horizon %.1f from %s", horizon, list(x0))
        return PeriodResult(status="no-return-within-horizon")

    def _refine(
        self,
        x0: np.ndarray,
        x: np.ndarray,
        v: np.ndarray,
        t: float,
        slope: float,
        slope_next: float,
        return_tol: float,
    ) -> Optional[PeriodResult]:
        def state(tau: float) -> np.ndarray:
            return self.chart.wrap(self.advance(x, tau - t, v)) if tau > t else x

        def slope_at(tau: float) -> float:
            y = state(tau)
            return self._distance_slope(x0, y, self.velocity(y))

        iterations = 0
        if slope_next == 0.0:
            root = t + self.step
        else:
            root, info = bisect(slope_at, t, t + self.step, xtol=1e-10, full_output=True)
            iterations = info.iterations
        distance = return_distance(self.chart, x0, state(root))
        if distance >= return_tol:
            return None
        return PeriodResult(
            status="periodic",
            period=float(root),
            return_distance=distance,
            refined=bool(distance < get_settings().refined_return_tol),
            iterations=iterations,
        )


def flow(
    field_: VectorFieldHandle,
    x0: Sequence[float],
    duration: float,
    step: Optional[float] = None,
    residual: Optional[Callable[[np.ndarray], float]] = None,
) -> FlowResult:
    return RK4Integrator(field_, step).flow(x0, duration, residual)


def minimal_period(
    field_: VectorFieldHandle,
    x0: Sequence[float],
    horizon: Optional[float] = None,
    return_tol: Optional[float] = None,
    step: Optional[float] = None,
) -> PeriodResult:
    return RK4Integrator(field_, step).minimal_period(x0, horizon, return_tol)


def reeb_flow(contact: ContactChart, x0: Sequence[float], duration: float, step: Optional[float] = None) -> FlowResult:
    """Flow of the Reeb field, monitoring the defining-equation residual."""
    field_ = contact.reeb_field
    return flow(field_, x0, duration, step, lambda x: reeb_residual(contact.eta, contact.d_eta, field_, x))


def period_constancy_suite(
    contact: ContactChart,
    n_orbits: Optional[int] = None,
    seed: Optional[int] = None,
    horizon: Optional[float] = None,
    step: Optional[float] = None,
    witnesses: Sequence[Sequence[float]] = (),
    expect_periodic: bool = False,
) -> PeriodSuiteReport:
    """Minimal periods of seeded Reeb orbits, plus optional extra start points.

    Passes when all orbits are closed with spread below 1e-5·mean, or
    when none of them returns. Domain exits make the suite incomplete.
    """
    settings = get_settings()
    n_orbits = settings.period_orbits if n_orbits is None else n_orbits
    integrator = RK4Integrator(contact.reeb_field, step)
    starts = list(contact.sample(n_orbits, seed)) + [np.asarray(p, dtype=float) for p in witnesses]

    periods: List[Optional[float]] = []
    exits: List[float] = []
    for x0 in starts:
        try:
            result = integrator.minimal_period(x0, horizon)
        except FlowDomainExit as exc:
            logger.info("orbit from %s left the chart at t = %.4f", list(x0), exc.exit_time)
            exits.append(exc.exit_time)
            periods.append(None)
            continue
        periods.append(result.period)

    closed = [p for p in periods if p is not None]
    if exits:
        return PeriodSuiteReport(status="incomplete", periods=periods, exits=exits, passed=False)
    if expect_periodic and len(closed) != len(periods):
        raise PeriodError(f"{len(periods) - len(closed)} of {len(periods)} orbits did not return")
    if not closed:
        return PeriodSuiteReport(status="non-periodic", periods=periods, passed=True)
    if len(closed) != len(periods):
        return PeriodSuiteReport(status="mixed", periods=periods, passed=False)
    mean = float(np.mean(closed))
    spread = float(max(closed) - min(closed))
    logger.info("periods over %d orbits: mean %.10f, spread %.3e", len(closed), mean, spread)
    return PeriodSuiteReport(
        status="periodic",
        periods=periods,
        mean=mean,
        spread=spread,
        passed=bool(spread < 1e-5 * mean),
    )
