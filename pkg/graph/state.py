from typing import Any, List, Optional, Tuple, TypedDict

from services.report_service import Report


class VerifyState(TypedDict, total=False):
    target: str
    samples: int
    seed: int
    tol: Optional[float]  # overrides every check's tolerance
    step: float
    horizon: float
    grid: Optional[Tuple[int, int]]
    descriptor: Any  # ExampleDescriptor once loaded
    digest: str
    omega: Any  # reduced 2-form, set by check_reduction
    reports: List[Report]
    error: str  # input error: the run stops and exits 2
    halted: bool  # the contact condition failed
