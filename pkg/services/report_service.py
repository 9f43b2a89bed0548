"""Check reports: one row per verification, written as JSON lines or as a
human table."""
import hashlib
import logging
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel

from services.contact_service import CheckReport

logger = logging.getLogger(__name__)


class Report(BaseModel):
    check: str
    target: str
    input_digest: str
    seed: int
    samples: int
    max_residual: float
    tolerance: float
    passed: bool
    detail: str = ""
    timing: Optional[float] = None


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@contextmanager
def stopwatch() -> Iterator[List[float]]:
    """Yields a one-slot list that holds the elapsed seconds on exit."""
    slot = [0.0]
    start = time.perf_counter()
    try:
        yield slot
    finally:
        slot[0] = time.perf_counter() - start


class ReportService:
    def from_check(
        self,
        check: CheckReport,
        target: str,
        digest: str,
        seed: int,
        tolerance: Optional[float] = None,
        name: Optional[str] = None,
        detail: str = "",
        timing: Optional[float] = None,
    ) -> Report:
        """Wrap a sampled check; an explicit ``tolerance`` re-decides the pass flag."""
        tol = check.tolerance if tolerance is None else tolerance
        passed = check.passed if tolerance is None else bool(check.max_residual < tol)
        return Report(
            check=name or check.check,
            target=target,
            input_digest=digest,
            seed=seed,
            samples=check.samples,
            max_residual=check.max_residual,
            tolerance=tol,
            passed=passed,
            detail=detail,
            timing=timing,
        )

    @staticmethod
    def ordered(reports: Iterable[Report]) -> List[Report]:
        return sorted(reports, key=lambda r: (r.check, r.target))

    def to_jsonl(self, reports: Iterable[Report], timing: bool = False) -> str:
        exclude = None if timing else {"timing"}
        return "".join(r.model_dump_json(exclude=exclude) + "\n" for r in self.ordered(reports))

    def write_jsonl(self, reports: Sequence[Report], path: str, timing: bool = False) -> None:
        text = self.to_jsonl(reports, timing)
        if path == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
            return
        Path(path).write_text(text, encoding="utf-8")
        logger.info("wrote %d reports to %s", len(reports), path)

    def table(self, reports: Iterable[Report], timing: bool = False) -> str:
        rows = []
        for r in self.ordered(reports):
            row = {
                "": "✅" if r.passed else "❌",
                "check": r.check,
                "target": r.target,
                "max residual": f"{r.max_residual:.3e}" if math.isfinite(r.max_residual) else str(r.max_residual),
                "tolerance": f"{r.tolerance:.0e}",
                "samples": r.samples,
                "detail": r.detail,
            }
            if timing and r.timing is not None:
                row["time (s)"] = f"{r.timing:.2f}"
            rows.append(row)
        if not rows:
            return "(no checks ran)"
        return pd.DataFrame(rows).to_string(index=False)

    @staticmethod
    def exit_code(reports: Iterable[Report]) -> int:
        return 0 if all(r.passed for r in reports) else 1


report_service = ReportService()
