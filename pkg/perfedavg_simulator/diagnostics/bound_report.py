"""Comparison of one measured quantity with its analytic bound, and the report writers."""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from perfedavg_simulator.common.constants import (
    BOUND_ABSOLUTE_TOL,
    BOUND_RELATIVE_TOL,
    MC_MIN_TRIALS,
)
from perfedavg_simulator.common.utils import atomic_write_text

logger = logging.getLogger(__name__)


def within_bound(value: float, analytic: float) -> bool:
    """One-sided check value <= analytic (1 + 1e-9) + 1e-12."""
    return value <= analytic * (1.0 + BOUND_RELATIVE_TOL) + BOUND_ABSOLUTE_TOL


@dataclass
class BoundReport:
    """Outcome of checking one bound.

    Attributes:
        `name` (str): Bound checked, e.g. "stochastic.bias".
        `analytic` (float): Value of the closed-form bound.
        `measured` (float): Measured value of the bounded quantity.
        `ci_upper` (Optional[float]): Upper confidence bound of a Monte-Carlo measurement. Must
            also lie within the bound for the report to pass.
        `trials` (Optional[int]): Monte-Carlo trials behind the measurement.
        `estimated` (bool): Some constant behind `analytic` was estimated, not declared. Such
            reports are informational.
        `constants` (Dict[str, Any]): Constants used, with their provenance.
        `context` (Dict[str, Any]): Where the measurement was taken, e.g. the round and step.
        `rel_tol` (Optional[float]): When set, the check is two-sided: the measurement must lie
            within this relative distance of `analytic`.
    """

    name: str
    analytic: float
    measured: float
    ci_upper: Optional[float] = None
    trials: Optional[int] = None
    estimated: bool = False
    constants: Dict[str, Any] = field(default_factory=dict)
    context: Dict[str, Any] = field(default_factory=dict)
    rel_tol: Optional[float] = None

    def __post_init__(self):
        self.analytic = float(self.analytic)
        self.measured = float(self.measured)
        if not self.passed:
            logger.warning(
                f"Bound {self.name} {self.context or ''} fails: measured {self.measured:.6g}"
                f"{'' if self.ci_upper is None else f' (upper {self.ci_upper:.6g})'} vs "
                f"analytic {self.analytic:.6g} with constants {self.constants}"
            )

    @property
    def margin(self) -> float:
        return self.analytic - self.measured

    @property
    def passed(self) -> bool:
        if self.rel_tol is not None:
            tolerance = self.rel_tol * abs(self.analytic) + BOUND_ABSOLUTE_TOL
            return abs(self.measured - self.analytic) <= tolerance
        if not within_bound(self.measured, self.analytic):
            return False
        return self.ci_upper is None or within_bound(self.ci_upper, self.analytic)

    @property
    def low_trials(self) -> bool:
        """Fewer Monte-Carlo trials than the recommended minimum."""
        return self.trials is not None and self.trials < MC_MIN_TRIALS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "analytic": self.analytic,
            "measured": self.measured,
            "margin": self.margin,
            "passed": self.passed,
            "ci_upper": self.ci_upper,
            "trials": self.trials,
            "low_trials": self.low_trials,
            "estimated": self.estimated,
            "constants": self.constants,
            "context": self.context,
        }


def all_passed(reports: Sequence[BoundReport], include_estimated: bool = False) -> bool:
    """Whether every report passes. Estimated-constant reports are ignored unless asked for."""
    return all(report.passed for report in reports if include_estimated or not report.estimated)


def _closeness(report: BoundReport) -> float:
    if report.analytic > 0:
        return report.measured / report.analytic
    return 0.0 if report.measured <= 0 else float("inf")


def condense(reports: Sequence[BoundReport]) -> List[BoundReport]:
    """One report per name, in order of first appearance: the first failing one, else the one
    whose measurement comes closest to its bound."""
    grouped: Dict[str, List[BoundReport]] = {}
    for report in reports:
        grouped.setdefault(report.name, []).append(report)
    picked = []
    for group in grouped.values():
        failing = [report for report in group if not report.passed]
        picked.append(failing[0] if failing else max(group, key=_closeness))
    return picked


def render_table(reports: Sequence[BoundReport]) -> str:
    """Fixed-width table with one row per report."""
    header = f"{'bound':<28} {'analytic':>14} {'measured':>14} {'margin':>14} {'status':>8}"
    lines = [header, "-" * len(header)]
    for report in reports:
        status = "pass" if report.passed else "FAIL"
        if report.estimated:
            status += "*"
        lines.append(
            f"{report.name:<28} {report.analytic:>14.6g} {report.measured:>14.6g} "
            f"{report.margin:>14.6g} {status:>8}"
        )
    if any(report.estimated for report in reports):
        lines.append("* estimated constants, informational only")
    return "\n".join(lines) + "\n"


def write_reports_json(
    path: str, reports: Sequence[BoundReport], extra: Optional[Dict[str, Any]] = None
) -> None:
    payload: Dict[str, Any] = {"reports": [report.to_dict() for report in reports]}
    if extra:
        payload.update(extra)
    atomic_write_text(path, json.dumps(payload, indent=4, sort_keys=True) + "\n")
    logger.info(f"Wrote {len(reports)} bound reports to {path}")
