"""Exceptions and numerical issue collection for the mild-solution pipeline.

Collects:
- Cosine clamping events near grazing / head-on collisions
- Negative densities floored before entering the geometric factor
- Picard iterates leaving the R-ball, positivity violations
- Truncation losses of the momentum box
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional


class EnskogError(Exception):
    """Root of all errors raised by the library."""


class InputError(EnskogError, ValueError):
    """An argument is outside its declared range."""


class DomainError(EnskogError, ValueError):
    """A collision quantity was requested outside its domain."""


class DegenerateCollisionError(DomainError):
    """The scattering angle is undefined because g = 0."""


class SmallnessViolated(EnskogError, RuntimeError):
    """Initial data or ball radius violate the near-vacuum precondition."""


class NoConvergence(EnskogError, RuntimeError):
    """Picard iteration stopped at max_iter with the residual above tol.

    The last trajectory and the diagnostics are attached so callers can
    still write them out.
    """

    def __init__(self, message: str, trajectory: Any = None, diagnostics: Any = None):
        super().__init__(message)
        self.trajectory = trajectory
        self.diagnostics = diagnostics


class IssueType(str, Enum):
    """Types of numerical issues."""
    CLAMPED_COSINE = "clamped_cosine"
    NEGATIVE_DENSITY = "negative_density"
    BALL_EXIT = "ball_exit"
    POSITIVITY_VIOLATION = "positivity_violation"
    TRUNCATION_LOSS = "truncation_loss"
    NO_CONVERGENCE = "no_convergence"


@dataclass
class NumericalIssue:
    """A single issue found during a run."""
    issue_type: IssueType
    stage: str
    message: str
    value: Optional[Any] = None
    context: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "issue_type": self.issue_type.value,
            "stage": self.stage,
            "message": self.message,
            "value": _safe_serialize(self.value),
            "context": self.context,
        }


def _safe_serialize(value: Any, max_len: int = 500) -> Any:
    """Safely serialize a value, truncating if needed."""
    if value is None:
        return None
    if hasattr(value, "item") and getattr(value, "ndim", 1) == 0:
        value = value.item()
    try:
        s = json.dumps(value)
        if len(s) > max_len:
            return s[:max_len] + "..."
        return value
    except (TypeError, ValueError):
        s = str(value)
        if len(s) > max_len:
            return s[:max_len] + "..."
        return s


class IssueCollector:
    """Collects numerical issues during a scenario.

    Usage:
        collector = IssueCollector()
        collector.add_issue(IssueType.BALL_EXIT, "picard", "iterate left the ball", 1.02)
        collector.write_report("issues.jsonl")
    """

    def __init__(self):
        self._issues: List[NumericalIssue] = []

    def add_issue(
        self,
        issue_type: IssueType,
        stage: str,
        message: str,
        value: Any = None,
        **context,
    ):
        """Add a numerical issue."""
        self._issues.append(
            NumericalIssue(
                issue_type=issue_type,
                stage=stage,
                message=message,
                value=value,
                context=context,
            )
        )

    def extend(self, other: "IssueCollector"):
        self._issues.extend(other.issues)

    @property
    def issues(self) -> List[NumericalIssue]:
        return self._issues

    def has_errors(self) -> bool:
        """Check if any errors (not just warnings) were collected."""
        error_types = {IssueType.POSITIVITY_VIOLATION, IssueType.NO_CONVERGENCE}
        return any(i.issue_type in error_types for i in self._issues)

    def get_summary(self) -> Dict[str, int]:
        """Get count of issues by type."""
        summary: Dict[str, int] = {}
        for issue in self._issues:
            key = issue.issue_type.value
            summary[key] = summary.get(key, 0) + 1
        return summary

    def write_report(self, output_path: Path | str):
        """Write issues to a JSONL file."""
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, "w") as f:
            for issue in self._issues:
                f.write(json.dumps(issue.to_dict()) + "\n")

    def print_summary(self):
        """Print a summary of collected issues."""
        summary = self.get_summary()
        if not summary:
            print("No numerical issues found.")
            return

        print(f"\nNumerical issues summary ({len(self._issues)} total):")
        for issue_type, count in sorted(summary.items()):
            print(f"  {issue_type}: {count}")

        for issue in self._issues[:5]:
            print(f"  - [{issue.stage}] {issue.message}")
        if len(self._issues) > 5:
            print(f"  ... and {len(self._issues) - 5} more")
