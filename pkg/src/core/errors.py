"""
`errors.py` holds the exception hierarchy shared by every sub-package.

Data-level defects (plan violations, unparseable model output) are returned
as values; the exceptions below are raised only when a caller cannot go on.
"""
from typing import List, Optional, Sequence, TYPE_CHECKING

if TYPE_CHECKING:
    from src.core.domain import PlanViolation


class RebalancingError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(RebalancingError, ValueError):
    """A move list, target vector or index does not fit the region set."""


class PlanValidationError(RebalancingError):
    """Raised by `apply_plan` when the plan fails validation."""

    def __init__(self, violations: Sequence["PlanViolation"]):
        self.violations: List["PlanViolation"] = list(violations)
        summary = "; ".join(v.describe() for v in self.violations)
        super().__init__(f"Plan failed validation with {len(self.violations)} violation(s): {summary}")


class IngestionError(RebalancingError):
    """Trip data could not be ingested (missing file, column or window breach)."""


class InsufficientHistoryError(RebalancingError):
    """The historical-average predictor has no training data for a slot of day."""

    def __init__(self, slot_of_day: int, message: Optional[str] = None):
        self.slot_of_day = slot_of_day
        super().__init__(
            message or f"No training history covers slot-of-day {slot_of_day}"
        )


class ScheduleError(RebalancingError):
    """A scenario script is malformed or an entry was injected twice."""


class EpisodeAbortedError(RebalancingError):
    """A baseline rebalancer produced an infeasible plan during an episode."""

    def __init__(self, slot_index: int, violations: Sequence["PlanViolation"]):
        self.slot_index = slot_index
        self.violations: List["PlanViolation"] = list(violations)
        summary = "; ".join(v.describe() for v in self.violations)
        super().__init__(f"Episode aborted at slot {slot_index}: {summary}")


class AdapterConfigurationError(RebalancingError):
    """The language-model adapter cannot be constructed from its configuration."""


class AdapterTransportError(RebalancingError):
    """The language-model endpoint could not be reached after all retries."""


class ExperimentSpecError(RebalancingError):
    """An experiment spec file is invalid or references missing paths."""
