"""
`domain.py` defines the shared vocabulary: time slots, fleet state, demand and
rebalancing plans. Every value is immutable after construction (the backing
numpy arrays are flagged read-only), so instances can be shared between
threads and episodes freely.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

ArrayLike = Union[np.ndarray, Sequence[int], Sequence[Sequence[int]]]

RegionId = int


def _frozen_int_array(values: ArrayLike, ndim: Optional[int] = None) -> np.ndarray:
    array = np.array(values, dtype=np.int64, copy=True)
    if ndim is not None and array.ndim != ndim:
        raise ValueError(f"Expected a {ndim}-dimensional array, got shape {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, order=True)
class TimeSlot:
    """A (day, slot-of-day) pair; ordering is lexicographic on (day, slot)."""

    day: int
    slot: int

    def __post_init__(self) -> None:
        if self.day < 0 or self.slot < 0:
            raise ValueError(f"TimeSlot fields must be non-negative, got {self}")

    def index(self, slots_per_day: int) -> int:
        """Absolute slot index counted from day 0, slot 0."""
        if self.slot >= slots_per_day:
            raise ValueError(f"slot {self.slot} out of range for T={slots_per_day}")
        return self.day * slots_per_day + self.slot

    @classmethod
    def from_index(cls, index: int, slots_per_day: int) -> "TimeSlot":
        return cls(day=index // slots_per_day, slot=index % slots_per_day)

    def clock(self, slots_per_day: int) -> str:
        """Wall-clock start of the slot, e.g. ``08:00``."""
        minutes = self.slot * (24 * 60) // slots_per_day
        return f"{minutes // 60:02d}:{minutes % 60:02d}"


@dataclass(frozen=True, eq=False)
class FleetState:
    """Available vehicles per region."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = _frozen_int_array(self.counts, ndim=1)
        if (counts < 0).any():
            raise ValueError(f"Fleet counts must be non-negative, got {counts.tolist()}")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.shape[0])

    def total(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, region: RegionId) -> int:
        return int(self.counts[region])

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FleetState) and np.array_equal(self.counts, other.counts)

    def __hash__(self) -> int:
        return hash(self.counts.tobytes())

    def tolist(self) -> list:
        return self.counts.tolist()

    def __repr__(self) -> str:
        return f"FleetState({self.counts.tolist()})"


@dataclass(frozen=True, eq=False)
class DemandMatrix:
    """Origin-destination trip requests for one slot; diagonal allowed."""

    od: np.ndarray

    def __post_init__(self) -> None:
        od = _frozen_int_array(self.od, ndim=2)
        if od.shape[0] != od.shape[1]:
            raise ValueError(f"Demand matrix must be square, got shape {od.shape}")
        if (od < 0).any():
            raise ValueError("Demand entries must be non-negative")
        object.__setattr__(self, "od", od)

    @classmethod
    def zeros(cls, n: int) -> "DemandMatrix":
        return cls(np.zeros((n, n), dtype=np.int64))

    @property
    def n(self) -> int:
        return int(self.od.shape[0])

    def outbound(self) -> np.ndarray:
        """Total requests leaving each region."""
        return self.od.sum(axis=1)

    def total(self) -> int:
        return int(self.od.sum())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DemandMatrix) and np.array_equal(self.od, other.od)

    def __hash__(self) -> int:
        return hash(self.od.tobytes())

    def __repr__(self) -> str:
        return f"DemandMatrix({self.od.tolist()})"


@dataclass(frozen=True, eq=False)
class RebalancingPlan:
    """
    Inter-region relocation matrix, either a baseline plan or an adapted one.

    ``moves[i][j]`` vehicles go from region i to region j before the slot
    begins. Self-moves are normalized to zero on construction. Negative
    entries and non-square shapes are stored as given so that
    `validate_plan` can report them.
    """

    moves: np.ndarray

    def __post_init__(self) -> None:
        moves = np.array(self.moves, dtype=np.int64, copy=True)
        if moves.ndim == 2 and moves.shape[0] == moves.shape[1]:
            np.fill_diagonal(moves, 0)
        moves.setflags(write=False)
        object.__setattr__(self, "moves", moves)

    @classmethod
    def zeros(cls, n: int) -> "RebalancingPlan":
        return cls(np.zeros((n, n), dtype=np.int64))

    @property
    def n(self) -> int:
        return int(self.moves.shape[0]) if self.moves.ndim >= 1 else 0

    def is_square(self) -> bool:
        return self.moves.ndim == 2 and self.moves.shape[0] == self.moves.shape[1]

    def total_moves(self) -> int:
        """Vehicles relocated by the plan (off-diagonal sum)."""
        return int(self.moves.sum()) if self.moves.size else 0

    def outflow(self) -> np.ndarray:
        return self.moves.sum(axis=1)

    def inflow(self) -> np.ndarray:
        return self.moves.sum(axis=0)

    def is_zero(self) -> bool:
        return not self.moves.any()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RebalancingPlan) and np.array_equal(self.moves, other.moves)

    def __hash__(self) -> int:
        return hash((self.moves.shape, self.moves.tobytes()))

    def __repr__(self) -> str:
        moves = ", ".join(
            f"{i}->{j}:{int(c)}" for (i, j), c in np.ndenumerate(self.moves) if c
        ) if self.moves.ndim == 2 else str(self.moves.tolist())
        return f"RebalancingPlan({moves or 'empty'})"


class ViolationKind(str, Enum):
    """Closed set of plan defects reported by `validate_plan`."""

    MALFORMED_SHAPE = "MalformedShape"
    NEGATIVE_ENTRY = "NegativeEntry"
    SOURCE_OVERDRAW = "SourceOverdraw"
    CONSERVATION_BREAK = "ConservationBreak"
    CONSTRAINT_BREACH = "ConstraintBreach"


@dataclass(frozen=True)
class PlanViolation:
    kind: ViolationKind
    detail: str
    location: Optional[Tuple[int, int]] = None

    def __post_init__(self) -> None:
        if not self.detail:
            raise ValueError("PlanViolation.detail must be non-empty")

    def describe(self) -> str:
        where = f" at {self.location}" if self.location is not None else ""
        return f"{self.kind.value}{where}: {self.detail}"

    def to_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "detail": self.detail,
            "location": list(self.location) if self.location is not None else None,
        }


@dataclass(frozen=True)
class PlanConstraints:
    """
    Operator-side limits checked in addition to feasibility.

    ``max_total_moves`` caps relocated vehicles; ``blocked_regions`` may
    neither send nor receive vehicles.
    """

    max_total_moves: Optional[int] = None
    blocked_regions: FrozenSet[int] = field(default_factory=frozenset)

    @classmethod
    def build(
        cls, max_total_moves: Optional[int] = None, blocked_regions: Iterable[int] = ()
    ) -> "PlanConstraints":
        return cls(max_total_moves=max_total_moves, blocked_regions=frozenset(blocked_regions))

    def is_empty(self) -> bool:
        return self.max_total_moves is None and not self.blocked_regions
