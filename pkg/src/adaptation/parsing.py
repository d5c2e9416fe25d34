"""
Extraction of a move-list plan from raw model output.

The first JSON object carrying a ``moves`` key wins, whether it sits in a
fenced block or in running prose. Every failure is returned as
``parse_error`` text with the character position where it was detected.
"""
import json
import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from pydantic import ValidationError

from src.core.domain import RebalancingPlan
from src.core.errors import StructuralError
from src.core.plans import GoalClaim, PlanRecord, plan_from_moves

_OPEN_BRACE = re.compile(r"\{")


@dataclass(frozen=True)
class AdapterResponse:
    raw_text: str
    parsed_plan: Optional[RebalancingPlan] = None
    parse_error: Optional[str] = None
    error_position: Optional[int] = None
    goal_claim: Optional[GoalClaim] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if (self.parsed_plan is None) == (self.parse_error is None):
            raise ValueError("AdapterResponse needs exactly one of parsed_plan and parse_error")

    def to_record(self) -> dict:
        return {
            "raw_text": self.raw_text,
            "parsed": self.parsed_plan is not None,
            "parse_error": self.parse_error,
            "error_position": self.error_position,
            "goal_claim": None if self.goal_claim is None else self.goal_claim.model_dump(),
            "notes": list(self.notes),
        }


def _failure(raw: str, message: str, position: int) -> AdapterResponse:
    return AdapterResponse(
        raw_text=raw, parse_error=f"{message} (at char {position})", error_position=position
    )


def _first_move_list(raw: str) -> Tuple[Optional[dict], int, Optional[json.JSONDecodeError]]:
    decoder = json.JSONDecoder()
    first_error = None
    for match in _OPEN_BRACE.finditer(raw):
        try:
            obj, _ = decoder.raw_decode(raw, match.start())
        except json.JSONDecodeError as e:
            first_error = first_error or e
            continue
        if isinstance(obj, dict) and "moves" in obj:
            return obj, match.start(), None
    return None, 0, first_error


def _schema_error(e: ValidationError) -> str:
    first = e.errors()[0]
    where = ".".join(str(part) for part in first["loc"])
    return f"move list does not match the schema at {where}: {first['msg']}"


def parse_response(raw: str, n: int) -> AdapterResponse:
    """
    Parse model output into a plan over ``n`` regions.

    :param raw: Text exactly as returned by the adapter.
    :param n: Number of regions; indices must lie in ``[0, n)``.
    :return: A response holding either the plan or the reason none was extracted.
    """
    raw = raw or ""
    record, position, decode_error = _first_move_list(raw)
    if record is None:
        if decode_error is not None:
            message = f"no well-formed move list found; invalid JSON: {decode_error.msg}"
            return _failure(raw, message, decode_error.pos)
        return _failure(raw, "no JSON object with a 'moves' list found", 0)

    try:
        parsed = PlanRecord.model_validate(record)
    except ValidationError as e:
        return _failure(raw, _schema_error(e), position)

    triples = [(m.from_region, m.to, m.count) for m in parsed.moves]
    try:
        plan = plan_from_moves(triples, n)
    except StructuralError as e:
        return _failure(raw, str(e), position)

    notes = tuple(f"dropped self-move {s}->{d}:{c}" for s, d, c in triples if s == d)
    return AdapterResponse(raw_text=raw, parsed_plan=plan, goal_claim=parsed.goal, notes=notes)
