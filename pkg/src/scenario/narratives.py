"""
Natural-language renderings of emergent scenarios, driven by the templates in
`narratives.yaml`.
"""
import os
from functools import lru_cache
from typing import Any, Dict, Optional, Sequence

from jinja2 import Environment, StrictUndefined

from src.utils import load_yaml

NARRATIVES_PATH = os.path.join(os.path.dirname(__file__), "narratives.yaml")

_env = Environment(undefined=StrictUndefined, autoescape=False, keep_trailing_newline=False)


@lru_cache(maxsize=None)
def load_templates(path: str = NARRATIVES_PATH) -> Dict[str, Any]:
    return load_yaml(path)


def _render(template: str, **values: Any) -> str:
    return _env.from_string(template).render(**values).strip()


def format_percent(ratio: float) -> str:
    """``0.2 -> "20"``, ``0.125 -> "12.5"``."""
    return f"{round(ratio * 100, 6):g}"


def _window_text(templates: Dict[str, Any], clock_range: Optional[Sequence[str]]) -> str:
    if not clock_range:
        return ""
    start, end = clock_range
    return " " + _render(templates["window"], start=start, end=end)


def rising_demand_narrative(
    regions: Sequence[int],
    ratio: float,
    n_regions: int,
    disclosed: bool,
    seed: int,
    clock_range: Optional[Sequence[str]] = None,
) -> str:
    templates = load_templates()["rising_demand"]
    citywide = len(regions) == n_regions
    if disclosed:
        percent = format_percent(ratio)
        window = _window_text(templates, clock_range)
        if citywide:
            return _render(templates["disclosed_citywide"], percent=percent, window=window)
        return " ".join(
            _render(templates["disclosed"], region=r, percent=percent, window=window) for r in regions
        )
    if citywide:
        return _render(templates["latent_citywide"])
    pool = templates["latent"]
    return " ".join(_render(pool[(r + seed) % len(pool)], region=r) for r in regions)


def shrinking_supply_narrative(removals: Sequence[int], disclosed: bool) -> str:
    templates = load_templates()["shrinking_supply"]
    affected = [(r, int(c)) for r, c in enumerate(removals) if c > 0]
    if not affected:
        return _render(templates["none"])
    key = "disclosed" if disclosed else "latent"
    return " ".join(_render(templates[key], region=r, count=c) for r, c in affected)


def dynamic_goal_narrative(metric: str, direction: str, weight: float) -> str:
    templates = load_templates()["dynamic_goal"]
    objective = _render(
        templates["objective"],
        metric_text=templates["metrics"][metric],
        direction=direction,
        weight=f"{weight:g}",
        revenue_weight=f"{round(1.0 - weight, 6):g}",
    )
    return f"{_render(templates['preamble'])} {objective}"
