import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from .mild.hypotheses import HypothesisReport


class SolveSummary(BaseModel):
    """Outcome of a Picard run, written as summary.json"""
    converged: bool
    iterations: int
    final_residual: float
    max_contraction_ratio: Optional[float] = None
    positivity_min: float
    positivity_ok: bool
    R: float
    threshold: float
    K: float
    L_of_R: float
    initial_norm: float
    truncation_loss: float
    seed: int
    issues: Dict[str, int] = Field(default_factory=dict)


class GaleanoSummary(BaseModel):
    infimum: float
    strict_empty: bool
    non_strict_radii: Dict[str, Any]
    repaired_v0: Optional[float] = None
    repaired_radii: Optional[Dict[str, Any]] = None


class HypothesesRunReport(BaseModel):
    """Everything check-hypotheses measures, written as report.json"""
    model_config = ConfigDict(populate_by_name=True)

    hypotheses: HypothesisReport
    L_of_R: float
    threshold: float
    galeano: GaleanoSummary
    k_growth: List[Dict[str, float]] = Field(default_factory=list)
    seed: int


def write_pydantic_json(obj: BaseModel, out: Union[str, Path]) -> None:
    """Write one model as indented JSON with sorted keys, so reruns compare byte for byte."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    data = make_json_serializable(obj.model_dump(mode="json", exclude_none=True))
    out.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_json_report(path: Union[str, Path]) -> Dict[str, Any]:
    """Read any JSON report written by the pipeline (summary, hypotheses, lattice header)."""
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def flatten_report(data: Any, prefix: str = "") -> Dict[str, Any]:
    """Dotted keys for table display: {"a": {"b": 1}} -> {"a.b": 1}."""
    flat: Dict[str, Any] = {}
    if isinstance(data, dict):
        for key, value in data.items():
            flat.update(flatten_report(value, f"{prefix}{key}."))
    elif isinstance(data, list) and data and all(isinstance(x, dict) for x in data):
        for i, value in enumerate(data):
            flat.update(flatten_report(value, f"{prefix}{i}."))
    else:
        flat[prefix.rstrip(".")] = data
    return flat


def make_json_serializable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: make_json_serializable(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [make_json_serializable(x) for x in obj]
    elif isinstance(obj, set):
        return sorted(make_json_serializable(x) for x in obj)
    elif isinstance(obj, Path):
        return str(obj)
    elif isinstance(obj, float) and obj != obj:
        return None  # NaN is not valid JSON
    elif isinstance(obj, (str, int, float, bool, type(None))):
        return obj
    else:
        return str(obj)  # fallback
