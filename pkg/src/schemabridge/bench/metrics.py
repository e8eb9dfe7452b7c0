"""Output-quality metrics: golden comparison, key-overlap F1, detection P/R."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from ..detect import MismatchReport

MAX_DIFFS = 20


@dataclass(frozen=True)
class ComparisonResult:
    passed: bool
    diffs: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.passed


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _leaf_equal(a: Any, b: Any, epsilon: float) -> bool:
    if _is_number(a) and _is_number(b):
        # numeric type equivalence: 72 == 72.0, tolerance on the difference
        return abs(a - b) <= epsilon
    if type(a) is not type(b):
        return False
    return a == b


def _walk_diffs(actual: Any, golden: Any, epsilon: float, where: str,
                diffs: list[str]) -> None:
    if len(diffs) >= MAX_DIFFS:
        return
    if isinstance(golden, Mapping) or isinstance(actual, Mapping):
        if not isinstance(actual, Mapping) or not isinstance(golden, Mapping):
            diffs.append(f"{where or '$'}: object vs non-object")
            return
        for key in sorted(set(actual) | set(golden)):
            child = f"{where}.{key}" if where else str(key)
            if key not in actual:
                diffs.append(f"{child}: missing")
            elif key not in golden:
                diffs.append(f"{child}: unexpected")
            else:
                _walk_diffs(actual[key], golden[key], epsilon, child, diffs)
            if len(diffs) >= MAX_DIFFS:
                return
        return
    if isinstance(golden, list) or isinstance(actual, list):
        if not isinstance(actual, list) or not isinstance(golden, list):
            diffs.append(f"{where or '$'}: array vs non-array")
            return
        if len(actual) != len(golden):
            diffs.append(f"{where or '$'}: length {len(actual)} vs {len(golden)}")
            return
        for index, (a, g) in enumerate(zip(actual, golden)):
            _walk_diffs(a, g, epsilon, f"{where}[{index}]", diffs)
            if len(diffs) >= MAX_DIFFS:
                return
        return
    if not _leaf_equal(actual, golden, epsilon):
        diffs.append(f"{where or '$'}: {actual!r} != {golden!r}")


def compare_outputs(actual: Any, golden: Any, epsilon: float = 0.01) -> ComparisonResult:
    """Recursive structural equality with numeric tolerance; diff capped at 20 paths."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    diffs: list[str] = []
    _walk_diffs(actual, golden, epsilon, "", diffs)
    return ComparisonResult(passed=not diffs, diffs=tuple(diffs))


def _leaf_map(obj: Any, prefix: str = "") -> dict[str, Any]:
    """Leaf keys of a JSON object; arrays count as leaf values."""
    out: dict[str, Any] = {}
    if isinstance(obj, Mapping):
        for key in obj:
            where = f"{prefix}.{key}" if prefix else str(key)
            child = obj[key]
            if isinstance(child, Mapping):
                out.update(_leaf_map(child, where))
            else:
                out[where] = child
    return out


def field_f1(actual: Any, golden: Any) -> float:
    """Harmonic mean of precision/recall over leaf-key sets; empty vs empty is 1."""
    a = set(_leaf_map(actual if isinstance(actual, Mapping) else {}))
    e = set(_leaf_map(golden if isinstance(golden, Mapping) else {}))
    if not a and not e:
        return 1.0
    shared = len(a & e)
    if shared == 0:
        return 0.0
    precision = shared / len(a) if a else 0.0
    recall = shared / len(e) if e else 0.0
    return 2 * precision * recall / (precision + recall)


def value_accuracy(actual: Any, golden: Any, epsilon: float = 0.01) -> float:
    """Fraction of shared leaf keys whose values match; 1.0 when none are shared."""
    a = _leaf_map(actual if isinstance(actual, Mapping) else {})
    e = _leaf_map(golden if isinstance(golden, Mapping) else {})
    shared = sorted(set(a) & set(e))
    if not shared:
        return 1.0
    matched = sum(
        1 for key in shared if compare_outputs(a[key], e[key], epsilon).passed
    )
    return matched / len(shared)


PathPair = tuple[str | None, str | None]


def _observed_pairs(report: MismatchReport) -> set[PathPair]:
    return {
        (str(m.source_path) if m.source_path else None,
         str(m.target_path) if m.target_path else None)
        for m in report.mismatches
    }


def detection_prf(observed: MismatchReport, expected: Iterable[PathPair]) -> tuple[float, float]:
    """Precision/recall on (source_path, target_path) pairs; kind is ignored."""
    got = _observed_pairs(observed)
    want = {(s, t) for s, t in expected}
    hits = len(got & want)
    precision = hits / len(got) if got else 1.0
    recall = hits / len(want) if want else 1.0
    return precision, recall
