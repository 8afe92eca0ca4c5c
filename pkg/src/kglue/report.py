"""Check reports shared by every pipeline stage."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

SCHEMA_VERSION = "1.0"


@dataclass
class Row:
    check: str
    samples: int
    max_residual: float
    passed: bool
    note: str = ""

    def as_dict(self) -> dict[str, Any]:
        res = self.max_residual
        return {
            "check": self.check,
            "samples": int(self.samples),
            "max_residual": res if math.isfinite(res) else str(res),
            "passed": bool(self.passed),
            "note": self.note,
        }


@dataclass
class Report:
    title: str
    rows: list[Row] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    def add(self, check: str, residuals: Iterable[float], tol: float, note: str = "") -> Row:
        vals = [float(r) for r in residuals]
        worst = max(vals) if vals else 0.0
        passed = all(math.isfinite(v) for v in vals) and worst < tol
        row = Row(check, len(vals), worst, passed, note)
        self.rows.append(row)
        return row

    def add_row(self, row: Row) -> Row:
        self.rows.append(row)
        return row

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, check: str) -> Row:
        for r in self.rows:
            if r.check == check:
                return r
        raise KeyError(check)

    def merge(self, other: "Report", prefix: str = "") -> None:
        for r in other.rows:
            self.rows.append(Row(prefix + r.check, r.samples, r.max_residual, r.passed, r.note))

    def as_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "title": self.title,
            "passed": self.passed,
            "rows": [r.as_dict() for r in self.rows],
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=False, default=_jsonable)

    def to_text(self) -> str:
        lines = [f"# {self.title}"]
        width = max([len(r.check) for r in self.rows] + [5])
        for r in self.rows:
            flag = "PASS" if r.passed else "FAIL"
            note = f"  {r.note}" if r.note else ""
            lines.append(f"{flag}  {r.check:<{width}}  n={r.samples:<5d} max_residual={r.max_residual:.3e}{note}")
        for key, val in self.extra.items():
            lines.append(f"{key}: {json.dumps(val, default=_jsonable)}")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _jsonable(obj: Any) -> Any:
    try:
        import numpy as np

        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.generic):
            return obj.item()
    except ImportError:  # pragma: no cover
        pass
    from fractions import Fraction

    if isinstance(obj, Fraction):
        return {"numerator": obj.numerator, "denominator": obj.denominator}
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    return str(obj)
