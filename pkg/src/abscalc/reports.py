"""Pass/fail reports shared by every verification routine and the CLI."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable


PASS, FAIL, SKIPPED = "pass", "fail", "skipped"


def canonical(obj: Any) -> Any:
    """Turn nested values into JSON-safe data with integers written as strings."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return obj
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if hasattr(obj, "to_json"):
        return canonical(obj.to_json())
    return str(obj)


@dataclass
class Case:
    id: str
    status: str
    witness: Any = None
    control: bool = False  # negative control: passes when the mutation is detected

    def to_json(self) -> dict:
        d = {"id": self.id, "status": self.status, "control": self.control}
        if self.witness is not None:
            d["witness"] = canonical(self.witness)
        return d


@dataclass
class Report:
    suite: str
    params: dict = field(default_factory=dict)
    cases: list[Case] = field(default_factory=list)
    duration: float = 0.0
    data: dict = field(default_factory=dict)  # computed values worth recording (invariants etc.)

    @property
    def ok(self) -> bool:
        return all(c.status != FAIL for c in self.cases)

    @property
    def first_failure(self) -> Case | None:
        return next((c for c in self.cases if c.status == FAIL), None)

    def add(self, case_id: str, ok: bool, witness: Any = None) -> Case:
        c = Case(case_id, PASS if ok else FAIL, None if ok else (witness if witness is not None else case_id))
        self.cases.append(c)
        return c

    def add_control(self, case_id: str, inner: "Report") -> Case:
        """Record a mutated-identity run; it passes exactly when ``inner`` failed."""
        bad = inner.first_failure
        if bad is None:
            c = Case(case_id, FAIL, "mutation went undetected", control=True)
        else:
            c = Case(case_id, PASS, None, control=True)
        self.cases.append(c)
        return c

    def extend(self, other: "Report", prefix: str = "") -> None:
        for c in other.cases:
            self.cases.append(Case(prefix + c.id, c.status, c.witness, c.control))
        for k, v in other.data.items():
            self.data[prefix + k] = v

    def to_json(self, with_duration: bool = True) -> dict:
        d = {
            "suite": self.suite,
            "params": canonical(self.params),
            "cases": [c.to_json() for c in sorted(self.cases, key=lambda c: c.id)],
            "status": PASS if self.ok else FAIL,
        }
        if self.data:
            d["data"] = canonical(self.data)
        if with_duration:
            d["duration"] = f"{self.duration:.3f}"
        return d

    def dumps(self, with_duration: bool = True) -> str:
        return json.dumps(self.to_json(with_duration), sort_keys=True, indent=2) + "\n"

    def text(self) -> str:
        lines = [f"suite {self.suite} {json.dumps(canonical(self.params), sort_keys=True)}"]
        for c in sorted(self.cases, key=lambda c: c.id):
            tag = " [control]" if c.control else ""
            extra = f"  witness={json.dumps(canonical(c.witness))}" if c.witness is not None else ""
            lines.append(f"  {c.status:7s} {c.id}{tag}{extra}")
        lines.append(f"  => {'PASS' if self.ok else 'FAIL'} ({len(self.cases)} cases)")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_json(cls, d: dict) -> "Report":
        r = cls(d["suite"], d.get("params", {}))
        for c in d.get("cases", []):
            r.cases.append(Case(c["id"], c["status"], c.get("witness"), c.get("control", False)))
        r.duration = float(d.get("duration", 0.0))
        r.data = d.get("data", {})
        return r


def first_mismatch(pairs: Iterable[tuple[Any, Any, Any]]) -> Any:
    """Return the label of the first (label, lhs, rhs) triple with lhs != rhs."""
    for label, lhs, rhs in pairs:
        if lhs != rhs:
            return label
    return None


def check_all(report: Report, case_id: str, labels: Iterable[Any], pred: Callable[[Any], bool]) -> bool:
    for lab in labels:
        if not pred(lab):
            report.add(case_id, False, lab)
            return False
    report.add(case_id, True)
    return True
