"""Findings produced by validators and checkers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass(frozen=True, order=True)
class Finding:
    """One violated rule.

    ``rank`` orders findings by rule number; ``code`` names the rule
    (``"IV"``, ``"Def5"``, ``"deadline"``...), ``subjects`` lists the offending
    node ids, states or events, and ``kind`` separates real violations from
    softer outcomes such as an incomplete trace or a warning.
    """

    rank: int
    code: str
    subjects: tuple = ()
    message: str = field(default="", compare=False)
    kind: str = field(default="violation", compare=False)

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "kind": self.kind,
            "subjects": [_jsonable(s) for s in self.subjects],
            "message": self.message,
        }


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    return x if isinstance(x, (str, int, float, bool, type(None))) else str(x)


@dataclass(frozen=True)
class Report:
    title: str
    findings: tuple[Finding, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "findings", tuple(sorted(self.findings)))

    @property
    def ok(self) -> bool:
        """True when nothing but warnings was found."""
        return not any(f.kind != "warning" for f in self.findings)

    @property
    def violations(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.kind == "violation")

    def codes(self, kind: str | None = None) -> set[str]:
        return {f.code for f in self.findings if kind is None or f.kind == kind}

    def merged(self, *others: "Report", title: str | None = None) -> "Report":
        found = list(self.findings)
        for o in others:
            found.extend(o.findings)
        return Report(title or self.title, tuple(found))

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "ok": self.ok,
            "findings": [f.to_dict() for f in self.findings],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"{self.title}: {'OK' if self.ok else 'FAILED'}"]
        for f in self.findings:
            who = ", ".join(str(_jsonable(s)) for s in f.subjects)
            lines.append(f"  [{f.kind}] {f.code}: {f.message}" + (f" ({who})" if who else ""))
        return "\n".join(lines)

    def __str__(self) -> str:
        return self.to_text()
