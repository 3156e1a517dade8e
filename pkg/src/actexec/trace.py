"""Recorded executions and their line-delimited JSON form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .model import Action, Event, NodeRef
from .timeval import format_time, parse_time

TRACE_VERSION = 1


@dataclass(frozen=True)
class TraceRecord:
    """One executed action or event node.

    ``start``/``completion`` are specified times (model units, before
    adding psi); ``started``/``completed`` are executed wall times.
    """

    node: NodeRef
    kind: str
    name: str
    peripheral: Optional[str]
    start: Fraction
    completion: Fraction
    started: Fraction
    completed: Fraction
    delta: Fraction
    path: int
    deadline_violated: bool = False
    resources: tuple[str, ...] = ()
    outcome: Optional[str] = None
    instance: Optional[int] = None

    @property
    def label(self):
        return Action(self.name, self.peripheral) if self.kind == "action" else Event(self.name)


@dataclass(frozen=True)
class PathRecord:
    """One decision path as the engine handled it.

    ``ready`` is when the atomic controller had the path's nodes in its
    queue (``T^aC``); ``start`` is the path's specified start.
    """

    index: int
    transitions: tuple[str, ...]
    processed: Optional[tuple[str, str]]
    instance: Optional[int]
    start: Optional[Fraction]
    ready: Fraction
    costs: dict = field(default_factory=dict)


@dataclass
class ExecutionTrace:
    psi: Fraction
    dA: Fraction
    dE: Fraction
    time_unit: Fraction
    records: list[TraceRecord] = field(default_factory=list)
    outcomes: list[tuple[str, str]] = field(default_factory=list)
    paths: list[PathRecord] = field(default_factory=list)
    completed: bool = False
    aborted: Optional[str] = None
    notes: list[str] = field(default_factory=list)
    seed: Optional[int] = None
    clock: str = "simulated"

    @property
    def conforming(self) -> bool:
        return self.aborted is None and not any(r.deadline_violated for r in self.records)

    def by_node(self) -> dict:
        return {r.node: r for r in self.records}

    def max_delta(self) -> Fraction | None:
        return max((r.delta for r in self.records), default=None)

    def node_multiset(self) -> list:
        return sorted(r.node for r in self.records)

    def schedule(self) -> dict:
        return {r.node: (r.start, r.completion) for r in self.records}


# -- serialization --------------------------------------------------------------


def _t(x):
    return None if x is None else format_time(x)


def _pt(x):
    return None if x is None else parse_time(x, Fraction(1))


def to_lines(trace: ExecutionTrace) -> Iterable[str]:
    head = {
        "type": "header",
        "version": TRACE_VERSION,
        "psi": _t(trace.psi),
        "dA": _t(trace.dA),
        "dE": _t(trace.dE),
        "timeUnit": _t(trace.time_unit),
        "completed": trace.completed,
        "aborted": trace.aborted,
        "conforming": trace.conforming,
        "notes": trace.notes,
        "seed": trace.seed,
        "clock": trace.clock,
    }
    yield json.dumps(head)
    for p in trace.paths:
        yield json.dumps({
            "type": "path",
            "index": p.index,
            "transitions": list(p.transitions),
            "processed": None if p.processed is None else list(p.processed),
            "instance": p.instance,
            "start": _t(p.start),
            "ready": _t(p.ready),
            "costs": {k: _t(v) for k, v in p.costs.items()},
        })
    for r in trace.records:
        d = asdict(r)
        d["node"] = list(r.node)
        d["resources"] = list(r.resources)
        for k in ("start", "completion", "started", "completed", "delta"):
            d[k] = _t(d[k])
        yield json.dumps({"type": "node", **d})
    for e, u in trace.outcomes:
        yield json.dumps({"type": "outcome", "event": e, "outcome": u})


def write_trace(trace: ExecutionTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in to_lines(trace):
            fh.write(line + "\n")


class TraceFormatError(ValueError):
    pass


def from_lines(lines: Iterable[str]) -> ExecutionTrace:
    trace = None
    for i, raw in enumerate(lines, 1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            d = json.loads(raw)
            kind = d["type"]
            if kind == "header":
                trace = ExecutionTrace(_pt(d["psi"]), _pt(d["dA"]), _pt(d["dE"]), _pt(d["timeUnit"]),
                                       completed=d["completed"], aborted=d["aborted"], notes=list(d.get("notes", [])),
                                       seed=d.get("seed"), clock=d.get("clock", "simulated"))
            elif trace is None:
                raise TraceFormatError(f"line {i}: record before header")
            elif kind == "path":
                trace.paths.append(PathRecord(
                    d["index"], tuple(d["transitions"]),
                    None if d["processed"] is None else tuple(d["processed"]),
                    d["instance"], _pt(d["start"]), _pt(d["ready"]),
                    {k: _pt(v) for k, v in d.get("costs", {}).items()},
                ))
            elif kind == "node":
                trace.records.append(TraceRecord(
                    NodeRef(*d["node"]), d["kind"], d["name"], d["peripheral"],
                    *(_pt(d[k]) for k in ("start", "completion", "started", "completed", "delta")),
                    d["path"], d["deadline_violated"], tuple(d["resources"]), d["outcome"], d["instance"],
                ))
            elif kind == "outcome":
                trace.outcomes.append((d["event"], d["outcome"]))
            else:
                raise TraceFormatError(f"line {i}: unknown record type {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, TraceFormatError):
                raise
            raise TraceFormatError(f"line {i}: {exc}") from None
    if trace is None:
        raise TraceFormatError("trace has no header")
    return trace


def read_trace(path) -> ExecutionTrace:
    with open(path, encoding="utf-8") as fh:
        return from_lines(fh)
