"""Reading specification documents.

A document is JSON.  Besides the model itself it may carry ``plant`` and
``run`` sections; those are kept raw in ``ActivitySpec.extras`` and read by
the plant and engine loaders.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema

from .automaton import (
    AutomatonError,
    IOAutomaton,
    validate_complete,
    validate_consistent,
    validate_deterministic,
    validate_event_causality,
    validate_nonblocking,
)
from .model import (
    Action,
    Activity,
    ActivitySpec,
    Claim,
    ConstraintViolationError,
    Event,
    Node,
    Release,
    SpecError,
    StructuralError,
    UnknownIdentifierError,
    Universe,
    normalize,
    validate_activity,
)
from .report import Report
from .timeval import TimeFormatError, parse_time, parse_unit


class SchemaError(SpecError):
    pass


_TIME = {"type": ["string", "number"]}
_NAME = {"type": "string", "minLength": 1}

SPEC_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["resources", "events", "outcomes", "gamma", "activities", "automaton"],
    "properties": {
        "timeUnit": {"type": "string"},
        "resources": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "peripherals"],
                "properties": {"name": _NAME, "peripherals": {"type": "array", "items": _NAME}},
                "additionalProperties": False,
            },
        },
        "events": {"type": "array", "items": _NAME},
        "outcomes": {"type": "array", "items": _NAME},
        "gamma": {"type": "array", "items": {"type": "array", "items": _NAME, "minItems": 2, "maxItems": 2}},
        "activities": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "nodes"],
                "properties": {
                    "name": _NAME,
                    "nodes": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["id", "kind"],
                            "properties": {
                                "id": _NAME,
                                "kind": {"enum": ["action", "claim", "release", "event"]},
                                "action": _NAME,
                                "peripheral": _NAME,
                                "resource": _NAME,
                                "event": _NAME,
                                "duration": _TIME,
                            },
                            "additionalProperties": False,
                        },
                    },
                    "edges": {"type": "array", "items": {"type": "array", "items": _NAME, "minItems": 2, "maxItems": 2}},
                },
                "additionalProperties": False,
            },
        },
        "automaton": {
            "type": "object",
            "required": ["states", "initial", "finals", "transitions"],
            "properties": {
                "states": {"type": "array", "items": _NAME},
                "initial": {"anyOf": [_NAME, {"type": "array", "items": _NAME}]},
                "finals": {"type": "array", "items": _NAME},
                "transitions": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["from", "to"],
                        "properties": {
                            "from": _NAME,
                            "to": _NAME,
                            "input": {
                                "anyOf": [
                                    {"type": "null"},
                                    {
                                        "type": "object",
                                        "required": ["event", "outcome"],
                                        "properties": {"event": _NAME, "outcome": _NAME},
                                        "additionalProperties": False,
                                    },
                                ]
                            },
                            "output": {"anyOf": [{"type": "null"}, _NAME]},
                        },
                        "additionalProperties": False,
                    },
                },
            },
            "additionalProperties": False,
        },
        "plant": {"type": "object"},
        "run": {"type": "object"},
    },
    "additionalProperties": False,
}

_KIND_FIELDS = {"action": ("action", "peripheral"), "claim": ("resource",), "release": ("resource",), "event": ("event",)}


def _node(doc: dict, act: str, unit) -> Node:
    kind = doc["kind"]
    for f in _KIND_FIELDS[kind]:
        if f not in doc:
            raise SchemaError(f"activity {act!r} node {doc['id']!r}: {kind} node needs {f!r}")
    try:
        dur = parse_time(doc.get("duration", 0), unit)
    except TimeFormatError as exc:
        raise SchemaError(f"activity {act!r} node {doc['id']!r}: {exc}") from None
    if kind == "action":
        label = Action(doc["action"], doc["peripheral"])
    elif kind == "claim":
        label = Claim(doc["resource"])
    elif kind == "release":
        label = Release(doc["resource"])
    else:
        label = Event(doc["event"])
    return Node(doc["id"], label, dur)


def parse_spec(doc: dict, *, validate: bool = True) -> ActivitySpec:
    """Build an :class:`ActivitySpec` from a decoded document.

    Activities are normalized to claim and release every resource.  With
    ``validate`` (the default) any activity violating a structural
    constraint raises :class:`ConstraintViolationError` carrying the report.
    """
    try:
        jsonschema.validate(doc, SPEC_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None

    unit = parse_unit(doc.get("timeUnit", "1ms"))
    names = [r["name"] for r in doc["resources"]]
    if len(set(names)) != len(names):
        raise StructuralError("duplicate resource name")
    universe = Universe.of({r["name"]: r["peripherals"] for r in doc["resources"]})

    activities: dict[str, Activity] = {}
    reports = []
    for a in doc["activities"]:
        if a["name"] in activities:
            raise StructuralError(f"duplicate activity name {a['name']!r}")
        nodes = [_node(n, a["name"], unit) for n in a["nodes"]]
        for n in nodes:
            universe.check_label(n.label, f"activity {a['name']!r} node {n.id!r}: ")
        act = Activity.build(a["name"], nodes, [tuple(e) for e in a.get("edges", [])])
        act = normalize(act, universe)
        activities[act.name] = act
        reports.append(validate_activity(act, universe))

    aut_doc = doc["automaton"]
    transitions = []
    for t in aut_doc["transitions"]:
        inp = t.get("input")
        transitions.append((t["from"], None if inp is None else (inp["event"], inp["outcome"]), t.get("output"), t["to"]))
    try:
        automaton = IOAutomaton.build(aut_doc["states"], aut_doc["initial"], aut_doc["finals"], transitions)
    except AutomatonError as exc:
        raise UnknownIdentifierError(str(exc)) from None

    spec = ActivitySpec(
        universe=universe,
        activities=activities,
        events=frozenset(doc["events"]),
        outcomes=frozenset(doc["outcomes"]),
        gamma=frozenset(tuple(g) for g in doc["gamma"]),
        automaton=automaton,
        time_unit=unit,
        extras={k: doc[k] for k in ("plant", "run") if k in doc},
    )
    spec.check_references()
    if validate:
        merged = Report("activities").merged(*reports)
        if not merged.ok:
            raise ConstraintViolationError("activity constraints violated", merged)
    return spec


def validate_spec(spec: ActivitySpec) -> Report:
    """Every structural check on a parsed specification, in one report."""
    reports = [validate_activity(spec.activities[n], spec.universe) for n in sorted(spec.activities)]
    y = spec.automaton
    reports += [
        validate_deterministic(y, spec.gamma),
        validate_complete(y, spec.gamma),
        validate_nonblocking(y),
        validate_event_causality(y),
        validate_consistent(y, spec.activities),
    ]
    return Report("specification").merged(*reports)


def load_json(path) -> dict:
    with open(Path(path), encoding="utf-8") as fh:
        return json.load(fh)


def load_spec(path, *, validate: bool = True) -> ActivitySpec:
    return parse_spec(load_json(path), validate=validate)


def data_path(name: str) -> Path:
    """Path of a document bundled with the package."""
    return Path(__file__).with_name("data") / name
