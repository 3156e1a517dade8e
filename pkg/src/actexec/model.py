"""Activities, activity specifications and their structural validation.

An activity is a DAG of timed nodes.  Each node is an action on a peripheral,
a claim or release of a resource, or the emission of an event.  Claims and
releases take zero time; the other durations are exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Hashable, Iterable, Mapping, NamedTuple, Union

from .report import Finding, Report

NodeId = Hashable


class SpecError(Exception):
    """Base class for everything wrong with a specification."""


class StructuralError(SpecError):
    """Duplicate node ids, edges to undeclared nodes and similar."""


class UnknownIdentifierError(SpecError):
    pass


class CrossReferenceError(SpecError):
    pass


class ConstraintViolationError(SpecError):
    def __init__(self, message: str, report: Report):
        super().__init__(message + "\n" + report.to_text())
        self.report = report


# -- labels -------------------------------------------------------------------


@dataclass(frozen=True)
class Action:
    action: str
    peripheral: str

    def __str__(self):
        return f"({self.action},{self.peripheral})"


@dataclass(frozen=True)
class Claim:
    resource: str

    def __str__(self):
        return f"({self.resource},cl)"


@dataclass(frozen=True)
class Release:
    resource: str

    def __str__(self):
        return f"({self.resource},rl)"


@dataclass(frozen=True)
class Event:
    event: str

    def __str__(self):
        return self.event


NodeLabel = Union[Action, Claim, Release, Event]


def is_observable(label: NodeLabel) -> bool:
    """Action and event nodes are executed on the plant; resource nodes are not."""
    return isinstance(label, (Action, Event))


@dataclass(frozen=True)
class Node:
    id: NodeId
    label: NodeLabel
    duration: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "duration", Fraction(self.duration))
        if self.duration < 0:
            raise StructuralError(f"node {self.id!r}: negative duration {self.duration}")
        if isinstance(self.label, (Claim, Release)) and self.duration != 0:
            raise StructuralError(f"node {self.id!r}: resource nodes take zero time")


class NodeRef(NamedTuple):
    """Id of a node inside a composed activity.

    ``instance`` counts sequenced activities from 1, so two copies of the
    same activity in one behavior never share node ids.
    """

    instance: int
    activity: str
    local: str

    def __str__(self):
        return f"{self.activity}#{self.instance}.{self.local}"


# -- universe -----------------------------------------------------------------


@dataclass(frozen=True)
class Universe:
    """Declared resources and the peripherals each one owns."""

    resources: Mapping[str, frozenset[str]]

    @classmethod
    def of(cls, resources: Mapping[str, Iterable[str]]) -> "Universe":
        owners: dict[str, str] = {}
        for r, ps in resources.items():
            for p in ps:
                if p in owners:
                    raise StructuralError(f"peripheral {p!r} declared in {owners[p]!r} and {r!r}")
                owners[p] = r
        return cls({r: frozenset(ps) for r, ps in resources.items()})

    @cached_property
    def owner(self) -> dict[str, str]:
        return {p: r for r, ps in self.resources.items() for p in ps}

    @property
    def resource_names(self) -> list[str]:
        return sorted(self.resources)

    def check_label(self, label: NodeLabel, where: str = "") -> None:
        if isinstance(label, Action):
            if label.peripheral not in self.owner:
                raise UnknownIdentifierError(f"{where}undeclared peripheral {label.peripheral!r}")
        elif isinstance(label, (Claim, Release)):
            if label.resource not in self.resources:
                raise UnknownIdentifierError(f"{where}undeclared resource {label.resource!r}")


# -- activities ---------------------------------------------------------------


@dataclass(frozen=True)
class Activity:
    """A DAG of nodes with a dependency relation ``edges``."""

    name: str
    nodes: Mapping[NodeId, Node]
    edges: frozenset = frozenset()

    @classmethod
    def build(cls, name: str, nodes: Iterable[Node], edges: Iterable[tuple] = ()) -> "Activity":
        table: dict[NodeId, Node] = {}
        for n in nodes:
            if n.id in table:
                raise StructuralError(f"activity {name!r}: duplicate node id {n.id!r}")
            table[n.id] = n
        deps = frozenset((a, b) for a, b in edges)
        for a, b in deps:
            for end in (a, b):
                if end not in table:
                    raise StructuralError(f"activity {name!r}: edge ({a!r}, {b!r}) names unknown node {end!r}")
        return cls(name, table, deps)

    @cached_property
    def succ(self) -> dict[NodeId, set]:
        out: dict[NodeId, set] = {n: set() for n in self.nodes}
        for a, b in self.edges:
            out[a].add(b)
        return out

    @cached_property
    def pred(self) -> dict[NodeId, set]:
        inc: dict[NodeId, set] = {n: set() for n in self.nodes}
        for a, b in self.edges:
            inc[b].add(a)
        return inc

    @property
    def is_empty(self) -> bool:
        return not self.nodes

    def label(self, n: NodeId) -> NodeLabel:
        return self.nodes[n].label

    def claims(self) -> dict[str, list[NodeId]]:
        return self._resource_nodes(Claim)

    def releases(self) -> dict[str, list[NodeId]]:
        return self._resource_nodes(Release)

    def _resource_nodes(self, kind) -> dict[str, list[NodeId]]:
        out: dict[str, list[NodeId]] = {}
        for nid in sorted(self.nodes):
            lab = self.nodes[nid].label
            if isinstance(lab, kind):
                out.setdefault(lab.resource, []).append(nid)
        return out

    def event_nodes(self, event: str | None = None) -> list[NodeId]:
        return [
            nid
            for nid in sorted(self.nodes)
            if isinstance(self.nodes[nid].label, Event) and (event is None or self.nodes[nid].label.event == event)
        ]

    def emitted_events(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for nid in self.event_nodes():
            e = self.nodes[nid].label.event
            counts[e] = counts.get(e, 0) + 1
        return counts

    def topological_order(self) -> list[NodeId]:
        """Kahn's algorithm, smallest id first among ready nodes."""
        import heapq

        indeg = {n: len(p) for n, p in self.pred.items()}
        ready = [n for n, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            n = heapq.heappop(ready)
            order.append(n)
            for m in self.succ[n]:
                indeg[m] -= 1
                if indeg[m] == 0:
                    heapq.heappush(ready, m)
        if len(order) != len(self.nodes):
            raise StructuralError(f"activity {self.name!r} has a dependency cycle")
        return order


EMPTY_ACTIVITY = Activity("ε", {}, frozenset())


def predecessors(a: Activity, n: NodeId) -> set:
    """Direct predecessors of ``n`` (not the transitive closure)."""
    if n not in a.nodes:
        raise KeyError(f"activity {a.name!r} has no node {n!r}")
    return set(a.pred[n])


def reachability(a: Activity) -> tuple[list[NodeId], dict[NodeId, int], list[int]]:
    """Transitive closure as bitsets: ``reach[i]`` has bit ``j`` set iff i ->+ j."""
    order = sorted(a.nodes)
    index = {n: i for i, n in enumerate(order)}
    succ_bits = [0] * len(order)
    for s, t in a.edges:
        succ_bits[index[s]] |= 1 << index[t]
    reach = list(succ_bits)
    changed = True
    while changed:
        changed = False
        for i in range(len(order)):
            acc = reach[i]
            bits = acc
            while bits:
                low = bits & -bits
                j = low.bit_length() - 1
                bits ^= low
                acc |= reach[j]
            if acc != reach[i]:
                reach[i] = acc
                changed = True
    return order, index, reach


# -- validation ---------------------------------------------------------------

CONSTRAINT_RANK = {
    "acyclic": 0,
    "I": 1, "II": 2, "III": 3, "IV": 4, "V": 5, "VI": 6,
    "VII": 7, "VIII": 8, "IX": 9, "X": 10, "XI": 11,
}

_MESSAGES = {
    "acyclic": "dependency cycle",
    "I": "actions on one peripheral are not sequentially ordered",
    "II": "resource not claimed exactly once",
    "III": "resource not released exactly once",
    "IV": "action not preceded by a claim of its resource",
    "V": "action not succeeded by a release of its resource",
    "VI": "release not preceded by a claim of its resource",
    "VII": "claim not succeeded by a release of its resource",
    "VIII": "claim node has a predecessor",
    "IX": "release node has a successor",
    "X": "event node has no predecessor",
    "XI": "instances of one event are not sequentially ordered",
}


def _finding(code: str, subjects, detail: str = "") -> Finding:
    msg = _MESSAGES[code] + (f": {detail}" if detail else "")
    return Finding(CONSTRAINT_RANK[code], code, tuple(sorted(subjects)), msg)


def validate_activity(a: Activity, universe: Universe) -> Report:
    """Check every structural constraint on an activity.

    Constraint numbering follows the activity framework (I to XI); a cycle is
    reported under ``"acyclic"``.  The empty activity is always well formed.
    Labels that name undeclared peripherals or resources raise
    :class:`UnknownIdentifierError` instead of producing findings.
    """
    title = f"activity {a.name}"
    if a.is_empty:
        return Report(title)
    for nid, node in a.nodes.items():
        universe.check_label(node.label, f"activity {a.name!r}, node {nid!r}: ")

    order, index, reach = reachability(a)
    bit = {n: 1 << i for n, i in index.items()}

    def reaches(x, y) -> bool:
        return bool(reach[index[x]] & bit[y])

    def has_pred(y) -> bool:
        b = bit[y]
        return any(r & b for r in reach)

    findings: list[Finding] = []
    cyclic = [n for n in order if reaches(n, n)]
    if cyclic:
        findings.append(_finding("acyclic", cyclic))

    actions_by_p: dict[str, list] = {}
    events_by_e: dict[str, list] = {}
    for n in order:
        lab = a.nodes[n].label
        if isinstance(lab, Action):
            actions_by_p.setdefault(lab.peripheral, []).append(n)
        elif isinstance(lab, Event):
            events_by_e.setdefault(lab.event, []).append(n)
    claims = a.claims()
    releases = a.releases()

    for p, ns in sorted(actions_by_p.items()):
        for x, y in combinations(ns, 2):
            if not (reaches(x, y) or reaches(y, x)):
                findings.append(_finding("I", (x, y), f"peripheral {p}"))

    for r in universe.resource_names:
        if len(claims.get(r, [])) != 1:
            findings.append(_finding("II", claims.get(r, []), f"{r} claimed {len(claims.get(r, []))} times"))
        if len(releases.get(r, [])) != 1:
            findings.append(_finding("III", releases.get(r, []), f"{r} released {len(releases.get(r, []))} times"))

    for n in order:
        lab = a.nodes[n].label
        if isinstance(lab, Action):
            r = universe.owner[lab.peripheral]
            if not any(reaches(c, n) for c in claims.get(r, [])):
                findings.append(_finding("IV", (n,), f"resource {r}"))
            if not any(reaches(n, rl) for rl in releases.get(r, [])):
                findings.append(_finding("V", (n,), f"resource {r}"))
        elif isinstance(lab, Release):
            if not any(reaches(c, n) for c in claims.get(lab.resource, [])):
                findings.append(_finding("VI", (n,), f"resource {lab.resource}"))
            if reach[index[n]]:
                findings.append(_finding("IX", (n,)))
        elif isinstance(lab, Claim):
            if not any(reaches(n, rl) for rl in releases.get(lab.resource, [])):
                findings.append(_finding("VII", (n,), f"resource {lab.resource}"))
            if has_pred(n):
                findings.append(_finding("VIII", (n,)))
        elif isinstance(lab, Event):
            if not has_pred(n):
                findings.append(_finding("X", (n,), f"event {lab.event}"))

    for e, ns in sorted(events_by_e.items()):
        for x, y in combinations(ns, 2):
            if not (reaches(x, y) or reaches(y, x)):
                findings.append(_finding("XI", (x, y), f"event {e}"))

    return Report(title, tuple(findings))


def normalize(a: Activity, universe: Universe) -> Activity:
    """Give ``a`` a claim and a release of every declared resource.

    A resource the activity never touches gets a fresh claim node wired
    straight to a fresh release node.  Resources that are only half
    declared are left alone so validation reports them.
    """
    if a.is_empty:
        return a
    claims, releases = a.claims(), a.releases()
    nodes = dict(a.nodes)
    edges = set(a.edges)
    for r in universe.resource_names:
        if r in claims or r in releases:
            continue
        cl = _fresh_id(nodes, f"cl_{r}")
        nodes[cl] = Node(cl, Claim(r))
        rl = _fresh_id(nodes, f"rl_{r}")
        nodes[rl] = Node(rl, Release(r))
        edges.add((cl, rl))
    if len(nodes) == len(a.nodes):
        return a
    return Activity(a.name, nodes, frozenset(edges))


def _fresh_id(taken, base: str) -> str:
    if base not in taken:
        return base
    i = 2
    while f"{base}_{i}" in taken:
        i += 1
    return f"{base}_{i}"


# -- specification ------------------------------------------------------------


@dataclass(frozen=True)
class ActivitySpec:
    """Activities, events, outcomes, the event/outcome relation and the automaton."""

    universe: Universe
    activities: Mapping[str, Activity]
    events: frozenset[str]
    outcomes: frozenset[str]
    gamma: frozenset[tuple[str, str]]
    automaton: "IOAutomaton"  # noqa: F821
    time_unit: Fraction = Fraction(1, 1000)
    extras: Mapping = field(default_factory=dict, compare=False)

    def outcomes_of(self, event: str) -> list[str]:
        return sorted(u for e, u in self.gamma if e == event)

    def activity(self, name: str | None) -> Activity:
        if name is None:
            return EMPTY_ACTIVITY
        return self.activities[name]

    def check_references(self) -> None:
        """Cross-check events, gamma and automaton labels."""
        for e, u in self.gamma:
            if e not in self.events:
                raise UnknownIdentifierError(f"gamma names undeclared event {e!r}")
            if u not in self.outcomes:
                raise UnknownIdentifierError(f"gamma names undeclared outcome {u!r}")
        for act in self.activities.values():
            for e in act.emitted_events():
                if e not in self.events:
                    raise UnknownIdentifierError(f"activity {act.name!r} emits undeclared event {e!r}")
        for t in self.automaton.transitions:
            if t.input is not None and tuple(t.input) not in self.gamma:
                raise CrossReferenceError(f"transition {t} uses {t.input} which is not in gamma")
            if t.output is not None and t.output not in self.activities:
                raise UnknownIdentifierError(f"transition {t} outputs undeclared activity {t.output!r}")
