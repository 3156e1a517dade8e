"""Specified start and completion times of nodes.

Claims start when their resource becomes available; every other node
starts when its last predecessor completes.  All arithmetic is exact.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .automaton import DecisionPath
from .model import EMPTY_ACTIVITY, Activity, Claim, StructuralError
from .sequencing import EMPTY, ComposedActivity, seq_event, seq_plain

ResourceState = Mapping[str, Fraction]


def zero_state(resources: Iterable[str]) -> dict[str, Fraction]:
    return {r: Fraction(0) for r in resources}


def shifted(x: ResourceState, r) -> dict[str, Fraction]:
    return {k: v + Fraction(r) for k, v in x.items()}


@dataclass(frozen=True)
class ScheduleEntry:
    node: object
    start: Fraction
    completion: Fraction

    def shifted(self, r) -> "ScheduleEntry":
        return ScheduleEntry(self.node, self.start + r, self.completion + r)


def _graph(a) -> Activity:
    return a.graph if isinstance(a, ComposedActivity) else a


def _order(g: Activity, only) -> list:
    if only is None:
        return g.topological_order()
    only = set(only)
    indeg = {n: sum(1 for p in g.pred[n] if p in only) for n in only}
    ready = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for m in g.succ[n]:
            if m in only:
                indeg[m] -= 1
                if indeg[m] == 0:
                    heapq.heappush(ready, m)
    if len(order) != len(only):
        raise StructuralError(f"activity {g.name!r} has a dependency cycle")
    return order


def node_times(a, x: ResourceState, known: Mapping | None = None, only=None) -> dict:
    """``{node: ScheduleEntry}`` for the nodes of ``a`` under availability ``x``.

    ``known`` supplies entries already fixed (earlier parts of a cumulative
    behavior); ``only`` restricts the computation to a subset of nodes whose
    predecessors are either in the subset or in ``known``.  The result holds
    only the computed nodes.
    """
    g = _graph(a)
    known = known or {}
    out: dict = {}
    for n in _order(g, only):
        if n in known and only is None:
            out[n] = known[n]
            continue
        node = g.nodes[n]
        if isinstance(node.label, Claim):
            s = Fraction(x[node.label.resource])
        else:
            preds = g.pred[n]
            if not preds:
                raise StructuralError(f"node {n!r} has neither a predecessor nor a resource to claim")
            s = max((out[p] if p in out else known[p]).completion for p in preds)
        out[n] = ScheduleEntry(n, s, s + node.duration)
    return out


def activity_start(a, x: ResourceState) -> Fraction:
    """Earliest specified start over all nodes; ``min(x)`` for the empty activity."""
    g = _graph(a)
    if g.is_empty:
        return min(x.values())
    return min(e.start for e in node_times(g, x).values())


def extend_with_path(prior: ComposedActivity, rho: DecisionPath, activities: Mapping[str, Activity],
                     *, resource_matched: bool = True) -> ComposedActivity:
    """Sequence the outputs of ``rho`` onto ``prior``."""
    acc = prior
    for t in rho.transitions:
        act = activities[t.output] if t.output is not None else EMPTY_ACTIVITY
        if t.input is not None:
            e = t.input[0]
            acc = seq_event(acc, act, e, acc.processed.get(e, 0) + 1, resource_matched=resource_matched)
        else:
            acc = seq_plain(acc, act, resource_matched=resource_matched)
    return acc


def decision_path_start(rho: DecisionPath | None, x: ResourceState, prior: ComposedActivity = EMPTY,
                        activities: Mapping[str, Activity] | None = None) -> Fraction:
    """Specified start of the nodes ``rho`` adds after ``prior``.

    ``None`` or a path that adds no nodes starts at ``min(x)``.
    """
    if rho is None or not rho.transitions:
        return min(x.values())
    after = extend_with_path(prior, rho, activities or {})
    new = [n for n in after.graph.nodes if n.instance > prior.instances]
    if not new:
        return min(x.values())
    times = node_times(after, x)
    return min(times[n].start for n in new)
