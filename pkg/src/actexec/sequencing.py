"""Sequencing activities into the activity of a behavior.

Sequencing ``A1 . A2`` drops the releases of ``A1`` and the claims of
``A2`` and splices each resource's chain across the gap.  When an event
outcome is processed in between, every node that follows a claim in ``A2``
also waits for the node that emitted the processed event instance.

Composed activities name their nodes with :class:`~actexec.model.NodeRef`,
numbering sequenced activities from 1 so repeated activities stay distinct.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from .automaton import Word
from .model import (
    EMPTY_ACTIVITY,
    Activity,
    Claim,
    ConstraintViolationError,
    Event,
    Node,
    NodeRef,
    Release,
    SpecError,
    validate_activity,
)


class SequencingError(SpecError):
    pass


class NotNormalizedError(SequencingError):
    """The operands do not claim and release the same resources."""


class EventUnderflowError(SequencingError):
    """An event instance is processed that has not been emitted."""


@dataclass(frozen=True)
class ComposedActivity:
    """An activity built by sequencing, with event bookkeeping.

    ``emitted[e]`` lists the nodes emitting ``e`` in emission order;
    ``dropped[e]`` counts earlier emissions no longer held in the graph;
    ``processed[e]`` counts how many instances of ``e`` have been consumed.
    """

    graph: Activity = EMPTY_ACTIVITY
    instances: int = 0
    emitted: Mapping[str, tuple] = field(default_factory=dict)
    dropped: Mapping[str, int] = field(default_factory=dict)
    processed: Mapping[str, int] = field(default_factory=dict)

    @property
    def nodes(self):
        return self.graph.nodes

    @property
    def edges(self):
        return self.graph.edges

    def emission(self, event: str, k: int) -> NodeRef:
        """The node emitting the ``k``-th instance (1-based) of ``event``."""
        pos = k - 1 - self.dropped.get(event, 0)
        nodes = self.emitted.get(event, ())
        if k < 1 or pos < 0 or pos >= len(nodes):
            raise EventUnderflowError(
                f"instance {k} of event {event!r} requested, {self.emission_count(event)} emitted"
            )
        return nodes[pos]

    def emission_count(self, event: str) -> int:
        return self.dropped.get(event, 0) + len(self.emitted.get(event, ()))

    def instance_of(self, node: NodeRef) -> int:
        """1-based emission index of an event node."""
        e = self.graph.nodes[node].label.event
        return self.dropped.get(e, 0) + self.emitted[e].index(node) + 1


EMPTY = ComposedActivity()


def _chain_order(a: Activity, nodes: list) -> list:
    """Sort nodes of one event by the dependency order among them."""
    topo = {n: i for i, n in enumerate(a.topological_order())}
    return sorted(nodes, key=topo.__getitem__)


def lift(a: Activity, instance: int = 1) -> ComposedActivity:
    """A base activity as a composed one, its nodes tagged with ``instance``."""
    if isinstance(a, ComposedActivity):
        return a
    if a.is_empty:
        return EMPTY
    ren = {n: NodeRef(instance, a.name, n) for n in a.nodes}
    nodes = {ren[n]: Node(ren[n], node.label, node.duration) for n, node in a.nodes.items()}
    edges = frozenset((ren[s], ren[t]) for s, t in a.edges)
    emitted = {}
    for e in sorted(a.emitted_events()):
        emitted[e] = tuple(ren[n] for n in _chain_order(a, a.event_nodes(e)))
    return ComposedActivity(Activity(f"{a.name}", nodes, edges), instance, emitted, {}, {})


def _sequence(a1: ComposedActivity, a2: Activity, ek, resource_matched: bool) -> ComposedActivity:
    if isinstance(a1, Activity):
        a1 = lift(a1)
    if ek is not None:
        e, k = ek
        emitter = a1.emission(e, k)
        if a1.processed.get(e, 0) != k - 1:
            raise SequencingError(f"event {e!r}: instance {k} processed after {a1.processed.get(e, 0)}")
    processed = dict(a1.processed)
    if ek is not None:
        processed[ek[0]] = ek[1]
    if a2.is_empty:
        return replace(a1, processed=processed)
    if a1.graph.is_empty:
        right = lift(a2, a1.instances + 1)
        return replace(right, processed=processed, dropped=dict(a1.dropped),
                       emitted=_merge_emitted(a1.emitted, right.emitted))

    g1 = a1.graph
    inst = a1.instances + 1
    right = lift(a2, inst)
    g2 = right.graph

    rl1: dict[str, list] = g1.releases()
    cl2: dict[str, list] = g2.claims()
    if set(rl1) != set(cl2) or set(g2.releases()) != set(cl2):
        raise NotNormalizedError(
            f"cannot sequence {a2.name!r}: left releases {sorted(rl1)}, right claims {sorted(cl2)}"
        )
    rl_nodes = {n for ns in rl1.values() for n in ns}
    cl_nodes = {n for ns in cl2.values() for n in ns}

    nodes = {n: v for n, v in g1.nodes.items() if n not in rl_nodes}
    nodes.update((n, v) for n, v in g2.nodes.items() if n not in cl_nodes)

    edges = {(s, t) for s, t in g1.edges if t not in rl_nodes}
    edges.update((s, t) for s, t in g2.edges if s not in cl_nodes)

    if resource_matched:
        for r, rls in rl1.items():
            before = {p for rl in rls for p in g1.pred[rl]}
            after = {s for cl in cl2[r] for s in g2.succ[cl]}
            edges.update((p, s) for p in before for s in after)
    else:
        before = {p for rl in rl_nodes for p in g1.pred[rl]}
        after = {s for cl in cl_nodes for s in g2.succ[cl]}
        edges.update((p, s) for p in before for s in after)

    for e, right_nodes in right.emitted.items():
        for p in a1.emitted.get(e, ()):
            edges.update((p, s) for s in right_nodes)

    if ek is not None:
        after = {s for cl in cl_nodes for s in g2.succ[cl]}
        edges.update((emitter, s) for s in after)

    name = f"{g1.name}.{a2.name}"
    graph = Activity(name, nodes, frozenset(edges))
    return ComposedActivity(graph, inst, _merge_emitted(a1.emitted, right.emitted), dict(a1.dropped), processed)


def _merge_emitted(left, right):
    out = {e: tuple(v) for e, v in left.items()}
    for e, v in right.items():
        out[e] = out.get(e, ()) + tuple(v)
    return out


def _checked(result: ComposedActivity, universe) -> ComposedActivity:
    if universe is not None:
        rep = validate_activity(result.graph, universe)
        if not rep.ok:
            raise ConstraintViolationError(f"sequencing produced an ill-formed activity {result.graph.name!r}", rep)
    return result


def seq_plain(a1, a2: Activity, *, resource_matched: bool = True, universe=None) -> ComposedActivity:
    """``a1 . a2``: sequence without processing an event.

    ``resource_matched=False`` links every predecessor of any release of
    ``a1`` to every successor of any claim of ``a2``, regardless of the
    resource.  Passing ``universe`` revalidates the result.
    """
    return _checked(_sequence(a1, a2, None, resource_matched), universe)


def seq_event(a1, a2: Activity, event: str, k: int, *, resource_matched: bool = True,
              universe=None) -> ComposedActivity:
    """``a1 ;(event,k) a2``: sequence after processing instance ``k`` of ``event``."""
    return _checked(_sequence(a1, a2, (event, k), resource_matched), universe)


def behavior_activity(word: Word, activities: Mapping[str, Activity], *, resource_matched: bool = True,
                      universe=None) -> ComposedActivity:
    """Fold a word into the activity of its behavior."""
    acc = EMPTY
    for inp, out in word:
        act = EMPTY_ACTIVITY if out is None else activities[out]
        if inp is None:
            acc = seq_plain(acc, act, resource_matched=resource_matched, universe=universe)
        else:
            e = inp[0]
            acc = seq_event(acc, act, e, acc.processed.get(e, 0) + 1, resource_matched=resource_matched,
                            universe=universe)
    return acc


def processed_events(word: Word) -> list[tuple[str, str]]:
    """The (event, outcome) inputs of a word in order, empty inputs dropped."""
    return [tuple(inp) for inp, _ in word if inp is not None]


def observable_nodes(a) -> dict:
    """Action and event nodes of an activity, keyed by id."""
    g = a.graph if isinstance(a, ComposedActivity) else a
    return {n: v for n, v in g.nodes.items() if not isinstance(v.label, (Claim, Release))}


def event_chain_ok(a: ComposedActivity) -> bool:
    """Emissions of each event form a chain in the recorded order."""
    from .model import reachability

    if a.graph.is_empty:
        return True
    order, index, reach = reachability(a.graph)
    for e, ns in a.emitted.items():
        for x, y in zip(ns, ns[1:]):
            if not reach[index[x]] >> index[y] & 1:
                return False
        for n in ns:
            if not isinstance(a.graph.nodes[n].label, Event) or a.graph.nodes[n].label.event != e:
                return False
    return True
