"""Logistics controller automata.

Transitions read an input (an ``(event, outcome)`` pair, or ``None`` for the
empty input) and write an output (an activity name, or ``None`` for the empty
activity).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

from .model import Activity
from .report import Finding, Report

Input = Optional[tuple[str, str]]
Output = Optional[str]
Word = Sequence[tuple[Input, Output]]


class AutomatonError(Exception):
    pass


class NoMatchingTransition(AutomatonError):
    """The chosen outcome does not label any outgoing transition."""


@dataclass(frozen=True, order=True)
class Transition:
    source: str
    input: Input
    output: Output
    target: str

    def __str__(self):
        i = "λ" if self.input is None else f"({self.input[0]},{self.input[1]})"
        o = "ε" if self.output is None else self.output
        return f"({self.source},{i},{o},{self.target})"


@dataclass(frozen=True)
class IOAutomaton:
    states: frozenset[str]
    initial: frozenset[str]
    finals: frozenset[str]
    transitions: tuple[Transition, ...]

    @classmethod
    def build(cls, states: Iterable[str], initial, finals: Iterable[str], transitions: Iterable) -> "IOAutomaton":
        if isinstance(initial, str):
            initial = [initial]
        ts = []
        for t in transitions:
            if not isinstance(t, Transition):
                src, inp, out, dst = t
                t = Transition(src, None if inp is None else tuple(inp), out, dst)
            ts.append(t)
        aut = cls(frozenset(states), frozenset(initial), frozenset(finals), tuple(sorted(set(ts), key=_tkey)))
        for q in aut.initial | aut.finals:
            if q not in aut.states:
                raise AutomatonError(f"undeclared state {q!r}")
        for t in aut.transitions:
            for q in (t.source, t.target):
                if q not in aut.states:
                    raise AutomatonError(f"transition {t} names undeclared state {q!r}")
        return aut

    @cached_property
    def outgoing(self) -> dict[str, list[Transition]]:
        out: dict[str, list[Transition]] = {q: [] for q in self.states}
        for t in self.transitions:
            out[t.source].append(t)
        return out

    @property
    def initial_state(self) -> str:
        if len(self.initial) != 1:
            raise AutomatonError(f"expected exactly one initial state, have {sorted(self.initial)}")
        return next(iter(self.initial))

    def replace(self, **changes) -> "IOAutomaton":
        fields = dict(states=self.states, initial=self.initial, finals=self.finals, transitions=self.transitions)
        fields.update(changes)
        return IOAutomaton.build(**fields)


def _tkey(t: Transition):
    return (t.source, t.input or ("", ""), t.output or "", t.target)


@dataclass(frozen=True)
class DecisionPath:
    """A maximal run of transitions between decision points."""

    transitions: tuple[Transition, ...]

    @property
    def start(self) -> str:
        return self.transitions[0].source

    @property
    def end(self) -> str:
        return self.transitions[-1].target

    @property
    def activities(self) -> list[Output]:
        return [t.output for t in self.transitions]

    @property
    def processed(self) -> Input:
        """The (event, outcome) consumed by the first transition, if any."""
        return self.transitions[0].input

    @property
    def length(self) -> int:
        return len(self.transitions)

    def node_count(self, activities: Mapping[str, Activity]) -> int:
        """Number of action and event nodes the path puts on the plant."""
        from .model import is_observable

        total = 0
        for name in self.activities:
            if name is not None:
                total += sum(1 for n in activities[name].nodes.values() if is_observable(n.label))
        return total

    def word(self) -> list[tuple[Input, Output]]:
        return [(t.input, t.output) for t in self.transitions]

    def __str__(self):
        return ",".join(str(t) for t in self.transitions)


class _Completed:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "COMPLETED"

    def __bool__(self):
        return False


COMPLETED = _Completed()


# -- queries ------------------------------------------------------------------


def decision_states(y: IOAutomaton) -> set[str]:
    """States with more than one outgoing transition."""
    return {q for q, ts in y.outgoing.items() if len(ts) >= 2}


def next_decision_path(y: IOAutomaton, start: str, chosen: Input = None):
    """Read transitions from ``start`` until a decision or final state.

    At a decision state ``chosen`` picks the outgoing transition; elsewhere it
    must be ``None``.  Returns :data:`COMPLETED` when ``start`` is final.
    """
    if start in y.finals:
        return COMPLETED
    deciders = decision_states(y)
    outs = y.outgoing[start]
    if start in deciders:
        if chosen is None:
            raise AutomatonError(f"state {start!r} is a decision state; an outcome must be chosen")
        matches = [t for t in outs if t.input == tuple(chosen)]
        if len(matches) != 1:
            raise NoMatchingTransition(f"no unique transition from {start!r} reads {tuple(chosen)}")
        first = matches[0]
    else:
        if chosen is not None:
            raise AutomatonError(f"state {start!r} is not a decision state; got outcome {chosen}")
        if not outs:
            raise AutomatonError(f"state {start!r} is blocking: no outgoing transitions and not final")
        first = outs[0]
    path = [first]
    q = first.target
    while q not in deciders and q not in y.finals:
        outs = y.outgoing[q]
        if not outs:
            raise AutomatonError(f"state {q!r} is blocking: no outgoing transitions and not final")
        if len(path) > len(y.states):
            raise AutomatonError(f"no decision or final state reachable from {start!r}")
        path.append(outs[0])
        q = outs[0].target
    return DecisionPath(tuple(path))


def accepts(y: IOAutomaton, w: Word) -> bool:
    current = set(y.initial)
    for inp, out in w:
        inp = None if inp is None else tuple(inp)
        current = {t.target for q in current for t in y.outgoing[q] if t.input == inp and t.output == out}
        if not current:
            return False
    return bool(current & y.finals)


def walk(y: IOAutomaton, outcomes: Iterable[tuple[str, str]]):
    """Concatenate decision paths driven by ``outcomes``.

    Returns ``(paths, reached_final, unused)`` where ``unused`` counts the
    outcomes left over after the walk hit a final state.
    """
    queue = deque(tuple(o) for o in outcomes)
    paths = []
    step = next_decision_path(y, y.initial_state)
    while step is not COMPLETED:
        paths.append(step)
        if step.end in y.finals:
            break
        if not queue:
            return paths, False, 0
        step = next_decision_path(y, step.end, queue.popleft())
    return paths, True, len(queue)


def all_decision_paths(y: IOAutomaton, gamma) -> list[DecisionPath]:
    """Every decision path the controller can ever read, each once."""
    out = []
    seen = set()
    starts = [(y.initial_state, None)]
    for q in sorted(decision_states(y)):
        for t in y.outgoing[q]:
            if t.input is not None:
                starts.append((q, t.input))
    for q, chosen in starts:
        p = next_decision_path(y, q, chosen)
        if p is not COMPLETED and p.transitions not in seen:
            seen.add(p.transitions)
            out.append(p)
    return out


# -- validation ---------------------------------------------------------------

_RANK = {"Def4a": 20, "Def4b": 21, "Def4c": 22, "Def4d": 23, "Def5": 30, "A3": 40, "causality": 45,
         "consistency-i": 50, "consistency-ii": 51, "consistency-iii": 52, "consistency-bound": 53}


def validate_deterministic(y: IOAutomaton, gamma) -> Report:
    """Single initial state, silent final states, branches only on outcomes.

    ``Def4d`` additionally flags a non-branching state whose only transition
    reads an event outcome: the controller would have to wait for an outcome
    in the middle of a decision path.
    """
    gamma = {tuple(g) for g in gamma}
    found = []
    if len(y.initial) != 1:
        found.append(Finding(_RANK["Def4a"], "Def4a", tuple(sorted(y.initial)),
                             f"need exactly one initial state, have {len(y.initial)}"))
    for q in sorted(y.finals):
        if y.outgoing[q]:
            found.append(Finding(_RANK["Def4b"], "Def4b", (q,), "final state has outgoing transitions"))
    for q in sorted(y.states):
        outs = y.outgoing[q]
        bad = set()
        for i, t1 in enumerate(outs):
            for t2 in outs[i + 1:]:
                ok = (
                    t1.input is not None
                    and t2.input is not None
                    and t1.input[0] == t2.input[0]
                    and t1.input[1] != t2.input[1]
                    and t1.input in gamma
                    and t2.input in gamma
                )
                if not ok:
                    bad.add((str(t1), str(t2)))
        if bad:
            found.append(Finding(_RANK["Def4c"], "Def4c", (q,),
                                 "branches not on distinct outcomes of one event: " + "; ".join(
                                     f"{a} vs {b}" for a, b in sorted(bad))))
        if len(outs) == 1 and outs[0].input is not None:
            found.append(Finding(_RANK["Def4d"], "Def4d", (q,),
                                 f"non-branching state reads outcome {outs[0].input}"))
    return Report("deterministic", tuple(found))


def validate_complete(y: IOAutomaton, gamma) -> Report:
    """Every state that reads an event has one transition per outcome of it."""
    gamma = {tuple(g) for g in gamma}
    found = []
    for q in sorted(y.states):
        reads = [t.input for t in y.outgoing[q] if t.input is not None]
        if not reads:
            continue
        events = sorted({e for e, _ in reads})
        for e in events:
            got = [u for ev, u in reads if ev == e]
            want = {u for ev, u in gamma if ev == e}
            missing = sorted(want - set(got))
            dupes = sorted({u for u in got if got.count(u) > 1})
            extra = sorted(set(got) - want)
            if missing or dupes or extra:
                parts = []
                if missing:
                    parts.append(f"missing outcomes {missing}")
                if dupes:
                    parts.append(f"repeated outcomes {dupes}")
                if extra:
                    parts.append(f"outcomes not in gamma {extra}")
                found.append(Finding(_RANK["Def5"], "Def5", (q,), f"event {e}: " + ", ".join(parts)))
    return Report("complete", tuple(found))


def validate_nonblocking(y: IOAutomaton) -> Report:
    """States that cannot reach any final state."""
    into: dict[str, set] = {q: set() for q in y.states}
    for t in y.transitions:
        into[t.target].add(t.source)
    alive = set(y.finals)
    todo = deque(y.finals)
    while todo:
        q = todo.popleft()
        for p in into[q]:
            if p not in alive:
                alive.add(p)
                todo.append(p)
    dead = sorted(y.states - alive)
    found = [Finding(_RANK["A3"], "A3", (q,), "no path to a final state") for q in dead]
    return Report("non-blocking", tuple(found))


def validate_event_causality(y: IOAutomaton) -> Report:
    """Warn where processing an outcome outputs the empty activity.

    Sequencing ties the continuation to the emitting node only through the
    first activity after the outcome.  When that activity is empty and the
    path goes on, the later activities carry no dependency on the event and
    may be scheduled before its outcome is known.
    """
    found = []
    for t in y.transitions:
        if t.input is not None and t.output is None and t.target not in y.finals and y.outgoing[t.target]:
            found.append(Finding(_RANK["causality"], "causality", (t.source,),
                                 f"{t} processes an outcome with the empty activity; the rest of the path "
                                 f"does not wait for the event", "warning"))
    return Report("event causality", tuple(found))


def validate_consistent(y: IOAutomaton, activities: Mapping[str, Activity], bound: int = 64) -> Report:
    """Events are never processed before emission and never left behind.

    Every transition changes a per-event counter by the number of emissions
    of its output activity minus one if its input processes that event.
    Reported: a reachable prefix that processes an event with a zero counter
    (``consistency-i``), a final state reached with a nonzero counter
    (``consistency-ii``), and a cycle whose net change is nonzero
    (``consistency-iii``).  ``bound`` caps the counters explored.
    """
    events = sorted({e for a in activities.values() for e in a.emitted_events()}
                    | {t.input[0] for t in y.transitions if t.input is not None})
    idx = {e: i for i, e in enumerate(events)}

    def emits(t: Transition) -> list[int]:
        vec = [0] * len(events)
        if t.output is not None:
            for e, c in activities[t.output].emitted_events().items():
                vec[idx[e]] += c
        return vec

    found: list[Finding] = []

    # cycles with nonzero net change: a potential per state must exist in each SCC
    for comp in _sccs(y):
        if len(comp) == 1:
            q = next(iter(comp))
            if not any(t.target == q for t in y.outgoing[q]):
                continue
        pot: dict[str, list[int]] = {}
        root = min(comp)
        pot[root] = [0] * len(events)
        todo = deque([root])
        bad_events: set[str] = set()
        inner = [t for t in y.transitions if t.source in comp and t.target in comp]
        while todo:
            q = todo.popleft()
            for t in inner:
                if t.source != q:
                    continue
                d = emits(t)
                if t.input is not None:
                    d[idx[t.input[0]]] -= 1
                val = [a + b for a, b in zip(pot[q], d)]
                if t.target not in pot:
                    pot[t.target] = val
                    todo.append(t.target)
                else:
                    for e, i in idx.items():
                        if pot[t.target][i] != val[i]:
                            bad_events.add(e)
        if bad_events:
            found.append(Finding(_RANK["consistency-iii"], "consistency-iii", tuple(sorted(comp)),
                                 f"cycle changes the pending count of {sorted(bad_events)}"))

    # explore (state, counters) from the initial states
    start = [(q, (0,) * len(events)) for q in sorted(y.initial)]
    seen = set(start)
    todo = deque(start)
    underflow: dict[tuple[str, str], None] = {}
    leftovers: dict[tuple[str, str], None] = {}
    overflow = None
    while todo:
        q, counts = todo.popleft()
        if q in y.finals and any(counts):
            for e, i in idx.items():
                if counts[i]:
                    leftovers[(q, e)] = None
        for t in y.outgoing[q]:
            c = list(counts)
            if t.input is not None:
                i = idx[t.input[0]]
                if c[i] == 0:
                    underflow[(q, t.input[0])] = None
                    continue
                c[i] -= 1
            for i, v in enumerate(emits(t)):
                c[i] += v
            if max(c, default=0) > bound:
                overflow = (t.target, dict(zip(events, c)))
                continue
            nxt = (t.target, tuple(c))
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    for q, e in underflow:
        found.append(Finding(_RANK["consistency-i"], "consistency-i", (q,),
                             f"processes event {e} before it has been emitted"))
    for q, e in leftovers:
        found.append(Finding(_RANK["consistency-ii"], "consistency-ii", (q,),
                             f"final state reached with unprocessed emissions of {e}"))
    if overflow is not None and not any(f.code == "consistency-iii" for f in found):
        found.append(Finding(_RANK["consistency-bound"], "consistency-bound", (overflow[0],),
                             f"pending-event counter exceeded {bound}: {overflow[1]}"))
    return Report("consistent", tuple(found))


def _sccs(y: IOAutomaton) -> list[set[str]]:
    """Tarjan's algorithm, iterative."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[set[str]] = []
    counter = 0
    for root in sorted(y.states):
        if root in index:
            continue
        work = [(root, iter(sorted({t.target for t in y.outgoing[root]})))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            q, it = work[-1]
            advanced = False
            for r in it:
                if r not in index:
                    index[r] = low[r] = counter
                    counter += 1
                    stack.append(r)
                    on_stack.add(r)
                    work.append((r, iter(sorted({t.target for t in y.outgoing[r]}))))
                    advanced = True
                    break
                if r in on_stack:
                    low[q] = min(low[q], index[r])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[q])
            if low[q] == index[q]:
                comp = set()
                while True:
                    r = stack.pop()
                    on_stack.discard(r)
                    comp.add(r)
                    if r == q:
                        break
                out.append(comp)
    return out
