"""The three-layer execution engine.

The logistics controller (LC) walks the automaton from decision state to
decision state.  The activity controller (AC) sequences the activities of
each decision path onto the behavior so far and computes specified times.
The atomic controller (aC) dispatches every action and event node at
``S(n) + psi`` and routes event outcomes back up.

Both clock modes share one discrete-event loop.  In simulated mode the
clock jumps to the next pending instant and the layers are charged the
configured processing costs.  In realtime mode the loop sleeps until each
instant on the host monotonic clock and charges measured costs.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from .automaton import COMPLETED, AutomatonError, DecisionPath, IOAutomaton, decision_states, next_decision_path
from .model import Action, Activity, ActivitySpec, Claim, Event, NodeRef, Release, reachability
from .plant import PlantConfig, PlantConfigError, PlantStartFailure, SimPlant
from .sequencing import EMPTY, ComposedActivity, SequencingError, seq_event, seq_plain
from .timeval import parse_time
from .timing import ScheduleEntry, node_times, zero_state
from .trace import ExecutionTrace, PathRecord, TraceRecord

log = logging.getLogger(__name__)

CLOCKS = ("simulated", "realtime")
RETENTION = ("full", "prune-completed")


class EngineError(Exception):
    pass


@dataclass(frozen=True)
class ComponentCosts:
    """Processing time charged per decision path in simulated mode."""

    dEvent: Fraction = Fraction(0)
    dLC: Fraction = Fraction(0)
    dAC: Fraction = Fraction(0)
    daC: Fraction = Fraction(0)

    @property
    def total(self) -> Fraction:
        return self.dEvent + self.dLC + self.dAC + self.daC

    def as_dict(self) -> dict:
        return {"dEvent": self.dEvent, "dLC": self.dLC, "dAC": self.dAC, "daC": self.daC}


@dataclass(frozen=True)
class EngineConfig:
    """``psi`` is measured from launch; all times are model units."""

    psi: Fraction
    dA: Fraction
    dE: Fraction
    clock: str = "simulated"
    costs: Optional[ComponentCosts] = None
    retention: str = "full"
    resource_matched: bool = True

    def __post_init__(self):
        for name in ("psi", "dA", "dE"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.dA < 0 or self.dE < 0:
            raise EngineError("dA and dE must be nonnegative")
        if self.clock not in CLOCKS:
            raise EngineError(f"clock must be one of {CLOCKS}, got {self.clock!r}")
        if self.retention not in RETENTION:
            raise EngineError(f"retention must be one of {RETENTION}, got {self.retention!r}")
        if self.costs is None:
            q = self.dE / 4
            object.__setattr__(self, "costs", ComponentCosts(q, q, q, q))

    @classmethod
    def from_dict(cls, doc: Mapping, unit: Fraction, **overrides) -> "EngineConfig":
        def t(v):
            return parse_time(v, unit)

        fields = {
            "psi": t(doc.get("psi", 10)),
            "dA": t(doc.get("dA", 0)),
            "dE": t(doc.get("dE", 0)),
            "clock": doc.get("clock", "simulated"),
            "retention": doc.get("retention", "full"),
            "resource_matched": doc.get("resourceMatched", True),
        }
        if "componentCosts" in doc:
            c = doc["componentCosts"]
            fields["costs"] = ComponentCosts(*(t(c.get(k, 0)) for k in ("dEvent", "dLC", "dAC", "daC")))
        fields.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**fields)


# -- logistics controller --------------------------------------------------------


class LogisticsController:
    def __init__(self, automaton: IOAutomaton):
        self.automaton = automaton
        self.state = automaton.initial_state
        self.counters: dict[str, int] = {}
        self._deciders = decision_states(automaton)

    @property
    def finished(self) -> bool:
        return self.state in self.automaton.finals

    def waiting_for(self) -> Optional[str]:
        """The event whose outcome the current decision state branches on."""
        if self.state not in self._deciders:
            return None
        events = {t.input[0] for t in self.automaton.outgoing[self.state] if t.input is not None}
        return next(iter(events)) if len(events) == 1 else None

    def advance(self, outcome: Optional[tuple[str, str]] = None):
        """Next decision path and the ``(event, k)`` it processes.

        Returns ``(COMPLETED, None)`` once a final state is reached.
        """
        rho = next_decision_path(self.automaton, self.state, outcome)
        if rho is COMPLETED:
            return COMPLETED, None
        ek = None
        if outcome is not None:
            e = outcome[0]
            self.counters[e] = self.counters.get(e, 0) + 1
            ek = (e, self.counters[e])
        self.state = rho.end
        return rho, ek


# -- activity controller ---------------------------------------------------------


def event_rows(a: Activity) -> dict:
    """For each event node, the resources whose release it precedes."""
    if a.is_empty:
        return {}
    order, index, reach = reachability(a)
    rows = {}
    for n in a.event_nodes():
        bits = reach[index[n]]
        rows[n] = tuple(sorted({a.nodes[m].label.resource for m in order
                                if bits >> index[m] & 1 and isinstance(a.nodes[m].label, Release)}))
    return rows


class ActivityController:
    def __init__(self, spec: ActivitySpec, retention: str = "full", resource_matched: bool = True):
        self.spec = spec
        self.retention = retention
        self.resource_matched = resource_matched
        self.behavior: ComposedActivity = EMPTY
        self.word: list = []
        self.schedule: dict = {}
        self.dispatched: set = set()
        self.outcomes: list[tuple[str, str]] = []
        self.x = zero_state(spec.universe.resource_names)
        self._rows = {name: event_rows(a) for name, a in spec.activities.items()}

    def rows(self, node: NodeRef) -> tuple[str, ...]:
        """Gantt rows of a node: its peripheral's owner, or for an event the
        resources whose release it precedes in its own activity."""
        lab = self.spec.activities[node.activity].nodes[node.local].label
        if isinstance(lab, Action):
            return (self.spec.universe.owner[lab.peripheral],)
        return self._rows.get(node.activity, {}).get(node.local, ())

    def extend(self, rho: DecisionPath, ek: Optional[tuple[str, int]] = None):
        """Sequence ``rho`` onto the behavior.

        Returns the new action and event entries plus the path's specified
        start (``None`` when it adds no nodes).
        """
        before = self.behavior.instances
        acc = self.behavior
        for i, t in enumerate(rho.transitions):
            act = self.spec.activity(t.output)
            if i == 0 and ek is not None:
                acc = seq_event(acc, act, ek[0], ek[1], resource_matched=self.resource_matched)
            else:
                if t.input is not None:
                    raise AutomatonError(f"transition {t} reads an input inside a decision path")
                acc = seq_plain(acc, act, resource_matched=self.resource_matched)
            self.word.append((t.input, t.output))
        new = [n for n in acc.graph.nodes if n.instance > before]
        times = node_times(acc, self.x, known=self.schedule, only=new)
        self.schedule.update(times)
        self.behavior = acc
        start = min((e.start for e in times.values()), default=None)
        entries = sorted((times[n] for n in new if not isinstance(acc.graph.nodes[n].label, (Claim, Release))),
                         key=lambda e: (e.start, e.node))
        self.dispatched.update(e.node for e in entries)
        return entries, start

    def on_outcome(self, node: NodeRef, outcome: str) -> tuple[str, str]:
        g = self.behavior.graph
        lab = g.nodes[node].label if node in g.nodes else None
        if not isinstance(lab, Event):
            raise EngineError(f"{node} is not an event node")
        if (lab.event, outcome) not in self.spec.gamma:
            raise EngineError(f"outcome {outcome!r} is not allowed for event {lab.event!r}")
        return lab.event, outcome

    def prune(self) -> None:
        """Forget nodes later sequencing can no longer reach.

        Kept: release nodes and their predecessors (the frontier the next
        activity attaches to), and for each event the emissions not yet
        processed plus the latest one.
        """
        a = self.behavior
        g = a.graph
        if g.is_empty:
            return
        keep = set()
        for rls in g.releases().values():
            for rl in rls:
                keep.add(rl)
                keep.update(g.pred[rl])
        emitted, dropped = {}, dict(a.dropped)
        for e, ns in a.emitted.items():
            done = a.processed.get(e, 0) - a.dropped.get(e, 0)
            cut = max(0, min(done, len(ns) - 1))
            emitted[e] = tuple(ns[cut:])
            dropped[e] = a.dropped.get(e, 0) + cut
            keep.update(emitted[e])
        nodes = {n: v for n, v in g.nodes.items() if n in keep}
        edges = frozenset((s, t) for s, t in g.edges if s in keep and t in keep)
        self.behavior = ComposedActivity(Activity(g.name, nodes, edges), a.instances, emitted, dropped, dict(a.processed))
        self.schedule = {n: v for n, v in self.schedule.items() if n in keep}


# -- the loop ----------------------------------------------------------------------

_READY, _OUTCOME, _DONE, _DISPATCH = range(4)


class _Clock:
    """Model-unit clock; realtime mode follows the host monotonic clock."""

    def __init__(self, mode: str, unit: Fraction):
        self.mode = mode
        self.unit = unit
        self.now = Fraction(0)
        self._launch = time.monotonic_ns()

    def read(self) -> Fraction:
        if self.mode == "realtime":
            self.now = Fraction(time.monotonic_ns() - self._launch, 10**9) / self.unit
        return self.now

    def wait_until(self, t: Fraction) -> Fraction:
        if self.mode == "simulated":
            self.now = max(self.now, t)
            return self.now
        while True:
            now = self.read()
            if now >= t:
                return now
            time.sleep(float((t - now) * self.unit))


def execute(spec: ActivitySpec, plant: PlantConfig, config: EngineConfig) -> ExecutionTrace:
    """Run ``spec`` against a simulated ``plant`` until the automaton finishes."""
    return _Run(spec, plant, config).run()


class _Run:
    def __init__(self, spec: ActivitySpec, plant: PlantConfig, cfg: EngineConfig):
        self.spec = spec
        self.cfg = cfg
        self.plant = SimPlant(plant)
        self.lc = LogisticsController(spec.automaton)
        self.ac = ActivityController(spec, cfg.retention, cfg.resource_matched)
        self.clock = _Clock(cfg.clock, spec.time_unit)
        self.trace = ExecutionTrace(cfg.psi, cfg.dA, cfg.dE, spec.time_unit, seed=plant.seed, clock=cfg.clock)
        self.heap: list = []
        self.seq = itertools.count()
        self.pending: dict[tuple[str, int], tuple[Fraction, str, NodeRef]] = {}
        self.lc_free = Fraction(0)
        self.inflight: dict = {}
        self.path_of: dict = {}

    def push(self, t: Fraction, kind: int, key, payload) -> None:
        heapq.heappush(self.heap, (t, kind, key, next(self.seq), payload))

    # layer work ----------------------------------------------------------------

    def _plan(self, outcome, arrived: Fraction):
        """LC then AC then aC for one decision path; returns the ready time."""
        c = self.cfg.costs
        realtime = self.cfg.clock == "realtime"
        t0 = time.perf_counter_ns()
        rho, ek = self.lc.advance(outcome)
        t1 = time.perf_counter_ns()
        if rho is COMPLETED:
            return None
        entries, start = self.ac.extend(rho, ek)
        t2 = time.perf_counter_ns()
        if self.cfg.retention == "prune-completed":
            self.ac.prune()
        index = len(self.trace.paths)
        for e in entries:
            self.path_of[e.node] = index
        entries.sort(key=lambda e: (e.start, e.node))
        t3 = time.perf_counter_ns()
        if realtime:
            sec = lambda ns: Fraction(ns, 10**9) / self.spec.time_unit  # noqa: E731
            costs = {"dEvent": Fraction(0), "dLC": sec(t1 - t0), "dAC": sec(t2 - t1), "daC": sec(t3 - t2)}
            ready = self.clock.read()
        else:
            costs = {"dEvent": c.dEvent if outcome is not None else Fraction(0), "dLC": c.dLC, "dAC": c.dAC, "daC": c.daC}
            begin = max(arrived + costs["dEvent"], self.lc_free)
            ready = begin + c.dLC + c.dAC + c.daC
        self.lc_free = ready
        self.trace.paths.append(PathRecord(
            index, tuple(str(t) for t in rho.transitions),
            None if outcome is None else tuple(outcome), None if ek is None else ek[1],
            start, ready, costs,
        ))
        self.push(ready, _READY, index, entries)
        return ready

    def _try_advance(self) -> None:
        while not self.lc.finished:
            e = self.lc.waiting_for()
            if e is None:
                raise AutomatonError(f"state {self.lc.state!r} cannot be resolved by a single event")
            k = self.lc.counters.get(e, 0) + 1
            got = self.pending.pop((e, k), None)
            if got is None:
                return
            arrived, u, node = got
            t0 = time.perf_counter_ns()
            self.ac.on_outcome(node, u)
            d_event = Fraction(time.perf_counter_ns() - t0, 10**9) / self.spec.time_unit
            self.ac.outcomes.append((e, u))
            self.trace.outcomes.append((e, u))
            self._plan((e, u), arrived)
            if self.cfg.clock == "realtime":
                self.trace.paths[-1].costs["dEvent"] = d_event

    # main loop -----------------------------------------------------------------

    def run(self) -> ExecutionTrace:
        cfg = self.cfg
        tr = self.trace
        if cfg.psi <= 0:
            tr.aborted = f"A4: psi={cfg.psi} is not in the future of launch"
            return tr
        try:
            if self.lc.finished:
                tr.completed = True
                return tr
            ready = self._plan(None, Fraction(0))
            if ready is not None and ready > cfg.psi:
                tr.aborted = f"A4: initialization finished at {ready}, after psi={cfg.psi}"
                return tr
            while self.heap:
                t, kind, key, _, payload = heapq.heappop(self.heap)
                now = self.clock.wait_until(t)
                if kind == _READY:
                    for e in payload:
                        self.push(max(e.start + cfg.psi, now), _DISPATCH, e.node, e)
                elif kind == _DISPATCH:
                    self._dispatch(payload, now)
                elif kind == _DONE:
                    self._complete(payload)
                elif kind == _OUTCOME:
                    self._outcome(payload)
                    self._try_advance()
            if not self.lc.finished:
                tr.aborted = f"stalled in state {self.lc.state!r}: no outcome available to decide"
            else:
                tr.completed = True
        except (PlantStartFailure, PlantConfigError) as exc:
            tr.aborted = f"plant: {exc}"
        except (AutomatonError, SequencingError, EngineError) as exc:
            tr.aborted = f"mismatch: {exc}"
        if tr.aborted:
            log.warning("run aborted: %s", tr.aborted)
        tr.records.sort(key=lambda r: (r.started, r.node))
        return tr

    def _dispatch(self, entry: ScheduleEntry, now: Fraction) -> None:
        node = entry.node
        lab = self._label(node)
        if isinstance(lab, Action):
            res = self.plant.start_action(node, lab, now)
            self.push(res.observed, _DONE, node, (entry, lab, res, None))
        else:
            res = self.plant.sample_event(node, lab, now)
            self.push(res.observed, _OUTCOME, node, (entry, lab, res))

    def _label(self, node: NodeRef):
        return self.spec.activities[node.activity].nodes[node.local].label

    def _record(self, entry: ScheduleEntry, lab, res, outcome=None, k=None) -> None:
        psi = self.cfg.psi
        late = res.completed > entry.completion + psi
        if late:
            log.warning("deadline missed by %s: C'=%s > C+psi=%s", entry.node, res.completed, entry.completion + psi)
            self.trace.notes.append(f"deadline: {entry.node} completed at {res.completed} > {entry.completion + psi}")
        kind = "action" if isinstance(lab, Action) else "event"
        name = lab.action if kind == "action" else lab.event
        rows = self.ac.rows(entry.node)
        self.trace.records.append(TraceRecord(
            entry.node, kind, name, getattr(lab, "peripheral", None),
            entry.start, entry.completion, res.started, res.completed,
            res.started - entry.start - psi, self.path_of.get(entry.node, -1), late, rows, outcome, k,
        ))

    def _complete(self, payload) -> None:
        entry, lab, res, _ = payload
        self._record(entry, lab, res)

    def _outcome(self, payload) -> None:
        entry, lab, res = payload
        self._record(entry, lab, res, res.outcome, res.k)
        self.pending[(lab.event, res.k)] = (res.observed, res.outcome, entry.node)
        if (lab.event, res.outcome) not in self.spec.gamma:
            raise EngineError(f"plant returned outcome {res.outcome!r} not allowed for event {lab.event!r}")
