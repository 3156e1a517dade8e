"""A simulated plant with bounded durations, delays and seeded outcomes.

All plant times are in model units.  Random draws land on a dyadic grid
so every sampled value is an exact fraction and runs are bit-reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping

from .model import Action, ActivitySpec, Event
from .report import Finding, Report
from .timeval import parse_time

GRID = 2**20


class PlantError(Exception):
    pass


class PlantConfigError(PlantError):
    pass


class PlantStartFailure(PlantError):
    """The plant refused to start an action (failure injection)."""


def _sample(rng: random.Random, lo: Fraction, hi: Fraction) -> Fraction:
    if hi <= lo:
        return lo
    return lo + (hi - lo) * Fraction(rng.randrange(GRID + 1), GRID)


@dataclass(frozen=True)
class ActionModel:
    """Timing of one (action, peripheral) pair.

    ``jitter`` is the range actual durations are drawn from; ``overrun``
    adds a fixed amount on top, which lets a test push an action past its
    declared worst case.
    """

    worst_case: Fraction
    jitter: tuple[Fraction, Fraction]
    fail: bool = False
    overrun: Fraction = Fraction(0)

    def __post_init__(self):
        lo, hi = self.jitter
        if not (0 <= lo <= hi <= self.worst_case):
            raise PlantConfigError(f"jitter [{lo}, {hi}] must lie within [0, {self.worst_case}]")


@dataclass(frozen=True)
class OutcomeSource:
    """Where event outcomes come from: a script or a seeded distribution."""

    script: tuple[str, ...] | None = None
    dist: tuple[tuple[str, float], ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.script is None) == (self.dist is None):
            raise PlantConfigError("an outcome source needs exactly one of script or dist")
        if self.dist is not None:
            if not self.dist or any(p < 0 for _, p in self.dist) or sum(p for _, p in self.dist) <= 0:
                raise PlantConfigError("outcome probabilities must be nonnegative with a positive sum")

    def outcomes(self) -> set[str]:
        return set(self.script) if self.script is not None else {u for u, _ in self.dist}

    def draw(self, event: str, k: int) -> str:
        """Outcome of the ``k``-th emission (1-based) of ``event``."""
        if self.script is not None:
            if k > len(self.script):
                raise PlantConfigError(f"outcome script for {event!r} has {len(self.script)} entries, emission {k} needs more")
            return self.script[k - 1]
        rng = random.Random(f"{self.seed}:{event}:{k}")
        names = [u for u, _ in self.dist]
        return rng.choices(names, weights=[p for _, p in self.dist])[0]


@dataclass(frozen=True)
class EventModel:
    resolution: Fraction
    jitter: tuple[Fraction, Fraction]
    source: OutcomeSource

    def __post_init__(self):
        lo, hi = self.jitter
        if not (0 <= lo <= hi <= self.resolution):
            raise PlantConfigError(f"jitter [{lo}, {hi}] must lie within [0, {self.resolution}]")


@dataclass(frozen=True)
class PlantConfig:
    actions: Mapping[tuple[str, str], ActionModel] = field(default_factory=dict)
    events: Mapping[str, EventModel] = field(default_factory=dict)
    start_delay: tuple[Fraction, Fraction] = (Fraction(0), Fraction(0))
    observe_delay: tuple[Fraction, Fraction] = (Fraction(0), Fraction(0))
    seed: int = 0

    def __post_init__(self):
        for lo, hi in (self.start_delay, self.observe_delay):
            if not 0 <= lo <= hi:
                raise PlantConfigError(f"delay range [{lo}, {hi}] is not a valid range")

    @property
    def max_delay(self) -> Fraction:
        return self.start_delay[1] + self.observe_delay[1]

    def with_scripts(self, scripts: Mapping[str, list[str]]) -> "PlantConfig":
        events = dict(self.events)
        for e, script in scripts.items():
            if e not in events:
                raise PlantConfigError(f"no plant model for event {e!r}")
            events[e] = replace(events[e], source=OutcomeSource(script=tuple(script)))
        return replace(self, events=events)

    def with_seed(self, seed: int) -> "PlantConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class ActionResult:
    started: Fraction
    completed: Fraction
    observed: Fraction


@dataclass(frozen=True)
class EventResult:
    outcome: str
    k: int
    started: Fraction
    completed: Fraction
    observed: Fraction


class SimPlant:
    """Answers action and sampling requests from a :class:`PlantConfig`."""

    def __init__(self, config: PlantConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        self.emissions: dict[str, int] = {}

    def _delays(self) -> tuple[Fraction, Fraction]:
        return _sample(self.rng, *self.config.start_delay), _sample(self.rng, *self.config.observe_delay)

    def start_action(self, node, label: Action, issued: Fraction) -> ActionResult:
        model = self.config.actions.get((label.action, label.peripheral))
        if model is None:
            raise PlantConfigError(f"no plant model for action {label.action!r} on {label.peripheral!r}")
        if model.fail:
            raise PlantStartFailure(f"plant failed to start {label} for node {node}")
        start, observe = self._delays()
        duration = _sample(self.rng, *model.jitter) + model.overrun
        s = issued + start
        return ActionResult(s, s + duration, s + duration + observe)

    def sample_event(self, node, label: Event, issued: Fraction) -> EventResult:
        model = self.config.events.get(label.event)
        if model is None:
            raise PlantConfigError(f"no plant model for event {label.event!r}")
        k = self.emissions.get(label.event, 0) + 1
        self.emissions[label.event] = k
        start, observe = self._delays()
        s = issued + start
        c = s + _sample(self.rng, *model.jitter)
        return EventResult(model.source.draw(label.event, k), k, s, c, c + observe)


# -- checks against a specification ----------------------------------------------

_RANK = {"A2": 60, "A5": 61, "A6": 62, "plant-missing": 63, "plant-outcome": 64}


def check_plant_against_spec(plant: PlantConfig, spec: ActivitySpec, dA, dE) -> Report:
    """Flag every node whose specified time is not conservative for the plant.

    Actions need ``T(n) >= worst case + dA``; events need
    ``T(n) >= resolution + dE + dA``.  The plant's delays must fit in ``dA``.
    Injected overruns are deliberately not part of the declared bounds.
    """
    dA, dE = Fraction(dA), Fraction(dE)
    found = []
    if plant.max_delay > dA:
        found.append(Finding(_RANK["A2"], "A2", (), f"start plus observation delay {plant.max_delay} exceeds dA={dA}"))
    for name in sorted(spec.activities):
        act = spec.activities[name]
        for nid in sorted(act.nodes):
            node = act.nodes[nid]
            lab = node.label
            if isinstance(lab, Action):
                model = plant.actions.get((lab.action, lab.peripheral))
                if model is None:
                    found.append(Finding(_RANK["plant-missing"], "plant-missing", ((name, nid),), f"no model for {lab}"))
                    continue
                need = model.worst_case + dA
                if node.duration < need:
                    found.append(Finding(_RANK["A5"], "A5", ((name, nid),),
                                         f"{lab}: specified {node.duration} < worst case {model.worst_case} + dA {dA}"))
            elif isinstance(lab, Event):
                model = plant.events.get(lab.event)
                if model is None:
                    found.append(Finding(_RANK["plant-missing"], "plant-missing", ((name, nid),), f"no model for event {lab.event}"))
                    continue
                need = model.resolution + dE + dA
                if node.duration < need:
                    found.append(Finding(_RANK["A6"], "A6", ((name, nid),),
                                         f"event {lab.event}: specified {node.duration} < {model.resolution} + dE {dE} + dA {dA}"))
    for e, model in sorted(plant.events.items()):
        bad = model.source.outcomes() - set(spec.outcomes_of(e))
        if bad:
            found.append(Finding(_RANK["plant-outcome"], "plant-outcome", (e,), f"outcomes {sorted(bad)} not allowed for {e}"))
    return Report("plant assumptions", tuple(found))


# -- construction -------------------------------------------------------------------


def _min_durations(spec: ActivitySpec):
    actions: dict[tuple[str, str], Fraction] = {}
    events: dict[str, Fraction] = {}
    for act in spec.activities.values():
        for node in act.nodes.values():
            lab = node.label
            if isinstance(lab, Action):
                key = (lab.action, lab.peripheral)
                actions[key] = min(actions.get(key, node.duration), node.duration)
            elif isinstance(lab, Event):
                events[lab.event] = min(events.get(lab.event, node.duration), node.duration)
    return actions, events


def _uniform(spec: ActivitySpec, event: str, seed: int) -> OutcomeSource:
    outs = spec.outcomes_of(event)
    if not outs:
        raise PlantConfigError(f"event {event!r} has no outcomes")
    return OutcomeSource(dist=tuple((u, 1.0) for u in outs), seed=seed)


def conforming_plant(spec: ActivitySpec, dA, dE, *, seed: int = 0, scripts: Mapping[str, list[str]] | None = None,
                     jitter_low: Fraction = Fraction(1, 2), start_share: Fraction = Fraction(3, 5)) -> PlantConfig:
    """The largest plant bounds the specification tolerates.

    Worst cases are ``T(n) - dA`` for actions and ``T(e) - dE - dA`` for
    events (smallest over nodes sharing a label); sampled values range from
    ``jitter_low`` times the bound up to the bound.  ``dA`` is split between
    start and observation delays by ``start_share``.
    """
    return plant_from_dict({}, spec, dA, dE, seed=seed, scripts=scripts, jitter_low=jitter_low, start_share=start_share)


def plant_from_dict(doc: Mapping, spec: ActivitySpec, dA, dE, *, seed: int | None = None,
                    scripts: Mapping[str, list[str]] | None = None,
                    jitter_low: Fraction = Fraction(1, 2), start_share: Fraction = Fraction(3, 5)) -> PlantConfig:
    """Read a plant section; anything not given gets a conforming default."""
    dA, dE = Fraction(dA), Fraction(dE)
    unit = spec.time_unit

    def t(v):
        return parse_time(v, unit)

    if seed is None:
        seed = int(doc.get("seed", 0))
    act_min, ev_min = _min_durations(spec)

    actions: dict[tuple[str, str], ActionModel] = {}
    for a in doc.get("actions", []):
        key = (a["action"], a["peripheral"])
        wc = t(a["worstCase"])
        lo, hi = (t(v) for v in a.get("jitter", [wc, wc]))
        actions[key] = ActionModel(wc, (lo, hi), bool(a.get("fail", False)), t(a.get("overrun", 0)))
    for key, tmin in act_min.items():
        if key not in actions:
            wc = max(tmin - dA, Fraction(0))
            actions[key] = ActionModel(wc, (wc * jitter_low, wc))

    events: dict[str, EventModel] = {}
    for ev in doc.get("events", []):
        e = ev["event"]
        res = t(ev["resolution"]) if "resolution" in ev else max(ev_min.get(e, Fraction(0)) - dE - dA, Fraction(0))
        lo, hi = (t(v) for v in ev.get("jitter", [res * jitter_low, res]))
        src = ev.get("source")
        if src is None:
            source = _uniform(spec, e, seed)
        elif "script" in src:
            source = OutcomeSource(script=tuple(src["script"]))
        elif "dist" in src:
            source = OutcomeSource(dist=tuple(sorted((u, float(p)) for u, p in src["dist"].items())),
                                   seed=int(src.get("seed", seed)))
        else:
            raise PlantConfigError(f"event {e!r}: source needs 'script' or 'dist'")
        events[e] = EventModel(res, (lo, hi), source)
    for e in sorted(spec.events):
        if e not in events:
            res = max(ev_min.get(e, Fraction(0)) - dE - dA, Fraction(0))
            events[e] = EventModel(res, (res * jitter_low, res), _uniform(spec, e, seed))

    delays = doc.get("delays", {})
    start_max = t(delays["startMax"]) if "startMax" in delays else dA * start_share
    observe_max = t(delays["observeMax"]) if "observeMax" in delays else max(dA - start_max, Fraction(0))
    start_min = t(delays.get("startMin", 0))
    observe_min = t(delays.get("observeMin", 0))

    plant = PlantConfig(actions, events, (start_min, start_max), (observe_min, observe_max), seed)
    if scripts:
        plant = plant.with_scripts(scripts)
    return plant
