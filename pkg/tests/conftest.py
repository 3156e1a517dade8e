import random
from fractions import Fraction

import pytest

from actexec.engine import EngineConfig
from actexec.model import Action, Activity, Claim, Event, Node, Release, Universe
from actexec.specfile import data_path, load_json, load_spec, parse_spec
from actexec.timing import zero_state

PSI = Fraction(10)
DA = Fraction(1, 10)
DE = Fraction(2, 5)


@pytest.fixture(scope="session")
def running():
    return load_spec(data_path("running_example.json"))


@pytest.fixture(scope="session")
def running_doc():
    return load_json(data_path("running_example.json"))


@pytest.fixture(scope="session")
def assembler():
    return load_spec(data_path("assembler.json"))


@pytest.fixture(scope="session")
def acts(running):
    return running.activities


@pytest.fixture(scope="session")
def zero(running):
    return zero_state(running.universe.resource_names)


@pytest.fixture
def cfg():
    return EngineConfig(psi=PSI, dA=DA, dE=DE)


def reparse(doc):
    return parse_spec(doc, validate=False)


# -- random activities ------------------------------------------------------------

UNIVERSE = Universe.of({"r1": ["p1", "p2"], "r2": ["p3"], "r3": ["p4", "p5"]})
DURATIONS = [Fraction(0), Fraction(1), Fraction(2), Fraction(1, 2), Fraction(3, 4), Fraction(5, 3)]


def random_activity(rng: random.Random, max_nodes: int = 12, name: str = "A", events=("e", "f"),
                    universe: Universe = UNIVERSE) -> Activity:
    """A well-formed activity with at most ``max_nodes`` nodes.

    Every resource is claimed and released; actions sit between the claim
    and the release of their resource; actions on one peripheral and
    instances of one event are chained.
    """
    res = universe.resource_names
    budget = max(0, max_nodes - 2 * len(res))
    n_inner = rng.randint(0, budget)
    peripherals = sorted(universe.owner)
    inner = []
    for i in range(n_inner):
        if events and rng.random() < 0.25:
            inner.append(Node(f"x{i}", Event(rng.choice(events)), rng.choice(DURATIONS)))
        else:
            p = rng.choice(peripherals)
            inner.append(Node(f"x{i}", Action(f"act{i}", p), rng.choice(DURATIONS)))
    nodes = [Node(f"cl_{r}", Claim(r)) for r in res] + inner + [Node(f"rl_{r}", Release(r)) for r in res]
    edges = set()
    last_p, last_e = {}, {}
    for i, n in enumerate(inner):
        lab = n.label
        if isinstance(lab, Action):
            r = universe.owner[lab.peripheral]
            edges.add((f"cl_{r}", n.id))
            edges.add((n.id, f"rl_{r}"))
            if lab.peripheral in last_p:
                edges.add((last_p[lab.peripheral], n.id))
            last_p[lab.peripheral] = n.id
        else:
            if lab.event in last_e:
                edges.add((last_e[lab.event], n.id))
            else:
                pool = [m.id for m in inner[:i]] + [f"cl_{r}" for r in res]
                edges.add((rng.choice(pool), n.id))
            last_e[lab.event] = n.id
            if rng.random() < 0.5:
                edges.add((n.id, f"rl_{rng.choice(res)}"))
        for m in inner[:i]:
            if rng.random() < 0.15:
                edges.add((m.id, n.id))
    for r in res:
        users = [s for s, t in edges if t == f"rl_{r}"]
        if not users:
            edges.add((f"cl_{r}", f"rl_{r}"))
    # a release must be reached by the claim of its resource
    for r in res:
        if not any(s == f"cl_{r}" for s, _ in edges):
            edges.add((f"cl_{r}", f"rl_{r}"))
    act = Activity.build(name, nodes, edges)
    return _close_claims(act, universe)


def _close_claims(act: Activity, universe: Universe) -> Activity:
    """Add cl_r -> rl_r when an event-only path left the release unreachable."""
    from actexec.model import reachability

    order, index, reach = reachability(act)
    edges = set(act.edges)
    for r in universe.resource_names:
        if not reach[index[f"cl_{r}"]] >> index[f"rl_{r}"] & 1:
            edges.add((f"cl_{r}", f"rl_{r}"))
    return Activity(act.name, dict(act.nodes), frozenset(edges))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
