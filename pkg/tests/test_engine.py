import copy
from fractions import Fraction

import pytest

from actexec.automaton import COMPLETED
from actexec.engine import ActivityController, EngineConfig, EngineError, LogisticsController, execute
from actexec.model import Claim, NodeRef, Release, is_observable
from actexec.plant import conforming_plant, plant_from_dict
from actexec.sequencing import behavior_activity
from actexec.timing import node_times, zero_state
from conftest import DA, DE, PSI, reparse

F = Fraction
U1, U2 = ("e", "u1"), ("e", "u2")
ZERO_DELAYS = {"delays": {"startMax": "0", "observeMax": "0"}}


def exact_plant(spec, scripts):
    return plant_from_dict(ZERO_DELAYS, spec, DA, DE, scripts=scripts, jitter_low=F(1))


def locals_of(entries):
    return {e.node.local: (e.start, e.completion) for e in entries}


# -- logistics controller -------------------------------------------------------


def test_lc_first_path(running):
    lc = LogisticsController(running.automaton)
    rho, ek = lc.advance()
    assert rho.activities == ["Act1", "Act2"] and ek is None
    assert lc.state == "q2" and lc.waiting_for() == "e"


def test_lc_loop_then_exit(running):
    lc = LogisticsController(running.automaton)
    lc.advance()
    rho, ek = lc.advance(U1)
    assert rho.activities == ["Act3", "Act1", "Act2"] and ek == ("e", 1)
    rho, ek = lc.advance(U2)
    assert rho.activities == ["Act4"] and ek == ("e", 2)
    assert lc.finished
    assert lc.advance() == (COMPLETED, None)


def test_lc_direct_exit(running):
    lc = LogisticsController(running.automaton)
    lc.advance()
    rho, ek = lc.advance(U2)
    assert rho.activities == ["Act4"] and ek == ("e", 1)
    assert lc.advance()[0] is COMPLETED


def test_lc_unknown_outcome(running):
    lc = LogisticsController(running.automaton)
    lc.advance()
    with pytest.raises(Exception):
        lc.advance(("e", "u9"))


# -- activity controller --------------------------------------------------------


def test_ac_first_path(running):
    ac = ActivityController(running)
    rho, _ = LogisticsController(running.automaton).advance()
    entries, start = ac.extend(rho)
    assert locals_of(entries) == {"n4": (0, 2), "n2": (0, 1), "n1": (1, 2), "n3": (2, 3), "n5": (3, 4)}
    assert start == 0
    assert ac.dispatched == {e.node for e in entries}


def test_ac_exit_path_matches_full_recomputation(running, zero):
    ac = ActivityController(running)
    lc = LogisticsController(running.automaton)
    ac.extend(lc.advance()[0])
    rho, ek = lc.advance(U2)
    entries, _ = ac.extend(rho, ek)
    assert locals_of(entries) == {"n7": (4, 6)}
    word = [(None, "Act1"), (None, "Act2"), (U2, "Act4")]
    full = node_times(behavior_activity(word, running.activities), zero)
    assert {n: (v.start, v.completion) for n, v in full.items() if n.local == "n7"} == \
           {e.node: (e.start, e.completion) for e in entries}


def test_ac_epsilon_path(running_doc):
    doc = copy.deepcopy(running_doc)
    doc["automaton"] = {"states": ["s", "t"], "initial": "s", "finals": ["t"],
                        "transitions": [{"from": "s", "input": None, "output": None, "to": "t"}]}
    spec = reparse(doc)
    ac = ActivityController(spec)
    entries, start = ac.extend(LogisticsController(spec.automaton).advance()[0])
    assert entries == [] and start is None


def test_ac_on_outcome(running):
    ac = ActivityController(running)
    entries, _ = ac.extend(LogisticsController(running.automaton).advance()[0])
    by = {e.node.local: e.node for e in entries}
    assert ac.on_outcome(by["n5"], "u1") == U1
    assert ac.on_outcome(by["n5"], "u2") == U2
    with pytest.raises(EngineError):
        ac.on_outcome(by["n1"], "u1")
    with pytest.raises(EngineError):
        ac.on_outcome(by["n5"], "u7")


def test_ac_underflow(running):
    ac = ActivityController(running)
    lc = LogisticsController(running.automaton)
    lc.advance()
    rho, _ = lc.advance(U2)
    with pytest.raises(Exception):
        ac.extend(rho, ("e", 1))


# -- full runs ----------------------------------------------------------------------


def test_golden_run(running, cfg):
    tr = execute(running, exact_plant(running, {"e": ["u2"]}), cfg)
    assert tr.completed and tr.conforming
    got = {r.node.local: r.started for r in tr.records}
    assert got == {"n4": 10, "n2": 10, "n1": 11, "n3": 12, "n5": 13, "n7": 14}
    assert tr.outcomes == [U2]
    assert all(r.delta == 0 for r in tr.records)


def test_node_multiset_two_iterations(running, cfg):
    tr = execute(running, conforming_plant(running, DA, DE, scripts={"e": ["u1", "u2"]}), cfg)
    word = [(None, "Act1"), (None, "Act2"), (U1, "Act3"), (None, "Act1"), (None, "Act2"), (U2, "Act4")]
    b = behavior_activity(word, running.activities)
    expected = sorted(n for n, v in b.graph.nodes.items() if is_observable(v.label))
    assert tr.node_multiset() == expected
    assert tr.outcomes == [U1, U2]


def test_epsilon_only_spec(running_doc, cfg):
    doc = copy.deepcopy(running_doc)
    doc["automaton"] = {"states": ["s", "t"], "initial": "s", "finals": ["t"],
                        "transitions": [{"from": "s", "input": None, "output": None, "to": "t"}]}
    spec = reparse(doc)
    tr = execute(spec, conforming_plant(spec, DA, DE), cfg)
    assert tr.completed and tr.records == [] and tr.aborted is None


def test_never_early_and_delay_bound(running, cfg):
    for seed in range(30):
        tr = execute(running, conforming_plant(running, DA, DE, seed=seed, scripts={"e": ["u1", "u1", "u2"]}), cfg)
        assert tr.completed
        for r in tr.records:
            assert 0 <= r.delta <= DA
            assert r.completed <= r.completion + PSI


def test_determinacy(running, cfg):
    runs = [execute(running, conforming_plant(running, DA, DE, seed=s, scripts={"e": ["u1", "u2"]}), cfg)
            for s in (1, 2)]
    a, b = runs
    assert a.node_multiset() == b.node_multiset()
    assert a.outcomes == b.outcomes
    assert a.schedule() == b.schedule()
    assert [r.started for r in a.records] != [r.started for r in b.records]


def test_bit_reproducible(running, cfg):
    p = conforming_plant(running, DA, DE, seed=5, scripts={"e": ["u1", "u2"]})
    assert execute(running, p, cfg) == execute(running, p, cfg)


def test_psi_not_in_future(running):
    tr = execute(running, conforming_plant(running, DA, DE, scripts={"e": ["u2"]}), EngineConfig(psi=F(0), dA=DA, dE=DE))
    assert tr.aborted.startswith("A4") and tr.records == []


def test_initialization_overruns_psi(running):
    cfg = EngineConfig.from_dict({"psi": "1", "dA": "0.1", "dE": "0.4",
                                  "componentCosts": {"dLC": "1", "dAC": "1", "daC": "1"}}, F(1))
    tr = execute(running, conforming_plant(running, DA, DE, scripts={"e": ["u2"]}), cfg)
    assert tr.aborted.startswith("A4")


def test_plant_failure_aborts_with_partial_trace(running, cfg):
    doc = {"actions": [{"action": "c", "peripheral": "p3", "worstCase": "0.9", "fail": True}]}
    tr = execute(running, plant_from_dict(doc, running, DA, DE, scripts={"e": ["u2"]}), cfg)
    assert tr.aborted.startswith("plant")
    assert {r.node.local for r in tr.records} <= {"n1", "n2", "n4"}
    assert not tr.completed


def test_script_exhaustion_stalls(running, cfg):
    tr = execute(running, conforming_plant(running, DA, DE, scripts={"e": ["u1"]}), cfg)
    assert tr.aborted is not None and not tr.completed


def test_overrun_logged_not_aborted(running, cfg):
    doc = {"actions": [{"action": "c", "peripheral": "p3", "worstCase": "0.9", "overrun": "0.5"}]}
    tr = execute(running, plant_from_dict(doc, running, DA, DE, scripts={"e": ["u2"]}), cfg)
    assert tr.completed and not tr.conforming
    assert [r.node.local for r in tr.records if r.deadline_violated] == ["n3"]


def test_prune_matches_full(running):
    scripts = {"e": ["u1"] * 6 + ["u2"]}
    full = execute(running, conforming_plant(running, DA, DE, seed=3, scripts=scripts), EngineConfig(PSI, DA, DE))
    pruned = execute(running, conforming_plant(running, DA, DE, seed=3, scripts=scripts),
                     EngineConfig(PSI, DA, DE, retention="prune-completed"))
    assert full.records == pruned.records and full.outcomes == pruned.outcomes


def test_prune_bounds_state(running):
    ac = ActivityController(running, retention="prune-completed")
    lc = LogisticsController(running.automaton)
    sizes = []
    ac.extend(lc.advance()[0])
    for _ in range(20):
        rho, ek = lc.advance(U1)
        ac.extend(rho, ek)
        ac.prune()
        sizes.append(len(ac.behavior.graph.nodes))
    assert max(sizes[5:]) == max(sizes[:5])


def test_path_records(running, cfg):
    tr = execute(running, conforming_plant(running, DA, DE, scripts={"e": ["u1", "u2"]}), cfg)
    assert [p.processed for p in tr.paths] == [None, U1, U2]
    assert [p.instance for p in tr.paths] == [None, 1, 2]
    assert tr.paths[0].ready <= PSI
    quarter = DE / 4
    assert tr.paths[1].costs == {"dEvent": quarter, "dLC": quarter, "dAC": quarter, "daC": quarter}
    for p in tr.paths[1:]:
        assert p.ready <= p.start + PSI


def test_config_from_dict_units():
    cfg = EngineConfig.from_dict({"psi": "100ms", "dA": "1.6ms", "dE": "6ms"}, F(1, 1000))
    assert (cfg.psi, cfg.dA, cfg.dE) == (100, F(8, 5), 6)
    assert cfg.costs.total == 6


def test_config_invalid():
    with pytest.raises(Exception):
        EngineConfig(PSI, F(-1), DE)
    with pytest.raises(Exception):
        EngineConfig(PSI, DA, DE, clock="wall")
