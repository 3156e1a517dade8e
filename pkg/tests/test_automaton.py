import pytest

from actexec.automaton import (
    COMPLETED,
    AutomatonError,
    IOAutomaton,
    NoMatchingTransition,
    Transition,
    accepts,
    all_decision_paths,
    decision_states,
    next_decision_path,
    validate_complete,
    validate_consistent,
    validate_deterministic,
    validate_event_causality,
    validate_nonblocking,
    walk,
)

U1, U2 = ("e", "u1"), ("e", "u2")


@pytest.fixture(scope="module")
def y(running):
    return running.automaton


@pytest.fixture(scope="module")
def gamma(running):
    return running.gamma


def outputs(p):
    return [t.output for t in p.transitions]


def test_decision_states(y):
    assert decision_states(y) == {"q2"}


def test_first_path(y):
    p = next_decision_path(y, "q0")
    assert outputs(p) == ["Act1", "Act2"] and p.end == "q2" and p.processed is None


def test_branch_u1(y):
    p = next_decision_path(y, "q2", U1)
    assert outputs(p) == ["Act3", "Act1", "Act2"] and p.end == "q2" and p.processed == U1


def test_branch_u2_then_completed(y):
    p = next_decision_path(y, "q2", U2)
    assert outputs(p) == ["Act4"] and p.end == "q3"
    assert next_decision_path(y, "q3") is COMPLETED
    assert not COMPLETED


def test_outcome_rules(y):
    with pytest.raises(AutomatonError):
        next_decision_path(y, "q2")
    with pytest.raises(AutomatonError):
        next_decision_path(y, "q0", U1)
    with pytest.raises(NoMatchingTransition):
        next_decision_path(y, "q2", ("e", "u9"))


def test_accepts(y):
    w = [(None, "Act1"), (None, "Act2"), (U2, "Act4")]
    assert accepts(y, w)
    assert not accepts(y, w[:2])
    assert not accepts(y, [(None, "Act2")])
    assert accepts(y, [(None, "Act1"), (None, "Act2"), (U1, "Act3"), (None, "Act1"), (None, "Act2"), (U2, "Act4")])


def test_walk(y):
    paths, final, unused = walk(y, [U1, U1, U2])
    assert final and unused == 0 and len(paths) == 4
    paths, final, _ = walk(y, [U1])
    assert not final and len(paths) == 2
    _, final, unused = walk(y, [U2, U1])
    assert final and unused == 1


def test_all_decision_paths(y, gamma, acts):
    ps = all_decision_paths(y, gamma)
    assert sorted(tuple(outputs(p)) for p in ps) == sorted([("Act1", "Act2"), ("Act3", "Act1", "Act2"), ("Act4",)])
    largest = max(ps, key=lambda p: p.node_count(acts))
    assert outputs(largest) == ["Act3", "Act1", "Act2"] and largest.node_count(acts) == 6


def test_running_example_passes_everything(y, gamma, acts):
    for rep in (validate_deterministic(y, gamma), validate_complete(y, gamma), validate_nonblocking(y),
                validate_consistent(y, acts), validate_event_causality(y)):
        assert rep.findings == ()


def test_two_initial_states(y, gamma):
    rep = validate_deterministic(y.replace(initial=frozenset({"q0", "q1"})), gamma)
    assert rep.codes() == {"Def4a"}


def test_final_with_outgoing(y, gamma):
    bad = y.replace(transitions=y.transitions + (Transition("q3", None, "Act1", "q0"),))
    assert validate_deterministic(bad, gamma).codes() == {"Def4b"}


def test_branch_without_event(y, gamma):
    bad = y.replace(transitions=y.transitions + (Transition("q1", None, "Act3", "q3"),))
    assert validate_deterministic(bad, gamma).codes() == {"Def4c"}


def test_incomplete_branching(y):
    gamma = {U1, U2, ("e", "u3")}
    assert validate_complete(y, gamma).codes() == {"Def5"}
    assert validate_deterministic(y, gamma).ok


def test_blocked_state(y):
    bad = y.replace(states=y.states | {"q4"})
    rep = validate_nonblocking(bad)
    assert rep.codes() == {"A3"} and rep.findings[0].subjects == ("q4",)


def test_processing_before_emission(acts):
    y = IOAutomaton.build(["a", "b", "c"], "a", ["c"],
                          [("a", None, "Act1", "b"), ("b", U1, "Act3", "c"), ("b", U2, "Act4", "c")])
    assert "consistency-i" in validate_consistent(y, acts).codes()


def test_leftover_emission(acts):
    y = IOAutomaton.build(["a", "b"], "a", ["b"], [("a", None, "Act2", "b")])
    assert validate_consistent(y, acts).codes() == {"consistency-ii"}


def test_accumulating_cycle(acts):
    y = IOAutomaton.build(["a", "b", "c"], "a", ["c"],
                          [("a", None, "Act2", "b"), ("b", U1, "Act2", "a"), ("b", U2, "Act3", "a"),
                           ("a", None, "Act4", "c")])
    assert "consistency-iii" in validate_consistent(y, acts).codes()


def test_empty_output_after_event_warns(acts):
    y = IOAutomaton.build(["a", "b", "c", "d"], "a", ["d"],
                          [("a", None, "Act2", "b"), ("b", U1, None, "c"), ("b", U2, None, "c"), ("c", None, "Act1", "d")])
    rep = validate_event_causality(y)
    assert rep.codes() == {"causality"} and rep.ok


def test_build_rejects_unknown_state():
    with pytest.raises(AutomatonError):
        IOAutomaton.build(["a"], "a", ["z"], [])
    with pytest.raises(AutomatonError):
        IOAutomaton.build(["a"], "a", ["a"], [("a", None, None, "b")])
