"""Time-triggered execution of activity specifications.

Activities are timed dependency graphs over claimed resources; an I/O
automaton chooses which activity runs next from event outcomes.  This
package validates such specifications, sequences activities into
behaviors, computes their specified schedules, executes them against a
simulated plant and checks the recorded traces.
"""

from .automaton import IOAutomaton, Transition, DecisionPath, next_decision_path, walk
from .engine import ComponentCosts, EngineConfig, execute
from .model import Action, Activity, ActivitySpec, Claim, Event, Node, NodeRef, Release, Universe, validate_activity
from .plant import PlantConfig, SimPlant, check_plant_against_spec, conforming_plant, plant_from_dict
from .sequencing import behavior_activity, processed_events, seq_event, seq_plain
from .specfile import data_path, load_spec, parse_spec, validate_spec
from .timing import activity_start, decision_path_start, node_times, zero_state
from .trace import ExecutionTrace, read_trace, write_trace
from .verify import check_behavior_preservation, check_criticality, check_timing_relation, export_gantt

__version__ = "0.1.0"

__all__ = [
    "Action", "Activity", "ActivitySpec", "Claim", "ComponentCosts", "DecisionPath", "EngineConfig", "Event",
    "ExecutionTrace", "IOAutomaton", "Node", "NodeRef", "PlantConfig", "Release", "SimPlant", "Transition",
    "Universe", "activity_start", "behavior_activity", "check_behavior_preservation", "check_criticality",
    "check_plant_against_spec", "check_timing_relation", "conforming_plant", "data_path", "decision_path_start",
    "execute", "export_gantt", "load_spec", "next_decision_path", "node_times", "parse_spec", "plant_from_dict",
    "processed_events", "read_trace", "seq_event", "seq_plain", "validate_activity", "validate_spec", "walk",
    "write_trace", "zero_state",
]
