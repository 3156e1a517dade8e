"""Checks on recorded executions, and Gantt export."""

from __future__ import annotations

import statistics
from collections import Counter
from fractions import Fraction
from typing import Iterable, Sequence

from .automaton import AutomatonError, walk
from .model import ActivitySpec, Claim, NodeRef, Release
from .report import Finding, Report
from .sequencing import SequencingError, behavior_activity, observable_nodes, processed_events
from .timeval import format_time, parse_time
from .trace import ExecutionTrace

_RANK = {
    "early-start": 70, "late-start": 71, "deadline": 72,
    "word": 80, "final": 81, "missing": 82, "extra": 83, "outcomes": 84, "order": 85,
    "criticality": 90, "ready-late": 95,
}


def _f(code, subjects, message, kind="violation") -> Finding:
    return Finding(_RANK[code], code, tuple(subjects), message, kind)


def check_timing_relation(trace: ExecutionTrace, dA=None) -> Report:
    """Every executed node starts in ``[S+psi, S+psi+dA]`` and ends by ``C+psi``."""
    dA = trace.dA if dA is None else Fraction(dA)
    psi = trace.psi
    found = []
    for r in trace.records:
        lo, hi, due = r.start + psi, r.start + psi + dA, r.completion + psi
        if r.started < lo:
            found.append(_f("early-start", (r.node,), f"S'={r.started} before S+psi={lo} by {lo - r.started}"))
        if r.started > hi:
            found.append(_f("late-start", (r.node,), f"S'={r.started} after S+psi+dA={hi} by {r.started - hi}"))
        if r.completed > due:
            found.append(_f("deadline", (r.node,), f"C'={r.completed} after C+psi={due} by {r.completed - due}"))
    return Report("timing relation", tuple(found))


def _dependency_pairs(graph) -> Iterable[tuple]:
    """Pairs of action/event nodes joined by a path whose inner nodes are all
    claims or releases."""
    is_res = {n: isinstance(v.label, (Claim, Release)) for n, v in graph.nodes.items()}
    for n, res in is_res.items():
        if res:
            continue
        seen = set()
        stack = list(graph.succ[n])
        while stack:
            m = stack.pop()
            if m in seen:
                continue
            seen.add(m)
            if is_res[m]:
                stack.extend(graph.succ[m])
            else:
                yield n, m


def expected_behavior(trace: ExecutionTrace, spec: ActivitySpec):
    """The word implied by the processed outcomes, its composed activity and
    whether it is accepted."""
    paths, final, unused = walk(spec.automaton, trace.outcomes)
    word = [pair for p in paths for pair in p.word()]
    return word, behavior_activity(word, spec.activities), final, unused


def check_behavior_preservation(trace: ExecutionTrace, spec: ActivitySpec) -> Report:
    found = []
    try:
        word, behavior, final, unused = expected_behavior(trace, spec)
    except (AutomatonError, SequencingError) as exc:
        return Report("behavior preservation", (_f("word", (), f"processed outcomes do not form a word: {exc}"),))

    truncated = not trace.completed or not final
    if not final:
        found.append(_f("final", (), "the processed outcomes do not reach a final state", "incomplete"))
    if unused:
        found.append(_f("outcomes", (), f"{unused} outcomes processed after the final state"))
    if [tuple(p) for p in processed_events(word)] != [tuple(o) for o in trace.outcomes]:
        found.append(_f("outcomes", (), "processed outcomes differ from the word's processed events"))

    expected = set(observable_nodes(behavior))
    counts = Counter(r.node for r in trace.records)
    for n in sorted(expected - set(counts)):
        found.append(_f("missing", (n,), f"{n} was never executed", "incomplete" if truncated else "violation"))
    for n in sorted(set(counts) - expected):
        found.append(_f("extra", (n,), f"{n} is not part of the behavior"))
    for n in sorted(n for n, c in counts.items() if c > 1):
        found.append(_f("extra", (n,), f"{n} executed {counts[n]} times"))

    by_node = trace.by_node()
    if not behavior.graph.is_empty:
        for a, b in _dependency_pairs(behavior.graph):
            if a in by_node and b in by_node and by_node[a].completed > by_node[b].started:
                found.append(_f("order", (a, b), f"{b} started at {by_node[b].started} before {a} completed at {by_node[a].completed}"))
    return Report("behavior preservation", tuple(found))


def check_criticality(trace_or_traces, bound) -> Report:
    """Largest execution delay against the criticality bound.

    Accepts one trace or a campaign; the title carries the max delay.
    """
    traces = [trace_or_traces] if isinstance(trace_or_traces, ExecutionTrace) else list(trace_or_traces)
    bound = Fraction(bound)
    worst = None
    found = []
    for i, tr in enumerate(traces):
        for r in tr.records:
            if worst is None or r.delta > worst[0]:
                worst = (r.delta, i, r.node)
            if r.delta > bound:
                found.append(_f("criticality", (i, r.node), f"delta {r.delta} exceeds bound {bound}"))
    title = "criticality (no nodes)" if worst is None else f"criticality (max delta {format_time(worst[0])}, bound {format_time(bound)})"
    return Report(title, tuple(found))


def delta_summary(traces: Sequence[ExecutionTrace]) -> dict:
    """Distribution of per-run maximum delays over a campaign."""
    maxima = [tr.max_delta() for tr in traces if tr.records]
    if not maxima:
        return {"runs": len(traces), "max": None}
    floats = sorted(float(m) for m in maxima)
    return {
        "runs": len(traces),
        "max": max(maxima),
        "min": min(maxima),
        "mean": statistics.fmean(floats),
        "median": statistics.median(floats),
        "p99": floats[min(len(floats) - 1, int(0.99 * len(floats)))],
    }


def check_ready_before_start(trace: ExecutionTrace) -> Report:
    """Each decision path after the first is queued by ``S(rho) + psi``."""
    found = []
    for p in trace.paths[1:]:
        if p.start is not None and p.ready > p.start + trace.psi:
            found.append(_f("ready-late", (p.index,), f"path {p.index} ready at {p.ready} after S+psi={p.start + trace.psi}"))
    return Report("ready before start", tuple(found))


# -- Gantt ------------------------------------------------------------------------


def export_gantt(trace: ExecutionTrace, spec: ActivitySpec | None = None) -> dict:
    """One row per resource; each bar pairs the specified interval (shifted
    by psi) with the executed one."""
    order = spec.universe.resource_names if spec is not None else []
    rows: dict[str, list] = {}
    for r in trace.records:
        for res in r.resources:
            rows.setdefault(res, []).append(r)
    names = [x for x in order if x in rows] + sorted(x for x in rows if x not in order)
    psi = trace.psi
    doc = {"psi": format_time(psi), "timeUnit": format_time(trace.time_unit), "rows": []}
    for name in names:
        bars = []
        for r in sorted(rows[name], key=lambda r: (r.start, r.node)):
            bars.append({
                "node": list(r.node),
                "label": f"{r.name}@{r.peripheral}" if r.kind == "action" else r.name,
                "kind": r.kind,
                "specified": [format_time(r.start + psi), format_time(r.completion + psi)],
                "executed": [format_time(r.started), format_time(r.completed)],
                "late": r.deadline_violated,
            })
        doc["rows"].append({"resource": name, "bars": bars})
    return doc


def parse_gantt(doc: dict) -> dict:
    """``{node: (S, C, S', C')}`` from an exported document, psi removed."""
    psi = parse_time(doc["psi"], Fraction(1))
    out = {}
    for row in doc["rows"]:
        for bar in row["bars"]:
            s, c = (parse_time(v, Fraction(1)) - psi for v in bar["specified"])
            s2, c2 = (parse_time(v, Fraction(1)) for v in bar["executed"])
            out[NodeRef(*bar["node"])] = (s, c, s2, c2)
    return out


def gantt_svg(doc: dict, scale: float = 40.0, row_height: int = 36) -> str:
    """Plain SVG: solid specified bars above hatched executed ones."""
    bars = [(i, b) for i, row in enumerate(doc["rows"]) for b in row["bars"]]
    ts = [parse_time(v, Fraction(1)) for _, b in bars for v in b["specified"] + b["executed"]]
    t0 = min(ts, default=Fraction(0))
    t1 = max(ts, default=Fraction(1))
    left = 60
    width = left + int(float(t1 - t0) * scale) + 20
    height = row_height * max(1, len(doc["rows"])) + 10
    x = lambda t: left + float(parse_time(t, Fraction(1)) - t0) * scale  # noqa: E731
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        '<defs><pattern id="hatch" width="4" height="4" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">'
        '<line x1="0" y1="0" x2="0" y2="4" stroke="#555" stroke-width="2"/></pattern></defs>',
    ]
    for i, row in enumerate(doc["rows"]):
        y = 5 + i * row_height
        out.append(f'<text x="4" y="{y + row_height // 2}" font-size="12">{row["resource"]}</text>')
    for i, b in bars:
        y = 5 + i * row_height
        s, c = b["specified"]
        e0, e1 = b["executed"]
        fill = "#d33" if b["late"] else "#69c"
        out.append(f'<rect x="{x(s):.2f}" y="{y}" width="{max(x(c) - x(s), 1):.2f}" height="{row_height // 2 - 2}" fill="{fill}">'
                   f'<title>{b["label"]}</title></rect>')
        out.append(f'<rect x="{x(e0):.2f}" y="{y + row_height // 2}" width="{max(x(e1) - x(e0), 1):.2f}" '
                   f'height="{row_height // 2 - 2}" fill="url(#hatch)" stroke="#555"/>')
    out.append("</svg>")
    return "\n".join(out)
