"""Command line: validate specs, run simulations, export Gantt data, measure costs.

Exit status is 0 when every check passes, 1 when something was found and
2 on operational errors (unreadable files, malformed input).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .engine import EngineConfig, EngineError, execute
from .model import ConstraintViolationError, SpecError
from .plant import PlantConfigError, check_plant_against_spec, plant_from_dict
from .report import Report
from .specfile import load_json, parse_spec, validate_spec
from .timeval import TimeFormatError, format_time, parse_time
from .trace import TraceFormatError, read_trace, write_trace
from .verify import (
    check_behavior_preservation,
    check_criticality,
    check_ready_before_start,
    check_timing_relation,
    delta_summary,
    export_gantt,
    gantt_svg,
)

EXIT_OK, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2

log = logging.getLogger("actexec")


class UsageError(Exception):
    pass


def _emit(report: Report, fmt: str) -> None:
    print(report.to_json() if fmt == "json" else report.to_text())


def parse_scripts(values, events) -> dict:
    """``--script`` values: ``e=u1,u2`` or a bare list when there is one event."""
    scripts = {}
    for v in values or []:
        for part in v.split(";"):
            part = part.strip()
            if not part:
                continue
            if "=" in part:
                e, outs = part.split("=", 1)
                e = e.strip()
            else:
                if len(events) != 1:
                    raise UsageError(f"--script {part!r}: name the event (e=...) when the spec has {len(events)} events")
                e, outs = next(iter(events)), part
            scripts[e] = [u.strip() for u in outs.split(",") if u.strip()]
    return scripts


def _load(args, manifest: dict | None = None):
    """Spec document, plant section and engine config from files and flags."""
    manifest = manifest or {}
    base = Path(manifest.get("_dir", "."))
    spec_path = args.spec or (manifest.get("spec") and str(base / manifest["spec"]))
    if not spec_path:
        raise UsageError("no --spec given")
    doc = load_json(spec_path)
    spec = parse_spec(doc, validate=False)

    plant_doc = dict(doc.get("plant", {}))
    if isinstance(manifest.get("plant"), str):
        plant_doc.update(load_json(base / manifest["plant"]))
    elif isinstance(manifest.get("plant"), dict):
        plant_doc.update(manifest["plant"])
    if getattr(args, "plant", None):
        plant_doc.update(load_json(args.plant))

    run_doc = dict(doc.get("run", {}))
    run_doc.update(manifest.get("run", {}))
    overrides = {"clock": getattr(args, "clock", None)}
    if getattr(args, "psi", None) is not None:
        overrides["psi"] = parse_time(args.psi, spec.time_unit)
    cfg = EngineConfig.from_dict(run_doc, spec.time_unit, **overrides)
    return spec, plant_doc, cfg


def cmd_validate(args) -> int:
    doc = load_json(args.spec)
    spec = parse_spec(doc, validate=False)
    report = validate_spec(spec)
    if "plant" in doc or args.plant:
        spec, plant_doc, cfg = _load(args)
        plant = plant_from_dict(plant_doc, spec, cfg.dA, cfg.dE)
        report = report.merged(check_plant_against_spec(plant, spec, cfg.dA, cfg.dE))
    _emit(report, args.format)
    return EXIT_OK if report.ok else EXIT_FINDINGS


def _read_manifest(path) -> dict:
    m = load_json(path)
    m["_dir"] = str(Path(path).resolve().parent)
    return m


def cmd_run(args) -> int:
    manifest = _read_manifest(args.manifest) if args.manifest else {}
    spec, plant_doc, cfg = _load(args, manifest)
    pre = validate_spec(spec)
    if not pre.ok:
        _emit(pre, args.format)
        return EXIT_FINDINGS

    scripts = parse_scripts(args.script, spec.events)
    for e, outs in manifest.get("scripts", {}).items():
        scripts.setdefault(e, list(outs))
    reps = args.reps if args.reps is not None else int(manifest.get("reps", 1))
    seed0 = args.seed if args.seed is not None else int(manifest.get("seed", plant_doc.get("seed", 0)))
    seeds = manifest.get("seeds") or [seed0 + i for i in range(reps)]
    if len(set(seeds)) != len(seeds):
        raise UsageError("seeds must be distinct per repetition")
    seeds = seeds[:reps]
    out = Path(args.out or manifest.get("out") or "runs")
    if manifest.get("out") and not args.out:
        out = Path(manifest["_dir"]) / manifest["out"]
    out.mkdir(parents=True, exist_ok=True)

    plant_check = check_plant_against_spec(plant_from_dict(plant_doc, spec, cfg.dA, cfg.dE, scripts=scripts),
                                           spec, cfg.dA, cfg.dE)
    if not plant_check.ok:
        log.warning("plant does not satisfy the timing assumptions; running anyway")
    bound = parse_time(args.bound, spec.time_unit) if args.bound else None

    traces, rows, failed = [], [], 0
    for i, seed in enumerate(seeds):
        plant = plant_from_dict(plant_doc, spec, cfg.dA, cfg.dE, seed=seed, scripts=scripts)
        tr = execute(spec, plant, cfg)
        report = check_timing_relation(tr).merged(check_behavior_preservation(tr, spec), check_ready_before_start(tr),
                                                  title=f"run {i} (seed {seed})")
        if bound is not None:
            report = report.merged(check_criticality(tr, bound))
        write_trace(tr, out / f"trace-{i:03d}.jsonl")
        (out / f"report-{i:03d}.json").write_text(report.to_json() + "\n")
        ok = report.ok and tr.aborted is None
        failed += not ok
        traces.append(tr)
        rows.append({
            "run": i, "seed": seed, "ok": ok, "aborted": tr.aborted, "nodes": len(tr.records),
            "outcomes": [list(o) for o in tr.outcomes],
            "maxDelta": None if tr.max_delta() is None else format_time(tr.max_delta()),
            "findings": len(report.findings),
        })
        if args.format == "text":
            status = "ok" if ok else ("ABORTED: " + tr.aborted if tr.aborted else "FAILED")
            print(f"run {i:3d} seed {seed}: {len(tr.records)} nodes, max delta "
                  f"{rows[-1]['maxDelta']}, {status}")
            if not report.ok:
                print(report.to_text())

    summary = {
        "runs": len(traces),
        "failed": failed,
        "plantCheck": plant_check.to_dict(),
        "deltas": {k: (format_time(v) if isinstance(v, Fraction) else v) for k, v in delta_summary(traces).items()},
        "costs": _cost_maxima(traces),
        "results": rows,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if args.format == "json":
        print(json.dumps(summary, indent=2))
    else:
        print(f"{len(traces)} runs, {failed} with findings; traces in {out}")
    return EXIT_OK if failed == 0 else EXIT_FINDINGS


def _cost_maxima(traces) -> dict:
    out: dict[str, Fraction] = {}
    for tr in traces:
        for p in tr.paths:
            for k, v in p.costs.items():
                out[k] = max(out.get(k, v), v)
    return {k: format_time(v) for k, v in out.items()}


def cmd_gantt(args) -> int:
    tr = read_trace(args.trace)
    spec = parse_spec(load_json(args.spec), validate=False) if args.spec else None
    doc = export_gantt(tr, spec)
    out = Path(args.out) if args.out else Path(args.trace).with_suffix(".gantt.json")
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {out}")
    if args.svg:
        svg = Path(args.svg)
        svg.write_text(gantt_svg(doc))
        print(f"wrote {svg}")
    return EXIT_OK


def cmd_measure(args) -> int:
    manifest = _read_manifest(args.manifest) if args.manifest else {}
    spec, plant_doc, cfg = _load(args, manifest)
    scripts = parse_scripts(args.script, spec.events)
    reps = args.reps if args.reps is not None else 1
    seed0 = args.seed if args.seed is not None else 0
    margin = Fraction(args.margin)

    maxima: dict[str, Fraction] = {}
    largest = None
    traces = []
    for i in range(reps):
        plant = plant_from_dict(plant_doc, spec, cfg.dA, cfg.dE, seed=seed0 + i, scripts=scripts)
        tr = execute(spec, plant, cfg)
        traces.append(tr)
        counts: dict[int, int] = {}
        for r in tr.records:
            counts[r.path] = counts.get(r.path, 0) + 1
        for p in tr.paths:
            for k, v in p.costs.items():
                maxima[k] = max(maxima.get(k, v), v)
            n = counts.get(p.index, 0)
            if largest is None or n > largest[0]:
                largest = (n, p.transitions)

    suggested_dE = sum(maxima.values(), Fraction(0)) * (1 + margin)
    max_delta = max((tr.max_delta() for tr in traces if tr.records), default=Fraction(0))
    suggested_dA = max_delta * (1 + margin)
    result = {
        "clock": cfg.clock,
        "runs": reps,
        "components": {k: format_time(v) for k, v in sorted(maxima.items())},
        "suggestedDE": format_time(suggested_dE),
        "configuredDE": format_time(cfg.dE),
        "maxDelta": format_time(max_delta),
        "suggestedDA": format_time(suggested_dA),
        "configuredDA": format_time(cfg.dA),
        "largestPath": None if largest is None else {"nodes": largest[0], "transitions": list(largest[1])},
        "withinBounds": suggested_dE <= cfg.dE and suggested_dA <= cfg.dA,
    }
    if args.format == "json":
        print(json.dumps(result, indent=2))
    else:
        print(f"clock {cfg.clock}, {reps} runs (model unit {format_time(spec.time_unit)} s)")
        for k, v in result["components"].items():
            print(f"  {k:7s} {v}")
        print(f"  dE suggested {result['suggestedDE']} (configured {result['configuredDE']})")
        print(f"  dA suggested {result['suggestedDA']} (configured {result['configuredDA']})")
        if largest is not None:
            print(f"  largest path: {largest[0]} nodes: {','.join(largest[1])}")
        print("  within bounds" if result["withinBounds"] else "  EXCEEDS configured bounds")
    return EXIT_OK if result["withinBounds"] else EXIT_FINDINGS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="actexec", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log engine warnings")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spec_required=True):
        sp.add_argument("--spec", required=spec_required, help="specification JSON file")
        sp.add_argument("--plant", help="plant JSON file; keys override the spec's plant section")
        sp.add_argument("--format", choices=("text", "json"), default="text")

    v = sub.add_parser("validate", help="check a specification")
    common(v)
    v.set_defaults(func=cmd_validate)

    for name, func, helptext in (("run", cmd_run, "run simulations and verify them"),
                                 ("measure", cmd_measure, "measure per-layer processing costs")):
        r = sub.add_parser(name, help=helptext)
        common(r, spec_required=False)
        r.add_argument("--manifest", help="run manifest JSON file")
        r.add_argument("--seed", type=int, help="first seed")
        r.add_argument("--reps", type=int, help="number of repetitions")
        r.add_argument("--clock", choices=("simulated", "realtime"))
        r.add_argument("--psi", help="start offset from launch, e.g. 10 or 5ms")
        r.add_argument("--script", action="append", help="outcome script: 'e=u1,u2' or 'u1,u2'")
        r.set_defaults(func=func)
        if name == "run":
            r.add_argument("--out", help="output directory (default ./runs)")
            r.add_argument("--bound", help="criticality bound on delays, e.g. 20ms")
        else:
            r.add_argument("--margin", default="0", help="safety margin factor added to measured maxima")

    g = sub.add_parser("gantt", help="export Gantt data from a trace")
    g.add_argument("trace", help="trace JSONL file")
    g.add_argument("--spec", help="spec file, for resource row order")
    g.add_argument("--out", help="output JSON path")
    g.add_argument("--svg", help="also write an SVG drawing here")
    g.set_defaults(func=cmd_gantt)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConstraintViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(exc.report.to_text(), file=sys.stderr)
        return EXIT_FINDINGS
    except (OSError, json.JSONDecodeError, SpecError, PlantConfigError, EngineError, TimeFormatError,
            TraceFormatError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
