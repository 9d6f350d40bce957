"""Command line interface.

Subcommands: ``run`` (fly one scenario, write its trace), ``batch`` (fly a
scenario under many seeds, write a JSON report), ``dump-frames`` (write
rendered camera frames as PGM files) and ``plot`` (render a trace to SVG).

Machine-readable output goes only to the files named by ``--out``;
everything printed by the tool itself goes to stderr. Exit codes: 0 for a
successful run, 2 when the flown mission ended in a collision, 3 on
timeout, and 1 for usage, scenario or I/O errors.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError
from .mission import MissionStatus, read_trace, run_mission, summarize, write_trace
from .plotting import write_plot_svg
from .sensors import write_pgm
from .world import ScenarioError, parse_scenario

_STATUS_EXIT = {MissionStatus.SUCCESS: 0, MissionStatus.COLLISION: 2,
                MissionStatus.TIMEOUT: 3}


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_document(path: str, overrides: list[str], seed: int | None) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        document = json.load(fh)
    if not isinstance(document, dict):
        raise ScenarioError(f"scenario file {path} must hold a JSON object")
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = document
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ScenarioError(f"--set path {key!r} crosses a non-object value")
        node[parts[-1]] = value
    if seed is not None:
        document["seed"] = seed
    return document


def _metrics_line(label: str, metrics: dict) -> str:
    body = " ".join(f"{k}={v:.9g}" if isinstance(v, float) else f"{k}={v}"
                    for k, v in metrics.items())
    return f"{label} {body}"


def cmd_run(args) -> int:
    document = _load_document(args.scenario, args.overrides, args.seed)
    scenario = parse_scenario(document)
    result, trace = run_mission(scenario)
    write_trace(args.out, trace)
    # Publish metrics recomputed from the written file, so the printed block
    # is exactly reproducible from the trace alone.
    metrics = summarize(read_trace(args.out), scenario)
    print(_metrics_line(f"status={result.status.value}", metrics), file=sys.stderr)
    return _STATUS_EXIT[result.status]


def cmd_batch(args) -> int:
    if args.runs < 1:
        raise ScenarioError(f"--runs must be >= 1, got {args.runs}")
    document = _load_document(args.scenario, args.overrides, None)
    first_seed = args.seed if args.seed is not None else 0
    trace_dir = Path(args.trace_dir) if args.trace_dir else None
    if trace_dir is not None:
        trace_dir.mkdir(parents=True, exist_ok=True)
    runs = []
    for seed in range(first_seed, first_seed + args.runs):
        doc = copy.deepcopy(document)
        doc["seed"] = seed
        scenario = parse_scenario(doc)
        result, trace = run_mission(scenario)
        entry = {"seed": seed, "status": result.status.value}
        entry.update(summarize(trace, scenario))
        runs.append(entry)
        if trace_dir is not None:
            write_trace(trace_dir / f"trace_{seed}.csv", trace)
        print(_metrics_line(f"seed={seed} status={result.status.value}",
                            {k: v for k, v in entry.items()
                             if k not in ("seed", "status")}), file=sys.stderr)
    statuses = [r["status"] for r in runs]
    aggregate = {
        "runs": len(runs),
        "successes": statuses.count("success"),
        "collisions": statuses.count("collision"),
        "timeouts": statuses.count("timeout"),
        "success_rate": statuses.count("success") / len(runs),
    }
    for key in ("duration", "path_length", "max_cross_track", "min_clearance",
                "mean_latency_s"):
        values = np.array([r[key] for r in runs])
        # Nearest-rank percentiles: no interpolation arithmetic, so infinite
        # clearances (empty worlds) pass through instead of turning into NaN.
        aggregate[key] = {"mean": float(values.mean()),
                          "min": float(values.min()),
                          "max": float(values.max()),
                          "p50": float(np.percentile(values, 50,
                                                     method="nearest")),
                          "p95": float(np.percentile(values, 95,
                                                     method="nearest"))}
    report = {"scenario": args.scenario, "first_seed": first_seed,
              "runs": runs, "aggregate": aggregate}
    with open(args.out, "w", encoding="ascii", newline="\n") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(f"batch complete: {aggregate['successes']}/{aggregate['runs']} successes",
          file=sys.stderr)
    return 0


def _parse_ticks(raw: str) -> tuple[int, int]:
    if ".." in raw:
        lo_s, hi_s = raw.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
    else:
        lo = hi = int(raw)
    if lo < 0 or hi < lo:
        raise ScenarioError(f"tick range must satisfy 0 <= first <= last, got {raw!r}")
    return lo, hi


def cmd_dump_frames(args) -> int:
    document = _load_document(args.scenario, args.overrides, args.seed)
    scenario = parse_scenario(document)
    lo, hi = _parse_ticks(args.ticks)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0

    def sink(tick, frame):
        nonlocal written
        if lo <= tick <= hi:
            write_pgm(frame, out_dir / f"frame_{tick:06d}.pgm")
            written += 1

    run_mission(scenario, frame_sink=sink)
    print(f"wrote {written} frames to {out_dir}", file=sys.stderr)
    return 0


def cmd_plot(args) -> int:
    document = _load_document(args.scenario, args.overrides, args.seed)
    scenario = parse_scenario(document)
    trace = read_trace(args.trace)
    if not trace:
        raise ScenarioError(f"trace {args.trace} holds no rows")
    write_plot_svg(args.out, scenario, trace)
    print(f"wrote plot to {args.out}", file=sys.stderr)
    return 0


def _add_common(parser) -> None:
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a scenario value by dotted path "
                             "(e.g. foam.sectors=11); repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="saasim",
                     description="Sense-and-avoid simulation: lidar plus "
                                 "optical flow fused into sector occupancy.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="fly one scenario and write its trace CSV")
    _add_common(p_run)
    p_run.add_argument("--out", required=True, help="trace CSV output path")
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="fly a scenario under consecutive "
                                           "seeds and write a JSON report")
    _add_common(p_batch)
    p_batch.add_argument("--out", required=True, help="report JSON output path")
    p_batch.add_argument("--runs", type=int, default=20,
                         help="number of consecutive seeds (default 20)")
    p_batch.add_argument("--trace-dir", default=None,
                         help="also write per-seed trace CSVs here")
    p_batch.set_defaults(func=cmd_batch)

    p_dump = sub.add_parser("dump-frames", help="write rendered camera frames "
                                                "as binary PGM files")
    _add_common(p_dump)
    p_dump.add_argument("--out", required=True, help="output directory")
    p_dump.add_argument("--ticks", default="0..0",
                        help="tick range to dump, e.g. 0..90 or 12 (default 0..0)")
    p_dump.set_defaults(func=cmd_dump_frames)

    p_plot = sub.add_parser("plot", help="render a trace CSV over its scenario "
                                         "map as SVG")
    _add_common(p_plot)
    p_plot.add_argument("--trace", required=True, help="trace CSV to plot")
    p_plot.add_argument("--out", required=True, help="SVG output path")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    try:
        return args.func(args)
    except (ScenarioError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
