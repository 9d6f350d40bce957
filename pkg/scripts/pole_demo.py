#!/usr/bin/env python3
"""Fly the single-pole scenario and save its trace and map plot.

Runs the stock pole scenario (60 m course, one 0.5 m pole at the midpoint,
4.5 m/s cruise), prints the outcome summary, and writes the per-tick trace
CSV plus an SVG of the flown path over the map.
"""

import argparse
from pathlib import Path

from saasim.mission import run_mission, write_trace
from saasim.plotting import write_plot_svg
from saasim.world import load_scenario

REPO_ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario",
                        default=REPO_ROOT / "scenarios" / "pole.json",
                        help="scenario file (default: the stock pole course)")
    parser.add_argument("--out-dir", default="out", help="output directory")
    args = parser.parse_args()

    scenario = load_scenario(args.scenario)
    result, rows = run_mission(scenario)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "pole_trace.csv"
    plot_path = out_dir / "pole_plot.svg"
    write_trace(trace_path, rows)
    write_plot_svg(plot_path, scenario, rows)

    print(f"status         {result.status.value}")
    print(f"duration       {result.duration:.2f} s over {result.ticks} ticks")
    print(f"path length    {result.path_length:.2f} m")
    print(f"min clearance  {result.min_clearance:.3f} m "
          f"(vehicle radius {scenario.quad_radius} m)")
    print(f"max deviation  {result.max_cross_track:.2f} m off the direct line")
    print(f"mean latency   {result.mean_latency_s * 1e3:.1f} ms "
          f"(p95 {result.p95_latency_s * 1e3:.1f} ms)")
    print(f"trace -> {trace_path}")
    print(f"plot  -> {plot_path}")


if __name__ == "__main__":
    main()
