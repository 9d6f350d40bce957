#!/usr/bin/env python3
"""Sweep the random-forest course over many seeds and report success rates.

Each seed regenerates the forest (30 pillars over 100x30 m, radii
0.3-0.8 m) and flies the 80 m course at 3 m/s. Prints one line per seed
and aggregate statistics at the end.
"""

import argparse
import json
import time
from pathlib import Path

from saasim.mission import MissionStatus, run_mission
from saasim.world import parse_scenario

REPO_ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario",
                        default=REPO_ROOT / "scenarios" / "forest.json",
                        help="forest scenario file (seed field is swept)")
    parser.add_argument("--seeds", type=int, default=20,
                        help="number of seeds, starting at --first-seed")
    parser.add_argument("--first-seed", type=int, default=0)
    args = parser.parse_args()

    document = json.loads(Path(args.scenario).read_text())
    outcomes = []
    started = time.perf_counter()
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        document["seed"] = seed
        result, _ = run_mission(parse_scenario(document))
        outcomes.append((seed, result))
        print(f"seed {seed:3d}  {result.status.value:9s} "
              f"duration={result.duration:6.2f}s "
              f"clearance={result.min_clearance:6.3f}m "
              f"deviation={result.max_cross_track:5.2f}m")
    elapsed = time.perf_counter() - started

    successes = sum(1 for _, r in outcomes if r.status is MissionStatus.SUCCESS)
    rate = successes / len(outcomes)
    print(f"\n{successes}/{len(outcomes)} succeeded ({rate:.0%}) "
          f"in {elapsed:.0f} s wall time")


if __name__ == "__main__":
    main()
