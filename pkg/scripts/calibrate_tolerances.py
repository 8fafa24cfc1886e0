"""Calibrate CAT(0) check tolerances per zoo family and write the fixture.

Runs the check suite with unit multipliers over a block of seeds, takes the
worst observed excess per check (in units of scale_h), and stores
``max(FLOOR, SAFETY * observed)`` rounded up to a half step.
"""

import argparse
import json
import math
import time
from pathlib import Path

from cat0probe import space_zoo
from cat0probe.cat0_checks import DEFAULT_EXTENT, cat0_suite

PARAMS = {
    "euclidean_plane": {"halfwidth": 30.0, "h": 1.0},
    "hyperbolic_plane": {"max_r": 5.0, "h": 0.2},
    "regular_tree": {"degree": 3, "depth": 8},
    "plane_wedge": {"halfwidth": 30.0, "h": 1.0},
    "strip_glued_hyperbolic": {"max_r": 5.0, "strip_halfwidth": 5.0, "h": 0.2},
    "tree_cross_line": {"degree": 3, "depth": 7, "halfwidth": 10.0, "h": 1.0},
}
SAMPLES = {"triangles": 40, "interior": 7, "geodesic_pairs": 30, "t_samples": 11, "projection_pairs": 200}
CHECKS = ("comparison", "convexity", "projection")
SAFETY = 1.5
FLOOR = 2.0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=1000)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1] / "src/cat0probe/data/tolerance_profiles.json")
    args = ap.parse_args(argv)

    unit = {k: 1.0 for k in CHECKS}
    profiles, observed = {}, {}
    for family, params in PARAMS.items():
        t0 = time.time()
        entry = space_zoo.build(family, **params)
        h = entry.graph.scale_h
        worst = dict.fromkeys(CHECKS, -math.inf)
        for seed in range(args.first_seed, args.first_seed + args.seeds):
            for name, rep in zip(CHECKS, cat0_suite(entry.graph, entry.base_path, unit, seed, SAMPLES)):
                worst[name] = max(worst[name], rep.worst_violation / h)
        observed[family] = {k: round(v, 6) for k, v in worst.items()}
        profiles[family] = {k: max(FLOOR, math.ceil(2 * SAFETY * max(v, 0.0)) / 2) for k, v in worst.items()}
        profiles[family]["extent"] = DEFAULT_EXTENT
        print(f"{family:24s} observed {observed[family]} -> {profiles[family]} ({time.time() - t0:.1f}s)")

    doc = {
        "units": "multiples of scale_h",
        "rule": f"max({FLOOR}, {SAFETY} * worst observed) rounded up to 0.5",
        "calibration": {"params": PARAMS, "samples": SAMPLES,
                        "seeds": [args.first_seed, args.first_seed + args.seeds]},
        "observed": observed,
        "profiles": profiles,
    }
    args.out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
