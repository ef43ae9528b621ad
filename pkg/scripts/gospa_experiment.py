"""Monte-Carlo GOSPA comparison on one of the bundled scenarios.

Scenario 1 compares the LNN-driven PHD and MeMBer filters (false-alarm
behaviour); scenario 2 compares LNN-PHD with the constant-velocity PHD
through the maneuver schedule. Thin wrapper around ``lnnrfs mc``.

    python scripts/gospa_experiment.py --scenario 2 --model runs/model/model.json
"""
import argparse
import json
import sys

import numpy as np

from lnnrfs.cli import default_config_path, main as cli_main
from lnnrfs.metrics import read_gospa_csv

DEFAULT_FILTERS = {1: "lnn-phd,lnn-member", 2: "lnn-phd,cv-phd"}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", type=int, choices=(1, 2), default=2)
    ap.add_argument("--model", required=True)
    ap.add_argument("--filters")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    out = args.out or f"runs/scenario{args.scenario}"
    rc = cli_main([
        "mc", default_config_path(f"scenario{args.scenario}.json"),
        "--filters", args.filters or DEFAULT_FILTERS[args.scenario],
        "--trials", str(args.trials), "--jobs", str(args.jobs), "--seed", str(args.seed),
        "--model", args.model,
        "--config", default_config_path(f"tracker_scenario{args.scenario}.json"),
        "--out", out,
    ])
    if rc:
        sys.exit(rc)
    with open(f"{out}/summary.json") as fh:
        summary = json.load(fh)
    window = (40, 80) if args.scenario == 2 else (None, None)
    print(f"time-averaged GOSPA over the full horizon ({args.trials} trials):")
    for name, s in summary.items():
        share = s["false"] / s["total"] if s["total"] else 0.0
        print(f"  {name:11s} total {s['total']:7.2f}  loc {s['loc']:6.2f}  "
              f"missed {s['missed']:6.2f}  false {s['false']:6.2f}  false share {share:.3f}")
    if window[0] is not None:
        for name, cols in read_gospa_csv(f"{out}/gospa.csv").items():
            sel = (cols["t"] >= window[0]) & (cols["t"] <= window[1])
            print(f"  {name:11s} mean GOSPA t={window[0]}-{window[1]} s: "
                  f"{np.mean(cols['mean_total'][sel]):.2f}")


if __name__ == "__main__":
    main()
