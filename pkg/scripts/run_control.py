"""Closed-loop grip force runs: screwing over several seeds, unscrewing, and a high-friction stall.

Usage: python3 scripts/run_control.py [--out results/control] [--seeds 0 1 2]
"""

import argparse
import dataclasses
import json
from pathlib import Path

from slipfield.harness.config import HarnessConfig
from slipfield.harness.control import run_control_loop


def summarise(name, run):
    first = run.events[0]["frame"] if run.events else None
    print(
        f"{name:>14}: {run.termination:<9} frames {run.n_frames:>4}  slips {len(run.events):>2}  "
        f"first slip {first}  final {run.final_force:g} N"
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/control")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = HarnessConfig()

    runs = {}
    for seed in args.seeds:
        runs[f"screw_seed{seed}"] = run_control_loop(
            "screw", dataclasses.replace(cfg, control=dataclasses.replace(cfg.control, seed=seed))
        )
    runs["unscrew"] = run_control_loop("unscrew", cfg)
    # a grip that never slips: the controller should hold its initial force
    sticky = dataclasses.replace(cfg.control, mu=5.0, screw_load_rate=0.2)
    runs["stall"] = run_control_loop("screw", dataclasses.replace(cfg, control=sticky))

    for name, run in runs.items():
        summarise(name, run)
        (out / f"{name}.json").write_text(json.dumps(run.to_json(), indent=1) + "\n")


if __name__ == "__main__":
    main()
