"""Per-frame detector latency on full-grid and reduced-grid contact patches.

Usage: python3 scripts/run_latency.py [--frames 1000]
"""

import argparse
import dataclasses
import json

from slipfield.harness.config import HarnessConfig
from slipfield.harness.latency import bench_latency, small_patch_model


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=1000)
    args = ap.parse_args()
    cfg = HarnessConfig()
    cfg = dataclasses.replace(cfg, latency=dataclasses.replace(cfg.latency, frames=args.frames))
    for rows, cols in ((None, None), (15, 20), (10, 10), (6, 6)):
        model = cfg.simulator if rows is None else small_patch_model(cfg.simulator, rows, cols)
        rep = bench_latency(cfg, model)
        print(json.dumps(rep.to_json()))


if __name__ == "__main__":
    main()
