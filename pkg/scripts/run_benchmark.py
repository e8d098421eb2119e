"""Run the 240-trial detection benchmark on both input paths and compare them.

Usage: python3 scripts/run_benchmark.py [--out results/bench] [--skip-raster]
"""

import argparse
import dataclasses
import json
import time
from pathlib import Path

from slipfield.harness.benchmark import outcomes_to_jsonl, run_benchmark
from slipfield.harness.config import HarnessConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/bench")
    ap.add_argument("--skip-raster", action="store_true", help="only run the marker-CSV path")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = HarnessConfig()

    runs = {}
    for path in ("markers",) if args.skip_raster else ("markers", "raster"):
        t0 = time.perf_counter()
        table, outcomes = run_benchmark(dataclasses.replace(cfg, benchmark=dataclasses.replace(cfg.benchmark, path=path)))
        print(f"{path}: {time.perf_counter() - t0:.0f} s")
        print(table.to_csv())
        (out / f"metrics_{path}.csv").write_text(table.to_csv())
        (out / f"metrics_{path}.json").write_text(json.dumps(table.to_json(), indent=1, sort_keys=True) + "\n")
        (out / f"outcomes_{path}.jsonl").write_text(outcomes_to_jsonl(outcomes))
        runs[path] = outcomes

    if "raster" in runs:
        agree = total = 0
        for a, b in zip(runs["markers"], runs["raster"]):
            agree += sum(x == y for x, y in zip(a.verdicts, b.verdicts))
            total += max(len(a.verdicts), len(b.verdicts))
        print(f"per-frame verdict agreement, raster vs markers: {100 * agree / total:.2f}% of {total} frames")


if __name__ == "__main__":
    main()
