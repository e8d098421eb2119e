"""Command-line harness: simulate, detect, bench, control-sim, report.

Every subcommand accepts ``--config`` (INI file) and ``--seed``. With
``--check`` the exit code is 1 when the subcommand's acceptance gate fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from slipfield.harness.benchmark import outcomes_to_jsonl, run_benchmark, run_detector
from slipfield.harness.config import HarnessConfig, load_config
from slipfield.harness.control import run_control_loop
from slipfield.harness.ingest import ingest, write_trial
from slipfield.harness.latency import bench_latency, small_patch_model
from slipfield.simulator import benchmark_suite, simulate

ACCURACY_GATE = 0.85
FP_GATE = 0.05


def _config(args) -> HarnessConfig:
    cfg = load_config(args.config) if args.config else HarnessConfig()
    if args.seed is not None:
        r = dataclasses.replace
        cfg = r(
            cfg,
            benchmark=r(cfg.benchmark, seed=args.seed),
            control=r(cfg.control, seed=args.seed),
            latency=r(cfg.latency, seed=args.seed),
        )
    return cfg


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def cmd_simulate(args, cfg: HarnessConfig) -> int:
    trials = benchmark_suite(cfg.benchmark.seed, cfg.simulator)
    if args.object:
        trials = [t for t in trials if t.object.name == args.object]
        if not trials:
            raise SystemExit(f"no trials for object {args.object!r}")
    if args.limit:
        trials = trials[: args.limit]
    for t in trials:
        frames = simulate(cfg.simulator, t.object, t.script, t.seed)
        write_trial(
            Path(args.out) / t.trial_id, frames, cfg.simulator, t.object, t.script,
            trial_id=t.trial_id, seed=t.seed, render_images=args.render,
        )
    print(f"wrote {len(trials)} trials to {args.out}", file=sys.stderr)
    return 0


def cmd_detect(args, cfg: HarnessConfig) -> int:
    frames = ingest(args.trial, args.format, raster_cfg=cfg.raster)
    decisions = run_detector(frames, cfg.detector)
    _write(args.out, "".join(json.dumps(d.to_record()) + "\n" for d in decisions))
    return 0


def cmd_bench(args, cfg: HarnessConfig) -> int:
    b = cfg.benchmark
    cfg = dataclasses.replace(
        cfg, benchmark=dataclasses.replace(b, path=args.path or b.path, jobs=args.jobs or b.jobs)
    )
    table, outcomes = run_benchmark(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(table.to_csv())
    (out / "metrics.json").write_text(json.dumps(table.to_json(), indent=1, sort_keys=True) + "\n")
    (out / "outcomes.jsonl").write_text(outcomes_to_jsonl(outcomes))
    sys.stdout.write(table.to_csv())
    ok = table.total.success_rate >= ACCURACY_GATE and table.total.fp_rate <= FP_GATE
    return 0 if ok or not args.check else 1


def control_gate(run) -> bool:
    steps = {b - a for a, b in zip(run.force_trace, run.force_trace[1:])}
    nondecreasing = steps <= {0.0, 10.0}
    if run.scenario == "screw":
        return run.force_trace[0] == 10.0 and nondecreasing and run.final_force == 60.0
    first = run.events[0]["frame"] if run.events else None
    return first is not None and first < 0.1 * run.n_frames and run.final_force < 60.0


def cmd_control(args, cfg: HarnessConfig) -> int:
    run = run_control_loop(args.scenario, cfg)
    _write(args.out, json.dumps(run.to_json(), indent=1) + "\n")
    print(f"{run.scenario}: {run.termination} after {run.n_frames} frames at {run.final_force:g} N", file=sys.stderr)
    return 0 if control_gate(run) or not args.check else 1


def cmd_report(args, cfg: HarnessConfig) -> int:
    full = bench_latency(cfg)
    small = bench_latency(cfg, small_patch_model(cfg.simulator))
    report = {"full": full.to_json(), "small": small.to_json()}
    if args.metrics:
        report["benchmark"] = json.loads(Path(args.metrics).read_text())["total"]
    _write(args.out, json.dumps(report, indent=1) + "\n")
    ok = full.within_budget and small.median_ms < full.median_ms
    return 0 if ok or not args.check else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file overriding defaults")
    common.add_argument("--seed", type=int, help="seed for simulation, control and latency runs")
    common.add_argument("--check", action="store_true", help="exit nonzero if the acceptance gate fails")

    ap = argparse.ArgumentParser(prog="slipfield", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="export benchmark trials as CSV (and PGM) directories")
    p.add_argument("--out", required=True)
    p.add_argument("--object", help="only this object")
    p.add_argument("--limit", type=int, help="at most this many trials")
    p.add_argument("--render", action="store_true", help="also write rendered PGM frames")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", parents=[common], help="run the detector over one trial directory")
    p.add_argument("trial")
    p.add_argument("--format", choices=("marker_csv", "pgm_sequence"), default="marker_csv")
    p.add_argument("--out", help="JSON-lines decision log (default stdout)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", parents=[common], help="detection-accuracy benchmark over the synthetic suite")
    p.add_argument("--out", default="results/bench")
    p.add_argument("--path", choices=("markers", "raster"))
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("control-sim", parents=[common], help="closed-loop grip-force simulation")
    p.add_argument("--scenario", choices=("screw", "unscrew"), default="screw")
    p.add_argument("--out", help="JSON force trace (default stdout)")
    p.set_defaults(func=cmd_control)

    p = sub.add_parser("report", parents=[common], help="latency report, optionally with benchmark totals")
    p.add_argument("--metrics", help="metrics.json from a bench run")
    p.add_argument("--out", help="JSON report (default stdout)")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args, _config(args))


if __name__ == "__main__":
    raise SystemExit(main())
