"""End-to-end acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the pytest terminal summary.
The benchmark suites are run once per session and shared between criteria.
"""

import dataclasses
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from acceptance_log import report
from oracles import brute_force_fit, rotate_about
from slipfield.detector import DetectorConfig, SlipDetector, Verdict
from slipfield.frames import frame_from_markers
from slipfield.geometry import RigidMotion2D, icr, propagate_velocity
from slipfield.harness.benchmark import run_benchmark
from slipfield.harness.config import HarnessConfig
from slipfield.harness.control import run_control_loop
from slipfield.harness.latency import bench_latency, small_patch_model
from slipfield.raster import ContactMask, SensorGeometry, detect_markers
from slipfield.rigidfit import fit_rigid, select_inner
from slipfield.simulator import FORCE_LEVELS, GelModel, benchmark_suite, default_objects, render, simulate
from slipfield.tracking import DisplacementField

CFG = HarnessConfig()
GEOM = SensorGeometry()


@pytest.fixture(scope="session")
def marker_run():
    t0 = time.perf_counter()
    table, outcomes = run_benchmark(CFG)
    return table, outcomes, time.perf_counter() - t0


@pytest.fixture(scope="session")
def raster_run():
    cfg = dataclasses.replace(CFG, benchmark=dataclasses.replace(CFG.benchmark, path="raster"))
    return run_benchmark(cfg)


# 1. velocity propagation properties


def test_1_velocity_property_suite():
    rng = np.random.default_rng(1)
    n_motions, n_points = 1000, 100
    t0 = time.perf_counter()
    worst = {"icr": 0.0, "affine": 0.0, "refpoint": 0.0}
    for _ in range(n_motions):
        w = rng.uniform(-0.2, 0.2)
        if abs(w) < 1e-3:
            w = 1e-3 if w >= 0 else -1e-3
        m = RigidMotion2D(tuple(rng.uniform([0, 0], [40, 30])), tuple(rng.uniform(-1, 1, 2)), w)
        p = rng.uniform([0, 0], [40, 30], (n_points, 2))
        q = rng.uniform([0, 0], [40, 30], (n_points, 2))
        a = rng.uniform(-2, 2, (n_points, 1))
        worst["icr"] = max(worst["icr"], np.abs(propagate_velocity(m, icr(m))).max())
        mixed = propagate_velocity(m, a * p + (1 - a) * q)
        blend = a * propagate_velocity(m, p) + (1 - a) * propagate_velocity(m, q)
        worst["affine"] = max(worst["affine"], np.abs(mixed - blend).max())
        moved = m.about(tuple(rng.uniform([0, 0], [40, 30])))
        worst["refpoint"] = max(worst["refpoint"], np.abs(propagate_velocity(moved, p) - propagate_velocity(m, p)).max())
    elapsed = time.perf_counter() - t0
    ok = worst["icr"] < 1e-9 and worst["affine"] < 1e-12 and worst["refpoint"] < 1e-12 and elapsed < 1.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.2f} s"
    assert report(1, "velocity property suite", ok, detail)


# 2. rigid fit against the brute-force oracle


def _fit(ref, cur):
    n = len(ref)
    f = DisplacementField(np.arange(1, n + 1), ref, cur, np.ones(n, bool))
    return fit_rigid(f, select_inner(f, ContactMask.empty(GEOM), GEOM, erosion_radius=0.0)).motion


def test_2_rigid_fit_matches_oracle():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    noisy_err = clean_err = 0.0
    for i in range(200):
        ref = rng.uniform([8, 6], [32, 24], (50, 2))
        w, v = rng.uniform(-0.05, 0.05), rng.uniform(-0.5, 0.5, 2)
        exact = rotate_about(ref, ref.mean(axis=0), w) + v
        noisy = exact + rng.normal(0, 0.02, ref.shape)
        theta, t = brute_force_fit(ref, noisy)
        m = _fit(ref, noisy)
        noisy_err = max(noisy_err, abs(m.angular_velocity - theta), *np.abs(np.subtract(m.linear_velocity, t)))
        m = _fit(ref, exact)
        clean_err = max(clean_err, abs(m.angular_velocity - w), *np.abs(np.subtract(m.linear_velocity, v)))
    elapsed = time.perf_counter() - t0
    ok = noisy_err < 1e-4 and clean_err < 1e-9 and elapsed < 10.0
    detail = f"noisy vs oracle {noisy_err:.1e}, noiseless {clean_err:.1e}, {elapsed:.1f} s"
    assert report(2, "rigid-fit oracle equivalence", ok, detail)


# 3. rigid motion never reads as slip


def test_3_rigid_motion_null():
    # patches large enough to keep an inner region after erosion; motions whose rim
    # displacement exceeds the match radius are outside the tracker's domain and redrawn
    rng = np.random.default_rng(3)
    rest = GelModel().rest_grid()
    radius_limit = DetectorConfig().max_match_radius
    cases = rejected = false_pos = 0
    while cases < 500:
        centre = rng.uniform([10, 8], [30, 22])
        inside = np.linalg.norm(rest - centre, axis=1) < rng.uniform(6.0, 9.0)
        speed, angle = rng.uniform(0, 0.5), rng.uniform(0, 2 * np.pi)
        motion = RigidMotion2D(tuple(centre), (speed * np.cos(angle), speed * np.sin(angle)), rng.uniform(-0.05, 0.05))
        disp = propagate_velocity(motion, rest[inside])
        if np.linalg.norm(disp, axis=1).max() >= radius_limit:
            rejected += 1
            continue
        cur = rest.copy()
        cur[inside] += disp
        det = SlipDetector(DetectorConfig())
        det.set_reference(frame_from_markers(rest, inside, GEOM))
        false_pos += det.step(frame_from_markers(cur, inside, GEOM, index=1)).verdict != Verdict.NO_SLIP
        cases += 1
    detail = f"{false_pos} non-NoSlip verdicts in {cases} cases ({rejected} draws beyond the match radius redrawn)"
    assert report(3, "rigid-motion null test", false_pos == 0, detail)


# 4. benchmark table


def test_4_benchmark_accuracy(marker_run):
    table, outcomes, elapsed = marker_run
    t = table.total
    ok = t.n_trials == 240 and t.success_rate >= 85.0 and t.fp_rate <= 5.0 and elapsed < 300
    detail = f"{t.n_trials} trials, accuracy {t.success_rate:.2f}%, FP {t.fp_rate:.2f}%, FN {t.fn_rate:.2f}%, {elapsed:.0f} s"
    assert report(4, "synthetic benchmark table", ok, detail)


# 5. weak contact signal


def test_5_weak_signal(marker_run):
    _, outcomes, _ = marker_run
    weak = sorted(default_objects(), key=lambda o: o.texture_strength)[:2]
    lo, hi = FORCE_LEVELS[0], FORCE_LEVELS[-1]
    parts, ok = [], True
    for obj in weak:
        mine = [o for o in outcomes if o.object_name == obj.name]
        at_lo = [o for o in mine if o.force == lo]
        fn_lo = 100.0 * sum(o.classification == "false_negative" for o in at_lo) / len(at_lo)

        def detection(force):
            slips = [o for o in mine if o.force == force and o.ground_truth == "slip"]
            return 100.0 * sum(o.detected == "slip" for o in slips) / len(slips)

        d_lo, d_hi = detection(lo), detection(hi)
        ok &= fn_lo >= 30.0 and d_hi > d_lo
        parts.append(f"{obj.name} FN@{lo:g}N {fn_lo:.0f}%, detection {d_lo:.0f}% -> {d_hi:.0f}% @{hi:g}N")
    assert report(5, "weak-signal reproduction", ok, "; ".join(parts))


# 6. peripheral-first


def test_6_peripheral_first(marker_run):
    _, outcomes, _ = marker_run
    dome = {o.name for o in default_objects() if o.profile == "dome"}
    firsts = [
        o for o in outcomes
        if o.object_name in dome and o.ground_truth == "slip" and o.first_slip_boundary is not None
    ]
    hits = sum(o.first_slip_boundary < o.contact_boundary for o in firsts)
    frac = hits / len(firsts)
    assert report(6, "peripheral-first", frac >= 0.9, f"{hits}/{len(firsts)} detected dome slip trials ({100 * frac:.1f}%)")


# 7. grip force control


def test_7_control_loop():
    parts, ok = [], True
    for seed in (0, 1, 2):
        cfg = dataclasses.replace(CFG, control=dataclasses.replace(CFG.control, seed=seed))
        run = run_control_loop("screw", cfg)
        steps = set(np.round(np.diff(run.force_trace), 9))
        good = run.force_trace[0] == 10.0 and steps <= {0.0, 10.0} and run.final_force == 60.0
        ok &= good
        parts.append(f"screw seed {seed}: {len(run.events)} slips, final {run.final_force:g} N")
    run = run_control_loop("unscrew", CFG)
    first = run.events[0]["frame"] if run.events else None
    good = first is not None and first < 0.1 * run.n_frames and run.final_force < 60.0
    ok &= good
    parts.append(f"unscrew: first slip frame {first} of {run.n_frames}, final {run.final_force:g} N")
    assert report(7, "grip force control", ok, "; ".join(parts))


# 8. latency


def test_8_latency():
    full = bench_latency(CFG)
    small = bench_latency(CFG, small_patch_model(CFG.simulator))
    ok = full.n_markers == 475 and full.median_ms < 41.6 and small.median_ms < full.median_ms
    detail = f"median {full.median_ms:.2f} ms at {full.n_markers} markers, {small.median_ms:.2f} ms at {small.n_markers}"
    assert report(8, "latency budget", ok, detail)


# 9. raster round trip


def test_9_raster_round_trip(marker_run, raster_run):
    model = CFG.simulator
    errs = []
    for trial in benchmark_suite(CFG.benchmark.seed, model)[::12]:
        gt = simulate(model, trial.object, trial.script, trial.seed)
        for f in (gt[0], gt[-1]):
            found = detect_markers(render(f, model, trial.object, trial.seed), model.geometry)
            got = model.geometry.mm_to_px(np.array([m.position for m in found]).reshape(-1, 2))
            d, _ = cKDTree(model.geometry.mm_to_px(f.positions)).query(got)
            errs.append(d)
    rms = float(np.sqrt(np.mean(np.concatenate(errs) ** 2)))
    _, by_markers, _ = marker_run
    _, by_raster = raster_run
    agree = total = 0
    for a, b in zip(by_markers, by_raster):
        assert a.trial_id == b.trial_id
        agree += sum(x == y for x, y in zip(a.verdicts, b.verdicts))
        total += max(len(a.verdicts), len(b.verdicts))
    frac = agree / total
    ok = rms < 0.5 and frac >= 0.95
    assert report(9, "raster round trip", ok, f"centroid RMS {rms:.3f} px, verdict agreement {100 * frac:.2f}% of {total} frames")
