"""Acceptance suite: one test per criterion, reported as PASS/FAIL lines.

Run with ``pytest tests/test_acceptance.py``; the summary section at the end
of the run lists every criterion. Several criteria reuse the property checks of
the module tests, called here directly so that they run at the same tolerance.
"""
import itertools
import json
import math
import time

import numpy as np
import pytest
import test_geometry as tgeo
import test_io_mot as tio
import test_metrics as tmet
from oracles import oracle_predict, oracle_update
from test_kalman import confidence_run, random_measurement, random_state
from test_tracker import FIXTURE_SPECS

from hybridsort import io_mot
from hybridsort import geometry as g
from hybridsort import kalman as kf
from hybridsort.ablation import ablate, make_suite
from hybridsort.assignment import solve
from hybridsort.cli import main
from hybridsort.config import TrackerConfig
from hybridsort.geometry import Box
from hybridsort.simulator import ScenarioSpec, generate
from hybridsort.tracker import Detection, make_tracker, run_sequence

criterion = pytest.mark.criterion

# Regression values from the first verified run of the ablation protocol.
PINNED_IDSW = {
    "tcm_on": 30,
    "tcm_off": 169,
    "iou": 98,
    "hmiou": 76,
    "wmiou": 427,
}


@criterion(1, "assignment optimality vs exhaustive permutations (1000 matrices, < 10 s)")
def test_c1_assignment_optimality():
    rng = np.random.default_rng(1)
    mats = []
    for i in range(1000):
        n, m = (int(x) for x in rng.integers(1, 8, size=2))
        if i % 4 == 0:
            mats.append(rng.integers(0, 4, size=(n, m)).astype(float))
        else:
            mats.append(rng.uniform(-100, 100, size=(n, m)))
    t0 = time.perf_counter()
    results = [solve(c) for c in mats]
    elapsed = time.perf_counter() - t0
    for cost, res in zip(mats, results):
        n, m = cost.shape
        k = min(n, m)
        rows = [r for r, _ in res.matches]
        assert len(res.matches) == k and len(set(rows)) == k
        assert len({c for _, c in res.matches}) == k
        # exact sums on both sides, so equal optima compare equal bit for bit
        if n <= m:
            best = min(math.fsum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(m), n))
        else:
            best = min(math.fsum(cost[p[j], j] for j in range(m)) for p in itertools.permutations(range(n), m))
        assert math.fsum(cost[r, c] for r, c in res.matches) == best
    assert elapsed < 10.0, f"solver took {elapsed:.2f}s"


@criterion(2, "Kalman matches dense oracle to 1e-9 over 1e4 steps; symmetry < 1e-9")
def test_c2_kalman_oracle():
    cfg = kf.NoiseConfig()
    tol = dict(rtol=1e-9, atol=1e-9)
    Q, R = cfg.Q.tolist(), cfg.R.tolist()
    rng = np.random.default_rng(99)
    steps = 0
    while steps < 10_000:
        state = random_state(rng)
        for _ in range(50):
            pred = kf.predict(state, cfg)
            ox, oP = oracle_predict(state.mean.tolist(), state.covariance.tolist(), Q)
            np.testing.assert_allclose(pred.mean, ox, **tol)
            np.testing.assert_allclose(pred.covariance, oP, **tol)
            z = random_measurement(rng, pred)
            post = kf.update(pred, z, cfg)
            ux, uP = oracle_update(pred.mean.tolist(), pred.covariance.tolist(), z.as_array().tolist(), R)
            np.testing.assert_allclose(post.mean, ux, **tol)
            np.testing.assert_allclose(post.covariance, uP, **tol)
            state = post
            steps += 2
    for chain in range(3):
        box = Box(50, 60, 90, 160)
        state = kf.init_from_detection(Detection(box, 0.9), cfg)
        for t in range(1000):
            state = kf.predict(state, cfg)
            if rng.random() < 0.8:
                box = box.translate(*rng.normal(0, 2, 2))
                state = kf.update(state, kf.box_to_measurement(box, float(rng.uniform(0.2, 1))), cfg)
            P = state.covariance
            assert np.abs(P - P.T).max() < 1e-9


@criterion(3, "cue worked examples to 1e-9 and property suites at 1e5 samples")
def test_c3_cue_formulas():
    a = Box(0, 0, 10, 10)
    assert abs(g.hiou(a, Box(0, 5, 10, 15)) - 5 / 15) <= 1e-9
    assert abs(g.iou(a, Box(5, 5, 15, 15)) - 25 / 175) <= 1e-9
    assert abs(g.hmiou(a, Box(5, 5, 15, 15)) - 0.047619) <= 1e-6
    assert abs(g.hmiou(a, Box(5, 5, 15, 15)) - 1 / 21) <= 1e-9
    assert abs(g.wmiou(a, Box(5, 5, 15, 15)) - 1 / 21) <= 1e-9
    assert abs(g.linear_confidence_prediction(0.8, 0.9) - 0.7) <= 1e-9
    assert abs(g.confidence_cost(0.9, 0.6) - 0.3) <= 1e-9
    hist = tgeo._line_history((2.0, 0.0))
    last = hist[-1][1]
    assert abs(g.rocm_cost(hist, last.translate(-2.0, 0.0)) - 3 * math.pi) <= 1e-9
    assert abs(g.rocm_cost(hist, last.translate(2.0, 0.0))) <= 1e-9
    # bounds, symmetry, identity, clamps, wrap-around, translation invariance
    tgeo.test_similarity_bounds_symmetry_identity_disjoint()
    tgeo.test_hmiou_bounded_by_factors()
    tgeo.test_axis_ious_translation_invariance()
    tgeo.test_linear_prediction_exact_on_arithmetic_sequences()
    tgeo.test_angle_difference_periodic_and_bounded()
    tgeo.test_velocity_direction_matches_quadrant_oracle()
    tgeo.test_rocm_translation_invariance_vectorised()


@criterion(4, "Kalman lags linear prediction on a step change, beats it on a constant")
def test_c4_lag_ordering():
    seq = [0.9] * 30 + [0.3] * 10
    run = confidence_run(seq)
    # first frame at which both estimators have seen the change
    kalman_post = run[30][1]
    linear_next = run[31][2]
    assert abs(kalman_post - 0.3) > abs(linear_next - 0.3)
    assert abs(run[31][0] - 0.3) > abs(linear_next - 0.3)
    rng = np.random.default_rng(3)
    flat = list(np.clip(0.8 + rng.normal(0, 0.02, 200), 0, 1))
    run = confidence_run(flat)
    k_err = np.mean([abs(p - c) for (p, _, _), c in zip(run[20:], flat[20:])])
    l_err = np.mean([abs(l - c) for (_, _, l), c in zip(run[20:], flat[20:])])
    assert k_err < l_err


@pytest.mark.slow
@criterion(5, "ablation direction: TCM, HMIoU reduce IDSW; WMIoU increases it (< 2 min)")
def test_c5_ablation_direction():
    t0 = time.perf_counter()
    crossing = make_suite("crossing_weave", 200, seed=0)
    depth = make_suite("depth", 200, seed=0)
    full = TrackerConfig()
    tcm = dict(ablate([("on", full), ("off", full.with_toggle("tcm", False))], crossing))
    base = TrackerConfig(tracker="byte_two_stage").all_off()
    sim = dict(ablate([(s, base.replace(similarity=s)) for s in ("iou", "hmiou", "wmiou")], depth))
    elapsed = time.perf_counter() - t0
    got = {
        "tcm_on": tcm["on"].idsw, "tcm_off": tcm["off"].idsw,
        "iou": sim["iou"].idsw, "hmiou": sim["hmiou"].idsw, "wmiou": sim["wmiou"].idsw,
    }
    print(f"\nablation IDSW {got} in {elapsed:.1f}s")
    assert got["tcm_on"] < got["tcm_off"]
    assert got["hmiou"] < got["iou"]
    assert got["wmiou"] > got["iou"]
    assert elapsed < 120.0
    assert got == PINNED_IDSW


@criterion(6, "all-off hybrid output identical to the sort baseline on every fixture")
def test_c6_toggle_neutrality():
    for spec in FIXTURE_SPECS:
        _, dets = generate(spec)
        outs = []
        for cfg in (TrackerConfig().all_off(), TrackerConfig(tracker="sort").all_off()):
            out, _ = run_sequence(make_tracker(cfg), dets, spec.frame_count)
            outs.append([(f, o.track_id, o.box) for f, o in out])
        assert outs[0] == outs[1], f"diverged on seed {spec.seed}"
        assert outs[0]


@criterion(7, "metrics: perfect tracking, IDF1 bijection oracle, label permutation invariance")
def test_c7_metrics():
    tmet.test_perfect_tracking()
    for seed in range(12):
        tmet.test_idf1_matches_bijection_oracle_on_scenes(seed)
    tmet.test_label_permutation_invariance()
    tmet.test_mid_sequence_swap()


@criterion(8, "format round trips, golden parser corpora, bit-identical reruns")
def test_c8_format_fidelity(tmp_path, tmp_path_factory):
    tio.test_result_round_trip_within_precision(tmp_path_factory)
    tio.test_detection_round_trip(tmp_path_factory)
    for name in tio.GOLDEN:
        tio.test_good_corpus(name)
    for name in tio.EXPECTED_ERRORS:
        tio.test_bad_corpus(name)
    tio.test_every_bad_file_has_an_expectation()
    out = tmp_path / "r.txt"
    from hybridsort.tracker import TrackOutput
    io_mot.write_results(out, [(1, TrackOutput(1, Box(0, 0, 10, 20), 0.9))])
    assert out.read_text() == "1,1,0.00,0.00,10.00,20.00,0.9000,-1,-1,-1\n"
    io_mot.write_results(out, [])
    assert out.read_text() == ""

    seq = tmp_path / "seq"
    assert main(["simulate", "--out", str(seq), "--seed", "3", "--objects", "5"]) == 0
    runs = []
    for k in range(2):
        assert main(["track", "--dets", str(seq / "det.txt"), "--out", str(tmp_path / f"run{k}")]) == 0
        runs.append((tmp_path / f"run{k}" / "results.txt").read_bytes())
    assert runs[0] == runs[1] and runs[0]
    dumps = []
    for jobs in (1, 2):
        dest = tmp_path / f"abl{jobs}.json"
        assert main(["ablate", "--suite", "crossing", "--scenes", "4", "--grid", "tcm", "--jobs", str(jobs), "--out", str(dest)]) == 0
        dumps.append(dest.read_bytes())
    assert dumps[0] == dumps[1]
    assert json.loads(dumps[0])["rows"]


@pytest.mark.slow
@criterion(9, "TCM+HMIoU association overhead < 25% on 1000 frames x 20 objects")
def test_c9_overhead():
    spec = ScenarioSpec(n_objects=20, motions=("crossing", "weave", "linear"), frame_count=1000,
                        jitter_std=2.0, dropout_prob=0.2, seed=0)
    _, dets = generate(spec)
    off = TrackerConfig().all_off()
    on = off.with_toggle("tcm", True).with_toggle("hmiou", True)
    times = {"off": [], "on": []}
    # interleaved repeats; the minimum is the least disturbed measurement
    for _ in range(5):
        for name, cfg in (("off", off), ("on", on)):
            _, seconds = run_sequence(make_tracker(cfg), dets, spec.frame_count)
            times[name].append(seconds)
    overhead = min(times["on"]) / min(times["off"]) - 1.0
    print(f"\nassociation overhead {overhead:+.1%} (off {min(times['off']):.2f}s, on {min(times['on']):.2f}s)")
    assert overhead < 0.25
