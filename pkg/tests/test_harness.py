import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msdis.calibration import CalibrationResult
from msdis.config import load_config
from msdis.harness import (CSV_HEADER, ExperimentSpec, MetricsRow, PruningViolation, aggregate, associate,
                           capture_score_maps, check_pruning, run_sweep, run_trial, scene_targets,
                           write_metrics_csv)
from msdis.scene import realized_snr

from conftest import Q1, Q2

CAL = CalibrationResult(eta=3.6, target_pfa=0.05, achieved_pfa=0.05, pfa_halfwidth=0.01, trials=100, seed=0,
                        mf_threshold=14.4)


@pytest.fixture(scope="module")
def cfg():
    return load_config("configs/desk.yaml")


@pytest.fixture(scope="module")
def spec(cfg, desk_model):
    return ExperimentSpec.from_config(cfg, CAL, "msdis", model=desk_model)


def test_association_rules():
    truths = [Q1, Q2]
    assert associate([], truths, 30.0) == {}
    m = associate([(Q1, 5.0)], truths, 30.0)
    assert m == {0: (0, 0.0)}
    # two reports near one truth: the higher-scoring one wins, the other finds nothing in range
    m = associate([(Q1 + (10.0, 0), 2.0), (Q1 + (3.0, 4.0), 9.0)], truths, 30.0)
    assert m == {0: (1, 5.0)}
    assert associate([(Q1 + (40.0, 0), 9.0)], truths, 30.0) == {}
    # a report between two truths takes the nearest; the next report falls back to the other
    mid = (Q1 + Q2) / 2
    m = associate([(mid + (0, -1.0), 3.0), (mid + (0, 1.0), 1.0)], [mid + (0, -10.0), mid + (0, 10.0)], 30.0)
    assert m[0][0] == 0 and m[1][0] == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 10)), max_size=6))
def test_association_is_one_to_one(raw):
    truths = np.array([[0.0, 0.0], [20.0, 0.0], [0.0, 25.0]])
    reports = [((x, y), s) for x, y, s in raw]
    m = associate(reports, truths, 30.0)
    used = [i for i, _ in m.values()]
    assert len(used) == len(set(used))
    for k, (i, d) in m.items():
        assert d <= 30.0
        assert d == pytest.approx(np.linalg.norm(truths[k] - reports[i][0]))


def test_pruning_check(desk_model):
    check_pruning(desk_model, [Q1, Q2])
    with pytest.raises(PruningViolation):
        check_pruning(desk_model, [Q1, Q1 + (5.0, 0)])


def test_scene_targets_keep_snr_ratio(spec):
    ts = scene_targets(spec, 3, 9.0)
    m = spec.model
    assert realized_snr(m.layout, m.bank, m.config, m.noise, m.window, ts[0]) == pytest.approx(9.0, abs=1e-9)
    assert ts[1].snr_db - ts[0].snr_db == pytest.approx(10 * np.log10(4))
    np.testing.assert_array_equal(ts[0].amplitudes, scene_targets(spec, 3, 9.0)[0].amplitudes)
    # the gain phases do not depend on SNR: only the common scale changes
    np.testing.assert_allclose(np.angle(scene_targets(spec, 3, 4.0)[0].amplitudes), np.angle(ts[0].amplitudes))


def test_trial_records(spec):
    rec = run_trial(spec, 0, 25.0)
    assert rec["detected"] and rec["error_m"] == 0.0
    assert rec["n_reported"] >= 1
    low = run_trial(spec, 0, -30.0)
    assert low["trial"] == 0 and low["snr_db"] == -30.0


def test_aggregate_order_independent():
    recs = [{"trial": j, "detected": j % 3 != 0, "error_m": float(j) if j % 3 else None, "n_reported": j % 2,
             "runtime_s": 0.1} for j in range(30)]
    a = aggregate(5.0, recs)
    shuffled = recs[:]
    random.Random(1).shuffle(shuffled)
    b = aggregate(5.0, shuffled)
    assert a.csv_fields() == b.csv_fields()
    assert a.pd == pytest.approx(20 / 30)
    hits = [float(j) for j in range(30) if j % 3]
    assert a.rmse_m == pytest.approx(np.sqrt(np.mean(np.square(hits))))
    assert a.n_associated == 20
    one = aggregate(0.0, recs[:1])
    assert one.pd in (0.0, 1.0) and np.isnan(one.rmse_m)


def test_sweep_deterministic_and_threads(spec, tmp_path):
    spec.snr_sweep, spec.trials = [20.0], 3
    rows1, rec1 = run_sweep(spec)
    rows2, rec2 = run_sweep(spec, threads=2)
    assert [r.csv_fields() for r in rows1] == [r.csv_fields() for r in rows2]
    assert [r["reports"] for r in rec1] == [r["reports"] for r in rec2]
    write_metrics_csv(tmp_path / "a.csv", rows1)
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 2
    assert rows1[0].pd == 1.0 and rows1[0].rmse_m == 0.0


def test_disjoint_seed_ranges_agree(spec):
    spec.snr_sweep, spec.trials = [7.0], 25
    a, _ = run_sweep(spec, trial_offset=0)
    b, _ = run_sweep(spec, trial_offset=1000)
    se = np.sqrt(a[0].pd * (1 - a[0].pd) / 25 + b[0].pd * (1 - b[0].pd) / 25)
    assert abs(a[0].pd - b[0].pd) <= 3 * max(se, 1 / 25)


def test_spec_validation(cfg, desk_model):
    with pytest.raises(ValueError):
        ExperimentSpec(cfg, CAL, "nope", model=desk_model)
    with pytest.raises(ValueError):
        ExperimentSpec(cfg, CAL, "msdis", trials=0, model=desk_model)
    with pytest.raises(ValueError):
        ExperimentSpec(cfg, CAL, "msdis", association_radius=-1.0, model=desk_model)
    s = ExperimentSpec(cfg, CAL, "msdis", model=desk_model)
    assert s.association_radius == pytest.approx(299792458.0 / 10e6)


def test_score_map_capture(spec):
    res = capture_score_maps(spec, 0, 13.0)
    ms = res["detectors"]["msdis"]
    assert len(res["grid_x"]) == 15 and len(res["grid_y"]) == 25
    first = ms["maps"][0]
    assert first.shape == (25, 15)
    iy, ix = np.unravel_index(np.nanargmax(first), first.shape)
    assert [res["grid_x"][ix], res["grid_y"][iy]] == ms["estimates"][0]
    if ms["termination"] == "no-detection":
        assert np.nanmax(ms["maps"][-1]) <= 0
    # the score around the first detection drops once it is cancelled
    x1 = np.array(ms["estimates"][0])
    gx, gy = np.meshgrid(res["grid_x"], res["grid_y"])
    ball = np.hypot(gx - x1[0], gy - x1[1]) <= spec.model.resolution
    if len(ms["maps"]) > 1:
        assert np.nanmax(np.where(ball, ms["maps"][1], np.nan), initial=-np.inf) < np.nanmax(first[ball])
    assert "jdl-sic" in res["detectors"]


def test_metrics_row_nan_rmse():
    assert MetricsRow(1.0, 0.0, 0.0, float("nan"), 0, 0.0).csv_fields()[3] == "nan"
