import json

import numpy as np
import pytest

from msdis.calibration import (CALIBRATION_STREAM, CalibrationResult, binomial_halfwidth, calibrate_eta, empirical_pfa,
                               first_iteration_energies, noise_trial)
from msdis.detector import DetectionState, GicParams, detect_iteration
from msdis.scene import MeasurementSet


@pytest.fixture(scope="module")
def batch(small_model):
    return first_iteration_energies(small_model, 7, CALIBRATION_STREAM, 300)


def test_energy_batch_matches_detector(small_model, batch):
    E, rank = batch
    m = small_model
    assert np.all(rank == m.N * m.P)
    eta = 3.0
    for j in (0, 5, 17):
        r = noise_trial(m, 7, CALIBRATION_STREAM, j)
        meas = MeasurementSet(r, m.noise, m.window)  # white unit noise: whitening is the identity
        acc, _, score = detect_iteration(m, DetectionState.initial(m), GicParams(eta=eta), meas)
        assert score == pytest.approx(np.max(E[j] - eta * rank))
        assert acc == (np.max(E[j] - eta * rank) > 0)


def test_pfa_limits_and_monotone(batch):
    E, rank = batch
    assert empirical_pfa(E, rank, 0.0) == 1.0
    assert empirical_pfa(E, rank, 1e12) == 0.0
    etas = np.linspace(0, 8, 60)
    p = [empirical_pfa(E, rank, e) for e in etas]
    assert all(a >= b for a, b in zip(p, p[1:]))


def test_quantile_is_exact_on_the_calibration_batch(small_model, batch):
    E, rank = batch
    res = calibrate_eta(small_model, 0.1, 300, 7, validation_trials=100)
    stat = np.sort(E.max(axis=1) / rank[0])
    # "higher" quantile: the smallest sample with at least 90 % of the batch at or below it
    k = int(np.ceil(0.9 * 299))
    assert res.eta == stat[k]
    assert empirical_pfa(E, rank, res.eta) <= 0.1
    assert res.method == "quantile"


def test_quantile_and_bisection_agree(small_model):
    q = calibrate_eta(small_model, 0.1, 300, 3, validation_trials=400)
    b = calibrate_eta(small_model, 0.1, 300, 3, validation_trials=400, method="bisection")
    assert abs(q.achieved_pfa - b.achieved_pfa) <= q.pfa_halfwidth + b.pfa_halfwidth
    # bisection finds the smallest eta meeting the target, at most one order statistic below the quantile
    assert b.eta <= q.eta + 1e-9
    assert empirical_pfa(*first_iteration_energies(small_model, 3, CALIBRATION_STREAM, 300), b.eta) <= 0.1


def test_reproducible_and_json_roundtrip(small_model, tmp_path):
    a = calibrate_eta(small_model, 0.1, 120, 9, validation_trials=100)
    b = calibrate_eta(small_model, 0.1, 120, 9, validation_trials=100)
    assert a == b
    a.to_json(tmp_path / "eta.json")
    assert CalibrationResult.from_json(tmp_path / "eta.json") == a
    assert json.loads((tmp_path / "eta.json").read_text())["eta"] == a.eta
    assert 0 <= a.achieved_pfa <= 1


def test_bad_arguments(small_model):
    with pytest.raises(ValueError):
        calibrate_eta(small_model, 1.0, 200, 1)
    with pytest.raises(ValueError):
        calibrate_eta(small_model, 0.05, 50, 1)
    with pytest.warns(UserWarning):
        calibrate_eta(small_model, 0.01, 100, 1, validation_trials=10)


def test_binomial_halfwidth():
    assert binomial_halfwidth(0.05, 2000) == pytest.approx(1.96 * np.sqrt(0.05 * 0.95 / 2000))
    assert binomial_halfwidth(0.0, 10) == 0.0
