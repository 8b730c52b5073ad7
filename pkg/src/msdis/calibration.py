"""Monte Carlo choice of the GIC penalty for a target false-alarm rate."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .detector import DetectionState, projected_energies
from .model import RadarModel

log = logging.getLogger(__name__)

CALIBRATION_STREAM = 101
VALIDATION_STREAM = 102


@dataclass(frozen=True)
class CalibrationResult:
    eta: float
    target_pfa: float
    achieved_pfa: float
    pfa_halfwidth: float
    trials: int
    seed: int
    method: str = "quantile"
    # threshold of the MF+SIC reference receiver, calibrated to the same P_fa
    mf_threshold: float | None = None
    mf_achieved_pfa: float | None = None

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "CalibrationResult":
        with open(path) as fh:
            return cls(**json.load(fh))


def binomial_halfwidth(p: float, n: int, z: float = 1.96) -> float:
    return float(z * np.sqrt(max(p * (1 - p), 0.0) / n)) if n else float("nan")


def noise_trial(model: RadarModel, seed, stream: int, j: int) -> np.ndarray:
    """Whitened pure-noise data of trial ``j``."""
    w = model.noise.sample(np.random.default_rng([seed, stream, j]))
    return model.whiten_data(w)


def first_iteration_energies(model: RadarModel, seed, stream: int, trials: int):
    """Projected noise energy summed over receivers, (trials, G), and the total ranks (G,)."""
    state = DetectionState.initial(model)
    idx = np.arange(len(model.grid))
    E = np.empty((trials, len(idx)))
    rank = None
    for j in range(trials):
        e, r = projected_energies(model, state, noise_trial(model, seed, stream, j), idx)
        E[j] = e.sum(axis=0)
        rank = r.sum(axis=0)
    return E, rank


def empirical_pfa(energies, ranks, eta: float) -> float:
    """Fraction of trials whose best first-iteration score is strictly positive."""
    return float(np.mean(np.max(energies - eta * ranks[None, :], axis=1) > 0))


def _bisect_eta(E, rank, target_pfa, iters=200):
    lo, hi = 0.0, float(np.max(E / np.maximum(rank, 1)[None, :])) + 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if empirical_pfa(E, rank, mid) > target_pfa:
            lo = mid
        else:
            hi = mid
    return hi


def calibrate_eta(model: RadarModel, target_pfa: float, trials: int, seed: int, validation_trials: int | None = None,
                  method: str = "auto") -> CalibrationResult:
    """Penalty ``eta`` such that pure noise crosses zero with probability ``target_pfa``.

    When every grid point has the same total residual rank, ``eta`` is the
    (1 - target_pfa) empirical quantile of max energy / rank.  Otherwise (or
    with ``method="bisection"``) it is found by bisection on the empirical
    false-alarm rate of the first detection test.
    """
    if not 0 < target_pfa < 1:
        raise ValueError("target_pfa must lie in (0, 1)")
    if trials < 100:
        raise ValueError("at least 100 calibration trials are required")
    if trials * target_pfa < 10:
        warnings.warn(f"only {trials * target_pfa:.1f} expected false alarms; eta will be noisy", stacklevel=2)
    E, rank = first_iteration_energies(model, seed, CALIBRATION_STREAM, trials)
    constant_rank = bool(np.all(rank == rank[0])) and rank[0] > 0
    if method == "auto":
        method = "quantile" if constant_rank else "bisection"
    if method == "quantile":
        if not constant_rank:
            raise ValueError("quantile calibration needs a constant total rank over the grid")
        stat = E.max(axis=1) / rank[0]
        eta = float(np.quantile(stat, 1 - target_pfa, method="higher"))
    elif method == "bisection":
        eta = _bisect_eta(E, rank, target_pfa)
    else:
        raise ValueError(f"unknown calibration method {method!r}")
    n_val = trials if validation_trials is None else validation_trials
    E_val, rank_val = first_iteration_energies(model, seed, VALIDATION_STREAM, n_val)
    achieved = empirical_pfa(E_val, rank_val, eta)
    log.info("eta=%.4f (%s), validation P_fa=%.4f over %d trials", eta, method, achieved, n_val)
    return CalibrationResult(eta, target_pfa, achieved, binomial_halfwidth(achieved, n_val), trials, seed, method)
