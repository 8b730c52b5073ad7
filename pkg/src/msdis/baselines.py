"""Reference receivers: matched filter with successive interference cancellation,
and the clairvoyant single-target GLRT.

The MF+SIC receiver is a reference reimplementation of the concept, not a
bit-faithful copy of any published implementation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .calibration import CALIBRATION_STREAM, VALIDATION_STREAM, binomial_halfwidth, noise_trial
from .detector import Detection, DetectionReport, GicParams, run_msdis
from .geometry import prune_grid
from .model import RadarModel

MF_LABEL = "MF+SIC reference"


@dataclass(frozen=True)
class BaselineParams:
    """MF+SIC knobs.

    ``cancellation="cell"`` follows the ideal-correlation model of the MF
    receiver: a detected echo is assumed to occupy only its own resolution
    cell (|delay gap| <= 1/W) in each pair's MF output, so cancelling it means
    blanking that cell; gains are per-pair MF estimates.  ``"echo"``
    refits all detected echoes jointly by least squares with the true mode
    matrices and subtracts them from the data.
    """

    mf_threshold: float
    sic_max_iterations: int = 5
    cancellation: str = "cell"

    def __post_init__(self):
        if self.sic_max_iterations < 1:
            raise ValueError("sic_max_iterations must be at least 1")
        if self.cancellation not in ("cell", "echo"):
            raise ValueError(f"unknown cancellation {self.cancellation!r}")


@lru_cache(maxsize=8)
def _mf_norms(model: RadarModel) -> np.ndarray:
    return np.sum(np.abs(model.grid_modes) ** 2, axis=2)  # (P, G, N)


def mf_terms(model: RadarModel, r_white, indices=None) -> np.ndarray:
    """Energy-normalised MF outputs ``|s_pn(g)^H r_p|^2 / ||s_pn(g)||^2``, (P, G, N)."""
    if indices is None:
        indices = np.arange(len(model.grid))
    norms = _mf_norms(model)[:, indices]
    z = np.einsum("pgmn,pm->pgn", model.grid_modes[:, indices].conj(), r_white)
    return np.divide(np.abs(z) ** 2, norms, out=np.zeros_like(norms), where=norms > 0)


def mf_map(model: RadarModel, r_white, indices=None) -> np.ndarray:
    """Noncoherent sum of energy-normalised matched-filter outputs."""
    return mf_terms(model, r_white, indices).sum(axis=(0, 2))


def run_jdl_sic(model: RadarModel, measurements, params: BaselineParams, record_maps: bool = False) -> DetectionReport:
    """Peak-pick the MF map, cancel the detection, prune, repeat."""
    r_white = model.whiten_data(measurements.vectors)
    residual = r_white.copy()
    grid = model.grid
    terms = mf_terms(model, r_white)  # used by cell cancellation only
    live = np.ones(terms.shape, bool)
    tau_grid = model.layout.delays(model.grid.points)  # (P, N, G)
    targets, maps = [], []
    termination = "k-max"
    for k in range(1, params.sic_max_iterations + 1):
        idx = grid.active_indices
        if len(idx) == 0:
            termination = "empty-grid"
            break
        if params.cancellation == "cell":
            stat = np.sum(terms[:, idx] * live[:, idx], axis=(0, 2))
        else:
            stat = mf_map(model, residual, idx)
        scores = stat - params.mf_threshold
        if record_maps:
            full = np.full(len(model.grid), np.nan)
            full[idx] = scores
            maps.append(full)
        best = int(np.argmax(scores))
        if not scores[best] > 0:
            termination = "no-detection"
            break
        gi = int(idx[best])
        x_hat = model.grid.points[gi]
        targets.append(Detection(x_hat.copy(), gi, float(scores[best]), k, np.zeros((model.P, model.N), complex)))
        if params.cancellation == "cell":
            s = model.grid_modes[:, gi]  # (P, M, N)
            targets[-1].gains[:] = np.einsum("pmn,pm->pn", s.conj(), r_white) / _mf_norms(model)[:, gi]
            gap = np.abs(tau_grid - tau_grid[:, :, gi:gi + 1])  # (P, N, G)
            live &= ~(gap <= 1.0 / model.config.W).transpose(0, 2, 1)
        else:
            # joint refit of every detected echo on the original data
            locs = np.array([t.location for t in targets])
            modes = model.whitened_modes(locs)  # (P, K, M, N)
            for p in range(model.P):
                A = np.concatenate(list(modes[p]), axis=1)
                sol, *_ = np.linalg.lstsq(A, r_white[p], rcond=model.rel_tol)
                residual[p] = r_white[p] - A @ sol
                for i, t in enumerate(targets):
                    t.gains[p] = sol[i * model.N:(i + 1) * model.N]
        grid = prune_grid(grid, model.layout, [x_hat], model.config.W)
    return DetectionReport(targets, termination, maps, "jdl-sic")


def calibrate_mf_threshold(model: RadarModel, target_pfa: float, trials: int, seed: int,
                           validation_trials: int | None = None):
    """Threshold on the first MF map giving ``target_pfa`` under pure noise.

    Returns ``(threshold, achieved_pfa, halfwidth)``.
    """
    if not 0 < target_pfa < 1:
        raise ValueError("target_pfa must lie in (0, 1)")
    peaks = np.array([mf_map(model, noise_trial(model, seed, CALIBRATION_STREAM, j)).max() for j in range(trials)])
    thr = float(np.quantile(peaks, 1 - target_pfa, method="higher"))
    n_val = trials if validation_trials is None else validation_trials
    val = np.array([mf_map(model, noise_trial(model, seed, VALIDATION_STREAM, j)).max() for j in range(n_val)])
    achieved = float(np.mean(val > thr))
    return thr, achieved, binomial_halfwidth(achieved, n_val)


def run_glrt_cd(model: RadarModel, single_target_measurements, eta: float, record_maps: bool = False) -> DetectionReport:
    """One detection test on data holding only the target of interest."""
    report = run_msdis(model, GicParams(eta=eta, k_max=1, mitigation_enabled=False), single_target_measurements,
                       record_maps=record_maps)
    report.detector = "glrt-cd"
    return report
