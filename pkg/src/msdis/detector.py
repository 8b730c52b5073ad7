"""Iterative subspace detector with interference suppression (MSD-IS).

Each iteration scores every active grid point with the penalised projected
energy

    J(x) = sum_p ||Pi_p(x) C_p^{-1/2} r_p||^2 - eta * rank Pi_p(x),

where ``Pi_p(x)`` projects onto the part of the whitened mode span of ``x``
outside the current interference subspace ``Xi_p``.  The best point is
accepted when its score is strictly positive; its gains are estimated, the
interference subspace is enlarged and the grid is pruned of points that
are not separable from it.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import SearchGrid, prune_grid
from .model import RadarModel
from .scene import MeasurementSet
from .subspace import Projector, batched_residual_bases, orthonormal_range

log = logging.getLogger(__name__)

MAX_BALL_POINTS = 512


@dataclass(frozen=True)
class GicParams:
    """Detector knobs.

    ``epsilon`` is measured against the whitened noise floor (one unit of
    power per sample).
    """

    eta: float
    k_max: int = 5
    epsilon: float = 1e-2
    mitigation_enabled: bool = True
    max_ball_points: int = MAX_BALL_POINTS

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class Detection:
    location: np.ndarray
    grid_index: int
    score: float
    iteration: int
    gains: np.ndarray  # (P, N)
    rank_deficient: bool = False


@dataclass
class DetectionState:
    iteration: int
    detections: list
    interference: list  # P Projectors
    retained: list  # per receiver, list of (M, r_i) blocks spanning Xi_p
    active_grid: SearchGrid

    @classmethod
    def initial(cls, model: RadarModel, grid: SearchGrid | None = None) -> "DetectionState":
        return cls(
            1,
            [],
            [Projector.zero(model.M) for _ in range(model.P)],
            [[] for _ in range(model.P)],
            grid if grid is not None else model.grid,
        )


@dataclass
class DetectionReport:
    targets: list
    termination: str  # "no-detection" | "empty-grid" | "k-max"
    score_maps: list = field(default_factory=list)
    detector: str = "msdis"

    @property
    def locations(self) -> np.ndarray:
        return np.array([t.location for t in self.targets]).reshape(-1, 2)

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "termination": self.termination,
            "targets": [
                {
                    "x": float(t.location[0]),
                    "y": float(t.location[1]),
                    "grid_index": int(t.grid_index),
                    "score": float(t.score),
                    "iteration": int(t.iteration),
                    "rank_deficient": bool(t.rank_deficient),
                    "gains_re": np.real(t.gains).tolist(),
                    "gains_im": np.imag(t.gains).tolist(),
                }
                for t in self.targets
            ],
        }


def projected_energies(model: RadarModel, state: DetectionState, r_white, indices=None):
    """Per-receiver projected energy and residual rank at grid points.

    Returns ``(energy, rank)``, both of shape (P, len(indices)).
    """
    if indices is None:
        indices = state.active_grid.active_indices
    energy = np.zeros((model.P, len(indices)))
    rank = np.zeros((model.P, len(indices)), dtype=int)
    if len(indices) == 0:
        return energy, rank
    for p in range(model.P):
        if state.interference[p].rank == 0:
            U, keep = model.grid_bases
            U, keep = U[p, indices], keep[p, indices]
        else:
            U, keep = batched_residual_bases(model.grid_modes[p, indices], state.interference[p].basis, model.rel_tol)
        coeff = np.einsum("gmn,m->gn", U.conj(), r_white[p])
        energy[p] = np.sum(np.abs(coeff) ** 2 * keep, axis=1)
        rank[p] = keep.sum(axis=1)
    return energy, rank


def gic_scores(model, state, params: GicParams, measurements: MeasurementSet, indices=None) -> np.ndarray:
    """Score of every requested grid point (default: the active set)."""
    r_white = model.whiten_data(measurements.vectors)
    energy, rank = projected_energies(model, state, r_white, indices)
    return np.sum(energy - params.eta * rank, axis=0)


def gic_score(model, state, params, measurements, x) -> float:
    """Score of a single location, on or off the grid."""
    r_white = model.whiten_data(measurements.vectors)
    modes = model.whitened_modes(x)[:, 0]
    total = 0.0
    for p in range(model.P):
        U, keep = batched_residual_bases(modes[p][None], state.interference[p].basis, model.rel_tol)
        coeff = U[0, :, keep[0]].conj() @ r_white[p]
        total += float(np.sum(np.abs(coeff) ** 2)) - params.eta * int(keep.sum())
    return total


def score_map(model, state, params, measurements) -> np.ndarray:
    """Scores over the full grid, NaN outside the active set."""
    out = np.full(len(model.grid), np.nan)
    idx = state.active_grid.active_indices
    out[idx] = gic_scores(model, state, params, measurements, idx)
    return out


def detect_iteration(model, state, params, measurements, scores=None):
    """Best active point and whether it crosses the zero threshold.

    Returns ``(accepted, grid_index, score)``; ties go to the lowest grid
    index.  Raises ``LookupError`` on an empty search set.
    """
    idx = state.active_grid.active_indices
    if len(idx) == 0:
        raise LookupError("empty search grid")
    if scores is None:
        scores = gic_scores(model, state, params, measurements, idx)
    else:
        scores = scores[idx]
    best = int(np.argmax(scores))
    return bool(scores[best] > 0), int(idx[best]), float(scores[best])


def estimate_gains(model: RadarModel, state: DetectionState, measurements: MeasurementSet, x_hat):
    """Joint least-squares gains of the new target alongside the interference span.

    Returns ``(gains, rank_deficient)`` with ``gains`` of shape (P, N).
    """
    r_white = model.whiten_data(measurements.vectors)
    modes = model.whitened_modes(x_hat)[:, 0]
    gains = np.zeros((model.P, model.N), complex)
    deficient = False
    for p in range(model.P):
        A = np.hstack([state.interference[p].basis, modes[p]])
        sol, _, rank, _ = np.linalg.lstsq(A, r_white[p], rcond=model.rel_tol)
        deficient |= rank < A.shape[1]
        gains[p] = sol[-model.N:]
    return gains, bool(deficient)


def retained_vectors(X, gain, epsilon, rel_tol):
    """Dominant left singular vectors of ``X`` kept by the significance rule.

    Keeps the smallest ``U >= 1`` leading vectors such that the discarded
    energy ``|gain|^2 / B * sum_{m > U} lambda_m`` drops below ``epsilon``.
    """
    B = X.shape[1]
    Uv, s, _ = np.linalg.svd(X, full_matrices=False)
    lam = s ** 2
    usable = int(np.sum(s > rel_tol * s[0])) if s.size and s[0] > 0 else 0
    if usable == 0:
        return Uv[:, :0]
    tail = np.concatenate([np.cumsum(lam[::-1])[::-1][1:], [0.0]])  # tail[j] = sum lam[j+1:]
    ok = np.abs(gain) ** 2 / B * tail < epsilon
    n_keep = int(np.argmax(ok)) + 1
    return Uv[:, : min(max(n_keep, 1), usable)]


def update_interference(model: RadarModel, state: DetectionState, params: GicParams, x_hat, gains) -> list:
    """New per-receiver interference projectors after accepting ``x_hat``."""
    modes = model.whitened_modes(x_hat)[:, 0]
    ball = None
    if params.mitigation_enabled:
        if model.fine_grid is None:
            raise ValueError("mitigation needs a fine grid")
        ball = model.fine_grid.ball(x_hat, model.resolution, params.max_ball_points)
        if len(ball) == 0:
            warnings.warn("empty neighbourhood ball; falling back to plain augmentation", stacklevel=2)
            ball = None
    if ball is not None:
        E = model.whiten_modes(model.raw_modes(ball))  # (P, B, M, N)
    new = []
    for p in range(model.P):
        Xi = state.interference[p]
        if ball is None:
            block = modes[p]
        else:
            # the accepted point's own modes are kept alongside the dominant ball directions,
            # so the mitigated span always contains the plain one
            block = np.hstack([Xi.complement(modes[p])] + [
                retained_vectors(Xi.complement(E[p, :, :, n].T), gains[p, n], params.epsilon, model.rel_tol)
                for n in range(model.N)
            ])
        state.retained[p].append(block)
        new.append(Projector(orthonormal_range(np.hstack(state.retained[p]), model.rel_tol)))
    return new


def run_msdis(model: RadarModel, params: GicParams, measurements: MeasurementSet, record_maps: bool = False,
              grid: SearchGrid | None = None) -> DetectionReport:
    """Sequential detection until rejection, an empty grid, or ``k_max`` tests."""
    state = DetectionState.initial(model, grid)
    maps = []
    while True:
        if len(state.active_grid.active_indices) == 0:
            termination = "empty-grid"
            break
        scores = score_map(model, state, params, measurements)
        if record_maps:
            maps.append(scores)
        accepted, gi, score = detect_iteration(model, state, params, measurements, scores)
        if not accepted:
            termination = "no-detection"
            break
        x_hat = model.grid.points[gi]
        gains, deficient = estimate_gains(model, state, measurements, x_hat)
        state.detections.append(Detection(x_hat.copy(), gi, score, state.iteration, gains, deficient))
        log.debug("iteration %d: accepted %s with score %.3f", state.iteration, x_hat, score)
        if state.iteration == params.k_max:
            termination = "k-max"
            break
        state.interference = update_interference(model, state, params, x_hat, gains)
        state.active_grid = prune_grid(state.active_grid, model.layout, [x_hat], model.config.W)
        state.iteration += 1
    return DetectionReport(state.detections, termination, maps, "msdis")
