"""Monte Carlo trials, target association and P_d / RMSE aggregation."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import BaselineParams, run_glrt_cd, run_jdl_sic
from .calibration import CalibrationResult, binomial_halfwidth
from .config import ScenarioConfig
from .detector import GicParams, run_msdis
from .geometry import max_delay_gap
from .model import RadarModel
from .scene import make_target, synthesize

DETECTORS = ("msdis", "jdl-sic", "glrt-cd")
CSV_HEADER = ("snr_db", "pd", "pd_halfwidth", "rmse_m", "n_associated", "mean_count")


class PruningViolation(AssertionError):
    pass


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig
    calibration: CalibrationResult
    detector: str = "msdis"
    snr_sweep: list = field(default_factory=list)
    trials: int = 100
    association_radius: float | None = None
    seed: int = 0
    model: RadarModel | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ValueError(f"unknown detector {self.detector!r}; choose from {DETECTORS}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.model is None:
            self.model = self.scenario.build_model()
        if self.association_radius is None:
            self.association_radius = self.model.resolution
        if not self.association_radius > 0:
            raise ValueError("association radius must be positive")

    @classmethod
    def from_config(cls, cfg: ScenarioConfig, calibration, detector, seed=None, model=None) -> "ExperimentSpec":
        e = cfg.experiment
        return cls(cfg, calibration, detector, list(e.snr_sweep), e.trials, e.association_radius,
                   cfg.seed if seed is None else seed, model)


@dataclass
class MetricsRow:
    snr_db: float
    pd: float
    pd_halfwidth: float
    rmse_m: float
    n_associated: int
    mean_count: float
    mean_runtime_s: float = float("nan")

    def csv_fields(self):
        return [f"{self.snr_db:.6g}", f"{self.pd:.6f}", f"{self.pd_halfwidth:.6f}",
                "nan" if np.isnan(self.rmse_m) else f"{self.rmse_m:.6f}", str(self.n_associated),
                f"{self.mean_count:.6f}"]


def associate(reports, truths, radius: float):
    """Greedy one-to-one association: highest score first, nearest free truth within ``radius``.

    ``reports`` is a list of (location, score).  Returns a dict truth index ->
    (report index, distance).
    """
    truths = np.asarray(truths, float).reshape(-1, 2)
    order = sorted(range(len(reports)), key=lambda i: (-reports[i][1], i))
    taken = {}
    for i in order:
        d = np.linalg.norm(truths - np.asarray(reports[i][0]), axis=1)
        for k in np.argsort(d, kind="stable"):
            if d[k] > radius:
                break
            if k not in taken:
                taken[int(k)] = (i, float(d[k]))
                break
    return taken


def check_pruning(model: RadarModel, locations) -> None:
    """Every pair of reported targets must be separable."""
    locs = np.asarray(locations, float).reshape(-1, 2)
    for i in range(len(locs)):
        for j in range(i + 1, len(locs)):
            if not max_delay_gap(model.layout, locs[i], locs[j]) > 1.0 / model.config.W:
                raise PruningViolation(f"reports {locs[i]} and {locs[j]} are not separable")


def scene_targets(spec: ExperimentSpec, trial_index: int, snr1_db: float | None):
    """Truth targets of one trial; SNRs keep their configured offsets from the first target."""
    m = spec.model
    cfgs = spec.scenario.targets
    shift = 0.0 if snr1_db is None or not cfgs else snr1_db - cfgs[0].snr_db
    return [
        make_target(m.layout, m.bank, m.config, m.noise, m.window, (t.x, t.y), t.snr_db + shift,
                    [spec.seed, trial_index, 1 + k])
        for k, t in enumerate(cfgs)
    ]


def run_detector(spec: ExperimentSpec, targets, trial_index: int, record_maps=False, detector=None):
    m = spec.model
    detector = detector or spec.detector
    seed = [spec.seed, trial_index, 0]
    cfg = spec.scenario
    if detector == "glrt-cd":
        data = synthesize(m.layout, m.bank, m.config, m.window, targets[:1], m.noise, seed)
        return run_glrt_cd(m, data, spec.calibration.eta, record_maps)
    data = synthesize(m.layout, m.bank, m.config, m.window, targets, m.noise, seed)
    if detector == "msdis":
        d = cfg.detector
        params = GicParams(spec.calibration.eta, d.k_max, d.epsilon, d.mitigation, d.max_ball_points)
        return run_msdis(m, params, data, record_maps)
    if spec.calibration.mf_threshold is None:
        raise ValueError("calibration has no MF threshold for jdl-sic")
    params = BaselineParams(spec.calibration.mf_threshold, cfg.detector.k_max, cfg.baseline.cancellation)
    return run_jdl_sic(m, data, params, record_maps)


def run_trial(spec: ExperimentSpec, trial_index: int, snr1_db: float | None = None) -> dict:
    t0 = time.perf_counter()
    targets = scene_targets(spec, trial_index, snr1_db)
    report = run_detector(spec, targets, trial_index)
    runtime = time.perf_counter() - t0
    check_pruning(spec.model, report.locations)
    truths = [t.location for t in targets]
    reports = [(t.location, t.score) for t in report.targets]
    matched = associate(reports, truths, spec.association_radius)
    hit = matched.get(0)
    return {
        "trial": trial_index,
        "snr_db": snr1_db if snr1_db is not None else (spec.scenario.targets[0].snr_db if targets else None),
        "detector": spec.detector,
        "detected": hit is not None,
        "error_m": hit[1] if hit else None,
        "n_reported": len(report.targets),
        "n_unassociated": len(report.targets) - len(matched),
        "termination": report.termination,
        "reports": [[float(x), float(y)] for x, y in report.locations],
        "runtime_s": runtime,
    }


def aggregate(snr_db: float, records) -> MetricsRow:
    records = sorted(records, key=lambda r: r["trial"])
    n = len(records)
    hits = [r for r in records if r["detected"]]
    pd = len(hits) / n if n else float("nan")
    rmse = float(np.sqrt(np.mean([r["error_m"] ** 2 for r in hits]))) if hits else float("nan")
    return MetricsRow(snr_db, pd, binomial_halfwidth(pd, n), rmse, len(hits),
                      float(np.mean([r["n_reported"] for r in records])) if n else float("nan"),
                      float(np.mean([r["runtime_s"] for r in records])) if n else float("nan"))


def run_sweep(spec: ExperimentSpec, threads: int = 1, trial_offset: int = 0):
    """One :class:`MetricsRow` per SNR point plus all per-trial records."""
    rows, records = [], []
    for snr in spec.snr_sweep:
        jobs = range(trial_offset, trial_offset + spec.trials)
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                recs = list(pool.map(lambda j: run_trial(spec, j, snr), jobs))
        else:
            recs = [run_trial(spec, j, snr) for j in jobs]
        recs.sort(key=lambda r: r["trial"])
        rows.append(aggregate(snr, recs))
        records.extend(recs)
    return rows, records


def write_metrics_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_fields())


def write_records(path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def capture_score_maps(spec: ExperimentSpec, trial_index: int, snr1_db: float | None = None,
                       detectors=("msdis", "jdl-sic")) -> dict:
    """Per-iteration score maps of one trial, reshaped onto the grid when it is rectangular."""
    targets = scene_targets(spec, trial_index, snr1_db)
    shape = spec.model.grid.shape()
    out = {
        "grid_x": np.unique(spec.model.grid.points[:, 0]).tolist(),
        "grid_y": np.unique(spec.model.grid.points[:, 1]).tolist(),
        "truth": [t.location.tolist() for t in targets],
        "detectors": {},
    }
    for det in detectors:
        report = run_detector(spec, targets, trial_index, record_maps=True, detector=det)
        maps = [mp.reshape(shape) if shape else mp for mp in report.score_maps]
        out["detectors"][det] = {
            "maps": maps,
            "estimates": report.locations.tolist(),
            "termination": report.termination,
        }
    return out
