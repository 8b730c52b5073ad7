"""Scenario configuration (YAML) and the objects built from it."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .geometry import C0, RadarLayout, SearchGrid
from .model import RadarModel, make_window
from .scene import NoiseModel
from .waveform import WaveformConfig, generate_codes


class ConfigError(ValueError):
    pass


@dataclass
class LayoutCfg:
    tx: list
    rx: list
    c: float = C0


@dataclass
class WaveformCfg:
    T: float
    L: int
    W: float
    T_s: float
    T_phi: float | None = None
    code_seed: int = 0


@dataclass
class GridCfg:
    x_range: list
    y_range: list
    spacing: float
    fine_spacing: float


@dataclass
class TargetCfg:
    x: float
    y: float
    snr_db: float


@dataclass
class NoiseCfg:
    kind: str = "white"
    sigma2: float = 1.0
    covariance_file: str | None = None


@dataclass
class DetectorCfg:
    k_max: int = 5
    epsilon: float = 1e-2
    mitigation: bool = True
    rel_tol: float = 1e-10
    max_ball_points: int = 512


@dataclass
class BaselineCfg:
    cancellation: str = "cell"


@dataclass
class CalibrationCfg:
    target_pfa: float = 0.05
    trials: int = 2000


@dataclass
class ExperimentCfg:
    snr_sweep: list = field(default_factory=list)
    trials: int = 200
    association_radius: float | None = None
    detectors: list = field(default_factory=lambda: ["msdis", "jdl-sic", "glrt-cd"])


@dataclass
class ScenarioConfig:
    """Everything needed to rebuild a scenario; the first target is the one of interest."""

    layout: LayoutCfg
    waveform: WaveformCfg
    grid: GridCfg
    targets: list
    noise: NoiseCfg = field(default_factory=NoiseCfg)
    detector: DetectorCfg = field(default_factory=DetectorCfg)
    baseline: BaselineCfg = field(default_factory=BaselineCfg)
    calibration: CalibrationCfg = field(default_factory=CalibrationCfg)
    experiment: ExperimentCfg = field(default_factory=ExperimentCfg)
    seed: int = 0
    source: str | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_dict(cls, d: dict, source=None) -> "ScenarioConfig":
        try:
            cfg = cls(
                layout=LayoutCfg(**d["layout"]),
                waveform=WaveformCfg(**d["waveform"]),
                grid=GridCfg(**d["grid"]),
                targets=[TargetCfg(**t) for t in d.get("targets", [])],
                noise=NoiseCfg(**d.get("noise", {})),
                detector=DetectorCfg(**d.get("detector", {})),
                baseline=BaselineCfg(**d.get("baseline", {})),
                calibration=CalibrationCfg(**d.get("calibration", {})),
                experiment=ExperimentCfg(**d.get("experiment", {})),
                seed=int(d.get("seed", 0)),
                source=source,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("source")
        return d

    def validate(self) -> None:
        w, g = self.waveform, self.grid
        positive = {"T": w.T, "L": w.L, "W": w.W, "T_s": w.T_s, "grid.spacing": g.spacing,
                    "grid.fine_spacing": g.fine_spacing, "layout.c": self.layout.c, "noise.sigma2": self.noise.sigma2}
        for name, v in positive.items():
            if not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        if not 0 < self.calibration.target_pfa < 1:
            raise ConfigError(f"calibration.target_pfa must lie in (0, 1), got {self.calibration.target_pfa}")
        if self.experiment.trials < 1:
            raise ConfigError("experiment.trials must be at least 1")
        if self.experiment.association_radius is not None and not self.experiment.association_radius > 0:
            raise ConfigError("experiment.association_radius must be positive")
        if self.detector.k_max < 1 or not self.detector.epsilon > 0:
            raise ConfigError("detector.k_max >= 1 and detector.epsilon > 0 required")

    # builders

    def radar_layout(self) -> RadarLayout:
        return RadarLayout(self.layout.tx, self.layout.rx, self.layout.c)

    def waveform_config(self) -> WaveformConfig:
        w = self.waveform
        return WaveformConfig(w.T, w.L, w.W, w.T_s, w.T_phi)

    def search_grid(self) -> SearchGrid:
        return SearchGrid.rectangular(self.grid.x_range, self.grid.y_range, self.grid.spacing)

    def build_model(self) -> RadarModel:
        layout = self.radar_layout()
        wcfg = self.waveform_config()
        wcfg.check_time_bandwidth(layout.n_tx)
        grid = self.search_grid()
        bank = generate_codes(layout.n_tx, wcfg.L, self.waveform.code_seed)
        window = make_window(layout, wcfg, grid)
        if self.noise.kind == "white":
            noise = NoiseModel.white(window.M, layout.n_rx, self.noise.sigma2)
        elif self.noise.kind == "custom":
            if not self.noise.covariance_file:
                raise ConfigError("custom noise needs noise.covariance_file")
            path = Path(self.noise.covariance_file)
            if not path.is_absolute() and self.source:
                path = Path(self.source).parent / path
            noise = NoiseModel.from_covariances(np.load(path))
            if noise.M != window.M or noise.P != layout.n_rx:
                raise ConfigError(f"covariances are {noise.P}x{noise.M}x{noise.M}, scenario needs "
                                  f"{layout.n_rx}x{window.M}x{window.M}")
        else:
            raise ConfigError(f"unknown noise kind {self.noise.kind!r}")
        return RadarModel.build(layout, bank, wcfg, grid, noise, self.grid.fine_spacing, self.detector.rel_tol)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            d = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"config {path} is not a mapping")
    return ScenarioConfig.from_dict(d, source=str(path))


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
