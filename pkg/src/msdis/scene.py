"""Synthetic measurements ``r_p = sum_k S_p(x_k) a_{p,k} + w_p``."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import RadarLayout, are_separable
from .subspace import whitener_from
from .waveform import PhaseCodeBank, WaveformConfig, signatures


class DegenerateSceneError(ValueError):
    pass


@dataclass(frozen=True)
class Window:
    """Sampling window shared by all receivers."""

    tau_min: float
    tau_max: float
    M: int
    T_s: float


@dataclass(frozen=True)
class NoiseModel:
    """Per-receiver noise covariances.

    ``kind="white"`` stores only ``sigma2``; ``kind="custom"`` stores the full
    matrices.  Either way :attr:`covariances` and :attr:`whiteners` give dense
    per-receiver matrices.
    """

    M: int
    P: int
    kind: str = "white"
    sigma2: float = 1.0
    custom: tuple | None = None

    def __post_init__(self):
        if self.kind == "white":
            if not self.sigma2 > 0:
                raise ValueError("noise power must be positive")
        elif self.kind == "custom":
            if self.custom is None or len(self.custom) != self.P:
                raise ValueError("custom noise needs one covariance per receiver")
            for C in self.custom:
                C = np.asarray(C)
                if C.shape != (self.M, self.M):
                    raise ValueError(f"covariance shape {C.shape} != ({self.M}, {self.M})")
                if np.linalg.norm(C - C.conj().T) > 1e-12 * np.linalg.norm(C):
                    raise ValueError("covariance not Hermitian")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def white(cls, M, P, sigma2=1.0) -> "NoiseModel":
        return cls(M, P, "white", float(sigma2))

    @classmethod
    def from_covariances(cls, covariances) -> "NoiseModel":
        covs = tuple(np.asarray(C, complex) for C in covariances)
        return cls(covs[0].shape[0], len(covs), "custom", custom=covs)

    @cached_property
    def covariances(self) -> list[np.ndarray]:
        if self.kind == "white":
            return [self.sigma2 * np.eye(self.M) for _ in range(self.P)]
        return list(self.custom)

    @cached_property
    def whiteners(self) -> list[np.ndarray]:
        if self.kind == "white":
            return [np.eye(self.M) / np.sqrt(self.sigma2) for _ in range(self.P)]
        return [whitener_from(C).root_inverse for C in self.custom]

    @cached_property
    def _colourers(self):
        return [np.linalg.cholesky(C) for C in self.covariances]

    def whiten(self, p: int, x):
        if self.kind == "white":
            return np.asarray(x) / np.sqrt(self.sigma2)
        return self.whiteners[p] @ x

    def mean_power(self, p: int) -> float:
        if self.kind == "white":
            return self.sigma2
        return float(np.real(np.trace(self.custom[p]))) / self.M

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        z = (rng.standard_normal((self.P, self.M)) + 1j * rng.standard_normal((self.P, self.M))) / np.sqrt(2)
        if self.kind == "white":
            return np.sqrt(self.sigma2) * z
        return np.stack([Lc @ z[p] for p, Lc in enumerate(self._colourers)])


@dataclass(frozen=True)
class TruthTarget:
    location: np.ndarray
    amplitudes: np.ndarray  # (P, N) complex gains a_{p,n}
    snr_db: float = field(default=float("nan"))


@dataclass(frozen=True)
class MeasurementSet:
    vectors: np.ndarray  # (P, M)
    noise: NoiseModel
    window: Window


def whitened_signature_energy(layout, bank, config, noise: NoiseModel, window: Window, location) -> np.ndarray:
    """``||C_p^{-1/2} s_{p,n}(x)||^2`` as a (P, N) array."""
    S = signatures(bank, config, layout, location, window.tau_min, window.M)[:, 0]  # (P, M, N)
    return np.array([np.sum(np.abs(noise.whiten(p, S[p])) ** 2, axis=0) for p in range(layout.n_rx)])


def amplitude_scale(layout, bank, config, noise, window, location, snr_db, seed) -> np.ndarray:
    """Random-phase gains with a common magnitude that realises ``snr_db`` exactly."""
    energy = whitened_signature_energy(layout, bank, config, noise, window, location)
    if not np.any(energy > 0):
        raise DegenerateSceneError(f"target at {tuple(np.asarray(location))} has no echo inside the window")
    rng = np.random.default_rng(seed)
    phases = np.exp(2j * np.pi * rng.random(energy.shape))
    scale = np.sqrt(10 ** (snr_db / 10) / energy.mean())
    return scale * phases


def realized_snr(layout, bank, config, noise, window, target: TruthTarget) -> float:
    """Average whitened echo energy per pair in dB; ``-inf`` for zero gains."""
    energy = whitened_signature_energy(layout, bank, config, noise, window, target.location)
    snr = float(np.mean(np.abs(target.amplitudes) ** 2 * energy))
    return 10 * np.log10(snr) if snr > 0 else float("-inf")


def make_target(layout, bank, config, noise, window, location, snr_db, seed) -> TruthTarget:
    a = amplitude_scale(layout, bank, config, noise, window, location, snr_db, seed)
    return TruthTarget(np.asarray(location, float), a, snr_db)


def synthesize(
    layout: RadarLayout,
    bank: PhaseCodeBank,
    config: WaveformConfig,
    window: Window,
    targets,
    noise: NoiseModel,
    seed,
    noiseless: bool = False,
) -> MeasurementSet:
    """Superposition of target echoes plus a noise draw (skipped when ``noiseless``)."""
    targets = list(targets)
    for i in range(len(targets)):
        for j in range(i + 1, len(targets)):
            if not are_separable(layout, targets[i].location, targets[j].location, config.W):
                warnings.warn(f"targets {i} and {j} are not separable", stacklevel=2)
    r = np.zeros((layout.n_rx, window.M), complex)
    if targets:
        locs = np.array([t.location for t in targets])
        S = signatures(bank, config, layout, locs, window.tau_min, window.M)  # (P, K, M, N)
        a = np.stack([t.amplitudes for t in targets], axis=1)  # (P, K, N)
        r += np.einsum("pkmn,pkn->pm", S, a)
    if not noiseless:
        r += noise.sample(np.random.default_rng(seed))
    return MeasurementSet(r, noise, window)
