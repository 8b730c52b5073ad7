"""Everything a detector needs to know about the radar, bundled with caches."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import FineGrid, RadarLayout, SearchGrid, delay_window
from .scene import NoiseModel, Window
from .subspace import DEFAULT_REL_TOL, batched_residual_bases
from .waveform import PhaseCodeBank, WaveformConfig, signatures


def make_window(layout: RadarLayout, config: WaveformConfig, grid: SearchGrid) -> Window:
    tau_min, tau_max = delay_window(layout, grid)
    return Window(tau_min, tau_max, config.n_samples(tau_min, tau_max), config.T_s)


@dataclass(eq=False)
class RadarModel:
    """Layout, waveforms, grids and noise model plus a signature cache.

    Whitened mode matrices for the coarse grid are built once on first use
    and then shared read-only; off-grid signatures are computed on demand
    and memoised by location quantised to 1 mm.
    """

    layout: RadarLayout
    bank: PhaseCodeBank
    config: WaveformConfig
    grid: SearchGrid
    noise: NoiseModel
    window: Window
    fine_grid: FineGrid | None = None
    rel_tol: float = DEFAULT_REL_TOL
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def build(cls, layout, bank, config, grid, noise=None, fine_spacing=None, rel_tol=DEFAULT_REL_TOL):
        window = make_window(layout, config, grid)
        if noise is None:
            noise = NoiseModel.white(window.M, layout.n_rx)
        fine = FineGrid.for_grid(grid, fine_spacing) if fine_spacing else None
        return cls(layout, bank, config, grid, noise, window, fine, rel_tol)

    @property
    def P(self) -> int:
        return self.layout.n_rx

    @property
    def N(self) -> int:
        return self.layout.n_tx

    @property
    def M(self) -> int:
        return self.window.M

    @property
    def resolution(self) -> float:
        """c / W in metres."""
        return self.layout.c / self.config.W

    def raw_modes(self, points) -> np.ndarray:
        return signatures(self.bank, self.config, self.layout, points, self.window.tau_min, self.M)

    def whiten_modes(self, S) -> np.ndarray:
        """Apply ``C_p^{-1/2}`` to a (P, K, M, N) stack."""
        if self.noise.kind == "white":
            return S / np.sqrt(self.noise.sigma2)
        return np.stack([np.einsum("ij,kjn->kin", self.noise.whiteners[p], S[p]) for p in range(self.P)])

    def whiten_data(self, r) -> np.ndarray:
        return np.stack([self.noise.whiten(p, r[p]) for p in range(self.P)])

    def whitened_modes(self, points) -> np.ndarray:
        pts = np.asarray(points, float).reshape(-1, 2)
        keys = [tuple(np.round(x * 1000).astype(np.int64)) for x in pts]
        missing = [i for i, k in enumerate(keys) if k not in self._cache]
        if missing:
            fresh = self.whiten_modes(self.raw_modes(pts[missing]))
            with self._lock:
                for j, i in enumerate(missing):
                    self._cache.setdefault(keys[i], fresh[:, j])
        return np.stack([self._cache[k] for k in keys], axis=1)

    @cached_property
    def grid_modes(self) -> np.ndarray:
        """Whitened mode matrices of all coarse grid points, (P, G, M, N)."""
        return self.whiten_modes(self.raw_modes(self.grid.points))

    @cached_property
    def grid_bases(self):
        """Orthonormal bases of the whitened grid modes with no interference.

        Returns ``(U, keep)`` with ``U`` of shape (P, G, M, N) and the
        numerical-range mask ``keep`` of shape (P, G, N).
        """
        out = [batched_residual_bases(self.grid_modes[p], np.zeros((self.M, 0)), self.rel_tol) for p in range(self.P)]
        U = np.stack([u for u, _ in out])
        keep = np.stack([k for _, k in out])
        return U, keep
