"""Four-phase coded pulses, rectangular low-pass filter and sampled echo signatures.

The filtered waveform ``s_n = s~_n * phi`` is evaluated in closed form.  With
``F_n(t)`` the running integral of the chip train (piecewise linear, knots at
chip edges), the convolution with a rectangular filter of height ``sqrt(L/T)``
and support ``[0, T_phi]`` is ``sqrt(L/T) * (F_n(t) - F_n(t - T_phi))``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import RadarLayout

FOUR_PHASE = np.array([1, 1j, -1, -1j])


@dataclass(frozen=True)
class WaveformConfig:
    """Pulse and receiver timing.

    Attributes
    ----------
    T : float
        Pulse duration (s).
    L : int
        Number of chips.
    W : float
        Two-sided bandwidth (Hz).
    T_s : float
        Sampling interval (s).
    T_phi : float, optional
        Filter support (s); defaults to one chip, ``T / L``.
    """

    T: float
    L: int
    W: float
    T_s: float
    T_phi: float | None = None

    def __post_init__(self):
        if not (self.T > 0 and self.W > 0 and self.T_s > 0 and self.L >= 1):
            raise ValueError("waveform parameters must be positive")
        if self.T_phi is None:
            object.__setattr__(self, "T_phi", self.T / self.L)
        if not self.T_phi > 0:
            raise ValueError("filter support must be positive")

    @property
    def chip(self) -> float:
        return self.T / self.L

    def check_time_bandwidth(self, n_tx: int) -> None:
        if self.W * self.T < 4 * n_tx:
            warnings.warn(f"W*T = {self.W * self.T:.3g} is not much larger than N = {n_tx}", stacklevel=2)

    def n_samples(self, tau_min: float, tau_max: float) -> int:
        # guard against ceil() of values like 256.00000000000003
        return int(math.ceil((self.T + self.T_phi + tau_max - tau_min) / self.T_s - 1e-9))


@dataclass(frozen=True)
class PhaseCodeBank:
    codes: np.ndarray  # (N, L) complex
    seed: int | None = None

    @property
    def n_tx(self) -> int:
        return self.codes.shape[0]


def generate_codes(n_tx: int, length: int, seed) -> PhaseCodeBank:
    if n_tx < 1 or length < 1:
        raise ValueError("need at least one code of at least one chip")
    rng = np.random.default_rng(seed)
    codes = FOUR_PHASE[rng.integers(0, 4, size=(n_tx, length))]
    codes.setflags(write=False)
    return PhaseCodeBank(codes, seed)


def _running_integral(code, chip, t):
    """Integral over [0, t] of the chip train with unit-amplitude chips."""
    L = len(code)
    knots = np.concatenate([[0], np.cumsum(code)]) * chip
    tt = np.clip(t, 0.0, L * chip)
    idx = np.minimum((tt / chip).astype(np.int64), L - 1)
    return knots[idx] + code[idx] * (tt - idx * chip)


def filtered_waveform_value(bank: PhaseCodeBank, config: WaveformConfig, n: int, t):
    """Exact filtered waveform of transmitter ``n`` at time(s) ``t``."""
    code = bank.codes[n]
    t = np.asarray(t, dtype=float)
    gain = math.sqrt(config.L / config.T)
    val = gain * (_running_integral(code, config.chip, t) - _running_integral(code, config.chip, t - config.T_phi))
    val = np.where((t <= 0) | (t >= config.T + config.T_phi), 0.0, val)
    return val[()] if val.ndim == 0 else val


def waveform_energy(bank: PhaseCodeBank, config: WaveformConfig, n: int) -> float:
    """Analytic energy of the filtered waveform.

    Between consecutive breakpoints the waveform is linear, so Simpson's rule
    on each segment is exact for ``|s|^2``.
    """
    knots = np.concatenate([np.arange(config.L + 1) * config.chip, np.arange(config.L + 1) * config.chip + config.T_phi])
    knots = np.unique(np.clip(knots, 0, config.T + config.T_phi))
    a, b = knots[:-1], knots[1:]
    fa = np.abs(filtered_waveform_value(bank, config, n, a)) ** 2
    fb = np.abs(filtered_waveform_value(bank, config, n, b)) ** 2
    fm = np.abs(filtered_waveform_value(bank, config, n, 0.5 * (a + b))) ** 2
    # filtered_waveform_value zeroes t >= T+T_phi, but the limit from the left is 0 anyway
    return float(np.sum((b - a) / 6 * (fa + 4 * fm + fb)))


def signature_vector(bank, config, layout: RadarLayout, p, n, x, tau_min, M):
    """Samples ``s_n((m-1) T_s + tau_min - tau_pn(x))`` for m = 1..M."""
    tau = layout.delays(x)[p, n]
    t = np.arange(M) * config.T_s + tau_min - tau
    return filtered_waveform_value(bank, config, n, t)


def signatures(bank: PhaseCodeBank, config: WaveformConfig, layout: RadarLayout, points, tau_min, M) -> np.ndarray:
    """Mode matrices for many points at once, shape (P, K, M, N)."""
    pts = np.asarray(points, float).reshape(-1, 2)
    tau = layout.delays(pts)  # (P, N, K)
    t = np.arange(M) * config.T_s + tau_min
    out = np.empty((layout.n_rx, len(pts), M, layout.n_tx), complex)
    for p in range(layout.n_rx):
        for n in range(layout.n_tx):
            out[p, :, :, n] = filtered_waveform_value(bank, config, n, t[None, :] - tau[p, n][:, None])
    return out


def mode_matrix(bank, config, layout, p, x, tau_min, M) -> np.ndarray:
    """M x N matrix of the echo signatures seen by receiver ``p`` from ``x``."""
    return signatures(bank, config, layout, x, tau_min, M)[p, 0]
