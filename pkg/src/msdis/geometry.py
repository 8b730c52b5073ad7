"""Radar layout, bistatic delays, separability and search grids."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

C0 = 299_792_458.0  # m/s


@dataclass(frozen=True)
class RadarLayout:
    """Transmitter/receiver positions of a distributed MIMO radar in the plane.

    Attributes
    ----------
    tx_positions : (N, 2) array
    rx_positions : (P, 2) array
    c : float
        Propagation speed in m/s.
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    c: float = C0

    def __post_init__(self):
        tx = np.array(self.tx_positions, dtype=float).reshape(-1, 2)
        rx = np.array(self.rx_positions, dtype=float).reshape(-1, 2)
        if len(tx) < 1 or len(rx) < 1:
            raise ValueError("layout needs at least one transmitter and one receiver")
        if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(rx))):
            raise ValueError("positions must be finite")
        if not self.c > 0:
            raise ValueError("propagation speed must be positive")
        tx.setflags(write=False)
        rx.setflags(write=False)
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)

    @property
    def n_tx(self) -> int:
        return len(self.tx_positions)

    @property
    def n_rx(self) -> int:
        return len(self.rx_positions)

    def delays(self, points) -> np.ndarray:
        """All bistatic delays, shape (P, N, *points.shape[:-1])."""
        x = np.asarray(points, dtype=float)
        d_rx = np.linalg.norm(x[None, ...] - self.rx_positions.reshape((-1,) + (1,) * (x.ndim - 1) + (2,)), axis=-1)
        d_tx = np.linalg.norm(x[None, ...] - self.tx_positions.reshape((-1,) + (1,) * (x.ndim - 1) + (2,)), axis=-1)
        return (d_rx[:, None] + d_tx[None, :]) / self.c


def bistatic_delay(layout: RadarLayout, p: int, n: int, x) -> float:
    """Propagation time from transmitter ``n`` via ``x`` to receiver ``p``."""
    if not (0 <= p < layout.n_rx and 0 <= n < layout.n_tx):
        raise IndexError(f"pair (p={p}, n={n}) out of range for {layout.n_rx}x{layout.n_tx} layout")
    x = np.asarray(x, dtype=float)
    return float((np.linalg.norm(layout.rx_positions[p] - x) + np.linalg.norm(layout.tx_positions[n] - x)) / layout.c)


@dataclass(frozen=True)
class SearchGrid:
    """Coarse search grid with an activity mask (the current search set)."""

    points: np.ndarray
    spacing: float
    active_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        mask = np.ones(len(pts), bool) if self.active_mask is None else np.array(self.active_mask, bool)
        if mask.shape != (len(pts),):
            raise ValueError("mask length must match number of points")
        pts.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "active_mask", mask)

    @classmethod
    def rectangular(cls, x_range, y_range, spacing: float) -> "SearchGrid":
        """Axis-aligned grid covering ``[x0, x1] x [y0, y1]`` inclusively."""
        xs = _axis(x_range, spacing)
        ys = _axis(y_range, spacing)
        xx, yy = np.meshgrid(xs, ys, indexing="xy")
        return cls(np.column_stack([xx.ravel(), yy.ravel()]), spacing)

    def __len__(self):
        return len(self.points)

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active_mask)

    def with_mask(self, mask) -> "SearchGrid":
        return SearchGrid(self.points, self.spacing, mask)

    def shape(self) -> tuple[int, int] | None:
        """(ny, nx) when the points form a full rectangular lattice."""
        nx = len(np.unique(self.points[:, 0]))
        ny = len(np.unique(self.points[:, 1]))
        return (ny, nx) if nx * ny == len(self.points) else None


def _axis(bounds, spacing):
    lo, hi = float(bounds[0]), float(bounds[1])
    n = int(np.floor((hi - lo) / spacing + 1e-9)) + 1
    return lo + spacing * np.arange(n)


@dataclass(frozen=True)
class FineGrid:
    """Fine lattice used to build the neighbourhood of a detected target.

    The lattice is never materialised; only the ball around a point is.
    """

    origin: np.ndarray
    spacing: float

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, float).reshape(2))
        if not self.spacing > 0:
            raise ValueError("fine spacing must be positive")

    @classmethod
    def for_grid(cls, grid: SearchGrid, spacing: float) -> "FineGrid":
        if not spacing < grid.spacing / 10:
            raise ValueError(f"fine spacing {spacing} must be < coarse spacing/10 = {grid.spacing / 10}")
        return cls(grid.points.min(axis=0), spacing)

    def ball(self, center, radius: float, max_points: int | None = 512) -> np.ndarray:
        """Lattice points within ``radius`` (inclusive) of ``center``.

        When the ball holds more than ``max_points`` points, a sub-lattice
        anchored at the lattice point nearest ``center`` with an integer
        stride is returned instead, using the smallest stride that fits.
        """
        center = np.asarray(center, float)
        anchor = self.origin + np.round((center - self.origin) / self.spacing) * self.spacing
        stride = 1
        if max_points is not None:
            approx = np.pi * (radius / self.spacing) ** 2
            stride = max(1, int(np.floor(np.sqrt(approx / max_points))))
        while True:
            pts = _lattice_ball(anchor, center, radius, self.spacing * stride)
            if max_points is None or len(pts) <= max_points:
                return pts
            stride += 1


def _lattice_ball(anchor, center, radius, step):
    span = int(np.ceil((radius + np.linalg.norm(anchor - center)) / step)) + 1
    k = np.arange(-span, span + 1)
    kx, ky = np.meshgrid(k, k, indexing="xy")
    pts = anchor + step * np.column_stack([kx.ravel(), ky.ravel()])
    keep = np.linalg.norm(pts - center, axis=1) <= radius * (1 + 1e-12)
    return pts[keep]


def delay_window(layout: RadarLayout, grid: SearchGrid) -> tuple[float, float]:
    """Smallest and largest bistatic delay over all pairs and grid points."""
    if len(grid) == 0:
        raise ValueError("empty grid")
    tau = layout.delays(grid.points)
    return float(tau.min()), float(tau.max())


def max_delay_gap(layout: RadarLayout, x_a, x_b) -> np.ndarray:
    """max over (p, n) of |tau_pn(x_a) - tau_pn(x_b)|, broadcast over leading axes."""
    da = layout.delays(x_a)
    db = layout.delays(x_b)
    gap = np.abs(da - db)
    return gap.reshape(-1, *gap.shape[2:]).max(axis=0)


def are_separable(layout: RadarLayout, x_a, x_b, bandwidth_hz: float) -> bool:
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth must be positive")
    return bool(max_delay_gap(layout, x_a, x_b) > 1.0 / bandwidth_hz)


def prune_grid(grid: SearchGrid, layout: RadarLayout, detections, bandwidth_hz: float) -> SearchGrid:
    """Keep only active points separable from every detection."""
    detections = np.asarray(detections, float).reshape(-1, 2)
    if len(detections) == 0:
        return grid
    tau_g = layout.delays(grid.points)  # (P, N, G)
    keep = grid.active_mask.copy()
    for x in detections:
        tau_x = layout.delays(x)[..., None]
        gap = np.abs(tau_g - tau_x).reshape(-1, len(grid)).max(axis=0)
        keep &= gap > 1.0 / bandwidth_hz
    return grid.with_mask(keep)
