import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msdis.geometry import (C0, FineGrid, RadarLayout, SearchGrid, are_separable, bistatic_delay, delay_window,
                            max_delay_gap, prune_grid)

from conftest import LAYOUT, Q1, Q2

W = 10e6
coord = st.floats(-1e4, 1e4, allow_nan=False)
point = st.tuples(coord, coord)


def brute_gap(layout, a, b):
    gaps = []
    for p, n in itertools.product(range(layout.n_rx), range(layout.n_tx)):
        gaps.append(abs(bistatic_delay(layout, p, n, a) - bistatic_delay(layout, p, n, b)))
    return max(gaps)


def test_collocated_delay_is_zero():
    lay = RadarLayout([(0, 0)], [(0, 0)])
    assert bistatic_delay(lay, 0, 0, (0, 0)) == 0.0


def test_monostatic_circle():
    lay = RadarLayout([(0, 0)], [(0, 0)])
    r = C0 * 5e-7
    for ang in np.linspace(0, 2 * np.pi, 7):
        assert bistatic_delay(lay, 0, 0, (r * np.cos(ang), r * np.sin(ang))) == pytest.approx(1e-6, rel=1e-12)


def test_monostatic_q1():
    lay = RadarLayout([(0, 0)], [(0, 0)])
    rng = math.sqrt(4000.0 ** 2 + 3650.0 ** 2)  # 5415.02...
    assert rng == pytest.approx(5415.0254, abs=1e-4)
    assert bistatic_delay(lay, 0, 0, Q1) == pytest.approx(2 * rng / C0, rel=1e-14)


def test_index_out_of_range():
    with pytest.raises(IndexError):
        bistatic_delay(LAYOUT, 2, 0, Q1)


def test_layout_validation():
    with pytest.raises(ValueError):
        RadarLayout(np.zeros((0, 2)), [(0, 0)])
    with pytest.raises(ValueError):
        RadarLayout([(np.inf, 0)], [(0, 0)])
    with pytest.raises(ValueError):
        RadarLayout([(0, 0)], [(0, 0)], c=0)


def test_vectorised_delays_match_scalar():
    pts = np.array([Q1, Q2, (0.0, 10.0)])
    tau = LAYOUT.delays(pts)
    for p, n, k in itertools.product(range(2), range(2), range(3)):
        assert tau[p, n, k] == pytest.approx(bistatic_delay(LAYOUT, p, n, pts[k]), rel=1e-15)


def test_delay_window_enumeration():
    one = SearchGrid(np.array([Q1]), 10.0)
    lay1 = RadarLayout([(0, 0)], [(100, 0)])
    lo, hi = delay_window(lay1, one)
    assert lo == hi == bistatic_delay(lay1, 0, 0, Q1)
    two = SearchGrid(np.array([Q1, Q2]), 10.0)
    all_tau = [bistatic_delay(LAYOUT, p, n, g) for p in range(2) for n in range(2) for g in (Q1, Q2)]
    assert delay_window(LAYOUT, two) == (min(all_tau), max(all_tau))
    farther = SearchGrid(np.array([Q1, Q2, (9000.0, 9000.0)]), 10.0)
    assert delay_window(LAYOUT, farther)[1] >= delay_window(LAYOUT, two)[1]
    with pytest.raises(ValueError):
        delay_window(LAYOUT, SearchGrid(np.zeros((0, 2)), 10.0))


def test_separability_basics():
    assert not are_separable(LAYOUT, Q1, Q1, W)
    assert are_separable(LAYOUT, Q1, Q2, W) == (brute_gap(LAYOUT, Q1, Q2) > 1 / W)
    assert are_separable(LAYOUT, Q1, Q2, W)


def test_separability_strict_boundary():
    # monostatic on the x-axis: moving the target by d changes the delay by exactly 2d/c
    lay = RadarLayout([(0, 0)], [(0, 0)], c=1.0)
    assert not are_separable(lay, (10.0, 0), (10.5, 0), 1.0)  # gap exactly 1/W
    assert are_separable(lay, (10.0, 0), (10.5 + 1e-9, 0), 1.0)


@settings(max_examples=50, deadline=None)
@given(point, point, point, point)
def test_tx_rx_exchange_symmetry(tx, rx, x, _):
    a = RadarLayout([tx], [rx])
    b = RadarLayout([rx], [tx])
    assert bistatic_delay(a, 0, 0, x) == pytest.approx(bistatic_delay(b, 0, 0, x), rel=1e-12, abs=1e-18)


@settings(max_examples=50, deadline=None)
@given(point, point)
def test_separability_symmetric(a, b):
    assert are_separable(LAYOUT, a, b, W) == are_separable(LAYOUT, b, a, W)
    assert max_delay_gap(LAYOUT, a, b) == pytest.approx(brute_gap(LAYOUT, a, b), rel=1e-12, abs=1e-20)


@pytest.fixture
def grid():
    return SearchGrid.rectangular((3930, 4070), (3630, 3870), 10.0)


def test_rectangular_grid(grid):
    assert len(grid) == 15 * 25
    assert grid.shape() == (25, 15)
    assert grid.active_mask.all()
    assert len(np.unique(grid.points, axis=0)) == len(grid)


def test_prune_empty_detections_is_identity(grid):
    assert prune_grid(grid, LAYOUT, [], W) is grid


def test_prune_removes_detection_point(grid):
    g = grid.points[37]
    pruned = prune_grid(grid, LAYOUT, [g], W)
    assert not pruned.active_mask[37]


def test_prune_matches_brute_force(grid):
    pruned = prune_grid(grid, LAYOUT, [Q1], W)
    for k, g in enumerate(grid.points):
        assert pruned.active_mask[k] == (brute_gap(LAYOUT, g, Q1) > 1 / W)
    # 500 m away along the axis is far outside the resolution region
    far = grid.points[np.argmin(np.linalg.norm(grid.points - (Q1 + (0, 200)), axis=1))]
    assert pruned.active_mask[np.flatnonzero((grid.points == far).all(axis=1))[0]]
    lay500 = SearchGrid(np.array([Q1 + (0.0, 500.0)]), 10.0)
    assert prune_grid(lay500, LAYOUT, [Q1], W).active_mask[0] == (brute_gap(LAYOUT, Q1 + (0, 500), Q1) > 1 / W)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 374), min_size=0, max_size=4))
def test_prune_subset_and_idempotent(idx):
    grid = SearchGrid.rectangular((3930, 4070), (3630, 3870), 10.0)
    dets = grid.points[idx]
    once = prune_grid(grid, LAYOUT, dets, W)
    twice = prune_grid(once, LAYOUT, dets, W)
    assert np.all(once.active_mask <= grid.active_mask)
    np.testing.assert_array_equal(once.active_mask, twice.active_mask)
    for k in np.flatnonzero(~once.active_mask):
        assert any(brute_gap(LAYOUT, grid.points[k], d) <= 1 / W for d in dets)


def test_fine_grid_ball(grid):
    fine = FineGrid.for_grid(grid, 0.05)
    ball = fine.ball(Q1, 1.0, max_points=None)
    # radius 1 m at 5 cm pitch: lattice count near pi * 20^2
    assert abs(len(ball) - np.pi * 400) < 0.02 * np.pi * 400
    assert np.all(np.linalg.norm(ball - Q1, axis=1) <= 1.0 + 1e-9)
    big = fine.ball(Q1, C0 / W, max_points=512)
    assert 0 < len(big) <= 512
    assert np.all(np.linalg.norm(big - Q1, axis=1) <= C0 / W * (1 + 1e-12))
    assert any(np.allclose(b, Q1) for b in big)
    with pytest.raises(ValueError):
        FineGrid.for_grid(grid, 1.0)
