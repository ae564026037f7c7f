import itertools
import warnings

import numpy as np
import pytest

from ffd.geometry import BoxAbs, TileGrid, normalize_box
from ffd.matching import group_by_tile, hungarian, match_cost_matrix, tiled_match


def brute_force(cost):
    g, n = cost.shape
    return min(sum(cost[i, p[i]] for i in range(g)) for p in itertools.permutations(range(n), g))


def test_hungarian_against_enumeration(rng):
    for _ in range(200):
        g = int(rng.integers(1, 6))
        n = int(rng.integers(g, 9))
        cost = rng.uniform(-5, 20, (g, n))
        a = hungarian(cost)
        assert len({q for _, q in a.pairs}) == g
        assert abs(a.total_cost(cost) - brute_force(cost)) < 1e-9


def test_small_examples():
    assert hungarian([[1, 2], [2, 1]]).pairs == [(0, 0), (1, 1)]
    assert hungarian([[5, 1, 3]]).pairs == [(0, 1)]
    # all ties: lexicographically smallest pairs
    assert hungarian(np.ones((2, 3))).pairs == [(0, 0), (1, 1)]


def test_constant_shift_invariance(rng):
    cost = rng.uniform(0, 1, (3, 6))
    assert hungarian(cost).pairs == hungarian(cost + 7.25).pairs


def test_more_gts_than_slots_warns_in_tiled(rng):
    a = hungarian(rng.uniform(0, 1, (4, 2)))
    assert len(a.pairs) == 2 and len(a.unmatched_gts) == 2
    grid = TileGrid.for_image(64, 64, 32)
    gts = [(BoxAbs(5 + i, 5 + i, 4, 4), 1) for i in range(3)]
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        res = tiled_match(np.zeros((8, 2)), np.zeros((8, 4)), gts, grid, 2)
    assert any(issubclass(x.category, RuntimeWarning) for x in w)
    assert len(res.unmatched_gts) == 1


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        hungarian([[np.nan, 1.0]])


def test_tiled_equals_per_tile_oracle(rng):
    grid = TileGrid.for_image(96, 64, 32)
    n_g = 3
    n_q = grid.n_tiles * n_g
    for _ in range(20):
        logits = rng.standard_normal((n_q, 2))
        boxes = rng.standard_normal((n_q, 4)) * 0.3
        gts = [(BoxAbs(rng.uniform(1, 95), rng.uniform(1, 63), rng.uniform(3, 20),
                       rng.uniform(3, 20)), 1) for _ in range(int(rng.integers(0, 6)))]
        groups = group_by_tile(gts, grid)
        if any(len(m) > n_g for m in groups.values()):
            continue
        res = tiled_match(logits, boxes, gts, grid, n_g)
        assert res.n_cost_matrices == len(groups)
        total = 0.0
        for (r, c), members in groups.items():
            start = (r * grid.cols + c) * n_g
            cost = match_cost_matrix(logits[start:start + n_g], boxes[start:start + n_g],
                                     [gts[i] for i in members], (r, c), grid)
            total += brute_force(cost)
            for gi, q in res.pairs:
                if gi in members:
                    assert start <= q < start + n_g
        got = sum(match_cost_matrix(logits[q:q + 1], boxes[q:q + 1], [gts[gi]],
                                    divmod(q // n_g, grid.cols), grid)[0, 0]
                  for gi, q in res.pairs)
        assert abs(got - total) < 1e-9


def test_perfect_prediction_costs_only_class_term():
    grid = TileGrid.for_image(64, 64, 32)
    box = BoxAbs(40, 10, 8, 6)
    bn = np.array([normalize_box(box, (0, 1), grid)])
    cost = match_cost_matrix(np.array([[0.0, 0.0]]), bn, [(box, 1)], (0, 1), grid)
    assert cost[0, 0] == pytest.approx(np.log(2))
