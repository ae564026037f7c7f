import math

import numpy as np
import pytest

from ffd.errors import ConfigError
from ffd.geometry import (BoxAbs, TileGrid, assign_tile, box_from_mask, denormalize_box,
                          intersection_area, iou, iou_matrix, normalize_box)


def test_assign_tile_examples():
    g = TileGrid.for_image(320, 256, 32)
    assert (g.rows, g.cols) == (8, 10)
    assert assign_tile((40, 70, 10, 10), g) == (2, 1)
    assert assign_tile((320, 256, 4, 4), g) == (7, 9)  # far edge clamps
    with pytest.raises(ValueError):
        assign_tile((321, 10, 4, 4), g)


def test_grid_rejects_indivisible():
    with pytest.raises(ConfigError):
        TileGrid.for_image(100, 64, 32)


def test_normalize_known_values():
    g = TileGrid.for_image(320, 256, 32)
    bn = normalize_box(BoxAbs(48, 80, 32, 16), (2, 1), g)
    assert bn.ncx == pytest.approx(0.5) and bn.ncy == pytest.approx(0.5)
    assert bn.lw == pytest.approx(math.log(0.1)) and bn.lh == pytest.approx(math.log(1 / 16))
    with pytest.raises(ValueError):
        normalize_box(BoxAbs(48, 80, 0, 16), (2, 1), g)


def test_round_trip_random(rng):
    g = TileGrid.for_image(320, 256, 32)
    for _ in range(1000):
        b = BoxAbs(rng.uniform(0, 320), rng.uniform(0, 256), rng.uniform(1, 200),
                   rng.uniform(1, 200))
        tile = assign_tile(b, g)
        np.testing.assert_allclose(denormalize_box(normalize_box(b, tile, g), tile, g), b,
                                   atol=1e-5)


def test_iou_cases():
    a = BoxAbs(5, 5, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BoxAbs(15, 5, 10, 10)) == 0.0  # touching edge
    assert intersection_area(a, BoxAbs(10, 10, 10, 10)) == 25
    assert iou(a, BoxAbs(10, 10, 10, 10)) == pytest.approx(25 / 175)
    m = iou_matrix([a, BoxAbs(15, 5, 10, 10)], [a])
    np.testing.assert_allclose(m[:, 0], [1.0, 0.0])


def test_box_from_mask():
    m = np.zeros((10, 10), bool)
    m[2:5, 3:9] = True
    assert box_from_mask(m) == BoxAbs(6.0, 3.5, 6.0, 3.0)
    assert box_from_mask([(4, 4)]) == BoxAbs(4.5, 4.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        box_from_mask(np.zeros((3, 3), bool))
