import numpy as np
import pytest

from ffd import numerics as nx
from ffd.geometry import BoxAbs, TileGrid
from ffd.loss import build_targets, cross_entropy, smooth_l1, total_loss
from ffd.matching import Assignment


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_smooth_l1_continuity_and_values(beta):
    assert smooth_l1([beta], [0.0], beta) == 0.5 * beta
    assert smooth_l1([beta / 2], [0.0], beta) == pytest.approx(0.5 * (beta / 2) ** 2 / beta)
    assert smooth_l1([3 * beta], [0.0], beta) == pytest.approx(2.5 * beta)
    with pytest.raises(ValueError):
        smooth_l1([1.0], [0.0], 0.0)


def test_cross_entropy_uniform():
    assert cross_entropy([0.0, 0.0], 1) == pytest.approx(np.log(2))
    assert cross_entropy([3.0, 3.0], 0) == pytest.approx(np.log(2))


def test_build_targets_places_boxes():
    grid = TileGrid.for_image(64, 64, 32)
    gts = [(BoxAbs(40, 10, 8, 8), 1)]
    t = build_targets(Assignment([(0, 5)], [], 1), gts, grid, 4)
    assert t.classes.tolist() == [0] * 5 + [1] + [0] * 10
    np.testing.assert_allclose(t.boxes[5][:2], [0.25, 10 / 32])
    assert t.matched.tolist() == [5]


def test_total_loss_components():
    grid = TileGrid.for_image(64, 64, 32)
    gts = [(BoxAbs(40, 10, 8, 8), 1)]
    t = build_targets(Assignment([(0, 5)], [], 1), gts, grid, 4)
    logits = nx.Tensor(np.zeros((16, 2)), requires_grad=True, dtype=np.float64)
    boxes = nx.Tensor(t.boxes.copy(), requires_grad=True, dtype=np.float64)
    loss, lc, lb = total_loss(logits, boxes, t)
    assert lc == pytest.approx(np.log(2)) and lb == 0.0
    nx.backward(loss)
    assert np.all(boxes.grad == 0)
    loss0, _, lb0 = total_loss(logits, boxes, t, lam=0.0)
    assert lb0 == 0.0 and loss0.item() == pytest.approx(np.log(2))
