import numpy as np
import pytest

from ffd.geometry import BoxAbs
from ffd.metrics import (AREA_BANDS, COCO_THRESHOLDS, Detection, GroundTruth, ap_at_iou,
                         coco_style_report)
from oracles import pr_ap

BANDS = {"all": "AP", "small": "AP_S", "medium": "AP_M", "large": "AP_L"}


def random_scene(rng, n_images=2):
    dets, gts = [], []
    for img in range(n_images):
        for _ in range(int(rng.integers(0, 6))):
            s = rng.choice([6.0, 20.0, 45.0])
            gts.append(GroundTruth(BoxAbs(rng.uniform(0, 100), rng.uniform(0, 100),
                                          s * rng.uniform(0.7, 1.3), s * rng.uniform(0.7, 1.3)),
                                   1, img))
    for _ in range(int(rng.integers(0, 21))):
        if gts and rng.random() < 0.6:
            g = gts[int(rng.integers(len(gts)))]
            box = BoxAbs(g.box.cx + rng.normal(0, 2), g.box.cy + rng.normal(0, 2),
                         g.box.w * rng.uniform(0.8, 1.2), g.box.h * rng.uniform(0.8, 1.2))
            img = g.image_id
        else:
            box = BoxAbs(rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(3, 50),
                         rng.uniform(3, 50))
            img = int(rng.integers(n_images))
        dets.append(Detection(box, 1, float(rng.uniform(0, 1)), img))
    return dets, gts


def oracle_report(dets, gts):
    d = [(x.image_id, tuple(x.box), x.score) for x in dets]
    g = [(x.image_id, tuple(x.box)) for x in gts]
    out = {}
    for band, key in BANDS.items():
        vals = [pr_ap(d, g, t, AREA_BANDS[band]) for t in COCO_THRESHOLDS]
        out[key] = None if vals[0] is None else float(np.mean(vals))
    return out


def test_matches_oracle_on_random_scenes():
    rng = np.random.default_rng(7)
    for _ in range(60):
        dets, gts = random_scene(rng)
        rep = coco_style_report(dets, gts).to_dict()
        for key, want in oracle_report(dets, gts).items():
            if want is None:
                assert rep[key] is None
            else:
                assert rep[key] == pytest.approx(want, abs=1e-9)


def test_trivial_cases():
    g = [GroundTruth(BoxAbs(10, 10, 5, 5), 1)]
    assert ap_at_iou([Detection(BoxAbs(10, 10, 5, 5), 1, 0.9)], g) == 1.0
    assert ap_at_iou([], g) == 0.0
    assert ap_at_iou([Detection(BoxAbs(10, 10, 5, 5), 1, 0.9)], []) is None
    with pytest.raises(ValueError):
        ap_at_iou([], g, 1.0)


def test_duplicate_detection_counts_as_false_positive():
    g = [GroundTruth(BoxAbs(10, 10, 5, 5), 1)]
    one = ap_at_iou([Detection(BoxAbs(10, 10, 5, 5), 1, 0.9)], g)
    two = ap_at_iou([Detection(BoxAbs(10, 10, 5, 5), 1, 0.9),
                     Detection(BoxAbs(10, 10, 5, 5), 1, 0.8)], g)
    assert one == two == 1.0  # trailing FP after full recall does not lower AP
    rev = ap_at_iou([Detection(BoxAbs(50, 50, 5, 5), 1, 0.95),
                     Detection(BoxAbs(10, 10, 5, 5), 1, 0.9)], g)
    assert rev == pytest.approx(0.5)


def test_ap_monotone_in_threshold():
    rng = np.random.default_rng(3)
    for _ in range(20):
        dets, gts = random_scene(rng)
        if not gts:
            continue
        vals = [ap_at_iou(dets, gts, t) for t in COCO_THRESHOLDS]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_permutation_invariance():
    rng = np.random.default_rng(11)
    dets, gts = random_scene(rng, 3)
    perm = rng.permutation(len(gts))
    a = coco_style_report(dets, gts).to_dict()
    b = coco_style_report(dets, [gts[i] for i in perm]).to_dict()
    assert a == b


def test_band_boundaries():
    small = GroundTruth(BoxAbs(10, 10, 10, 10), 1)    # area exactly 100 -> small
    medium = GroundTruth(BoxAbs(50, 50, 30, 30), 1)   # area exactly 900 -> medium
    rep = coco_style_report([Detection(small.box, 1, 0.9)], [small, medium])
    assert rep.AP_S == 1.0 and rep.AP_M == 0.0 and rep.AP_L is None
