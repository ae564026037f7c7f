"""COCO-style average precision with small / medium / large area bands.

Bands are on ground-truth box area in pixels: small [0, 10²], medium
(10², 30²], large (30², ∞). Out-of-band ground truths are ignored, as are
detections matched to them and unmatched detections whose own area is out of
band. AP uses 101-point interpolated precision and is averaged over classes
that have ground truth, then over IoU thresholds.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import BoxAbs, iou_matrix

COCO_THRESHOLDS = tuple(np.round(np.arange(0.5, 0.951, 0.05), 2).tolist())
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
AREA_BANDS = {
    "all": (0.0, float("inf"), True),
    "small": (0.0, 100.0, True),
    "medium": (100.0, 900.0, False),
    "large": (900.0, float("inf"), False),
}


@dataclass
class Detection:
    box: BoxAbs
    class_id: int
    score: float
    image_id: object = 0


@dataclass
class GroundTruth:
    box: BoxAbs
    class_id: int
    image_id: object = 0


@dataclass
class EvalReport:
    AP: Optional[float]
    AP_S: Optional[float]
    AP_M: Optional[float]
    AP_L: Optional[float]
    per_threshold: dict = field(default_factory=dict)

    def to_dict(self):
        return {"AP": self.AP, "AP_S": self.AP_S, "AP_M": self.AP_M, "AP_L": self.AP_L,
                "per_threshold": {f"{t:.2f}": v for t, v in self.per_threshold.items()}}


def in_band(area, band):
    lo, hi, closed_lo = AREA_BANDS[band] if isinstance(band, str) else band
    return (area >= lo if closed_lo else area > lo) and area <= hi


def _match_image(dets, gts, threshold, band):
    """Greedy matching for one (image, class); returns (scores, is_tp, ignored) per det."""
    gt_ignore = np.array([not in_band(g.box.w * g.box.h, band) for g in gts], dtype=bool)
    gt_order = np.argsort(gt_ignore, kind="stable")  # in-band ground truths first
    gts = [gts[i] for i in gt_order]
    gt_ignore = gt_ignore[gt_order]
    ious = iou_matrix([d.box for d in dets], [g.box for g in gts]) if gts else \
        np.zeros((len(dets), 0))
    gt_taken = np.zeros(len(gts), dtype=bool)
    out = []
    for di, det in enumerate(dets):
        best, m = min(threshold, 1 - 1e-10), -1
        for gi in range(len(gts)):
            if gt_taken[gi]:
                continue
            if m > -1 and not gt_ignore[m] and gt_ignore[gi]:
                break
            if ious[di, gi] < best:
                continue
            best, m = ious[di, gi], gi
        if m >= 0:
            gt_taken[m] = True
            out.append((det.score, True, bool(gt_ignore[m])))
        else:
            out.append((det.score, False, not in_band(det.box.w * det.box.h, band)))
    return out, int((~gt_ignore).sum())


def _interpolated_ap(is_tp, n_gt):
    tp = np.cumsum(is_tp)
    fp = np.cumsum(~is_tp)
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, np.finfo(np.float64).tiny)
    # make precision monotone non-increasing from the right
    precision = np.maximum.accumulate(precision[::-1])[::-1] if len(precision) else precision
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    q = np.array([precision[i] if i < len(precision) else 0.0 for i in idx])
    return float(q.mean())


def ap_at_iou(detections, gts, iou_threshold=0.5, band="all"):
    """AP at one IoU threshold; None when no in-band ground truth exists."""
    if not 0 < iou_threshold < 1:
        raise ValueError("iou threshold must lie in (0, 1)")
    classes = sorted({g.class_id for g in gts})
    by_key_det, by_key_gt = {}, {}
    for order, d in enumerate(detections):
        by_key_det.setdefault((d.class_id, d.image_id), []).append((order, d))
    for g in gts:
        by_key_gt.setdefault((g.class_id, g.image_id), []).append(g)
    aps = []
    for cls_id in classes:
        rows, n_gt = [], 0
        images = {k[1] for k in by_key_gt if k[0] == cls_id} | \
                 {k[1] for k in by_key_det if k[0] == cls_id}
        for img in sorted(images, key=repr):
            dets = sorted(by_key_det.get((cls_id, img), []), key=lambda od: (-od[1].score, od[0]))
            matched, n = _match_image([d for _, d in dets], by_key_gt.get((cls_id, img), []),
                                      iou_threshold, band)
            n_gt += n
            rows.extend((o, *r) for (o, _), r in zip(dets, matched))
        if n_gt == 0:
            continue
        rows = [r for r in rows if not r[3]]
        rows.sort(key=lambda r: (-r[1], r[0]))
        is_tp = np.array([r[2] for r in rows], dtype=bool)
        aps.append(_interpolated_ap(is_tp, n_gt))
    return float(np.mean(aps)) if aps else None


def coco_style_report(detections, gts, thresholds=COCO_THRESHOLDS):
    """AP averaged over ``thresholds`` overall and per area band."""
    def mean_over(band):
        vals = [ap_at_iou(detections, gts, t, band) for t in thresholds]
        return None if vals[0] is None else float(np.mean(vals))

    per_t = {t: ap_at_iou(detections, gts, t, "all") for t in thresholds}
    overall = None if not per_t or next(iter(per_t.values())) is None else \
        float(np.mean(list(per_t.values())))
    return EvalReport(overall, mean_over("small"), mean_over("medium"), mean_over("large"), per_t)
