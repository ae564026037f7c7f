"""Training objective: cross-entropy over every query plus smooth-L1 on matched boxes."""

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .geometry import normalize_box
from .head_index import query_index_to_tile

BACKGROUND = 0


def cross_entropy(logits, target):
    """-log softmax(logits)[target] for one logit vector."""
    logits = np.asarray(logits, dtype=np.float64)
    return float(-nx.log_softmax_rows(logits[None])[0, int(target)])


def smooth_l1(pred, target, beta=1.0):
    """Smooth-L1 summed over coordinates; |d| < beta selects the quadratic branch."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(nx.smooth_l1_elementwise(d, beta).sum())


@dataclass
class QueryTargets:
    classes: np.ndarray       # (N_q,) int, 0 = background
    boxes: np.ndarray         # (N_q, 4) normalised targets, zero rows for background
    matched: np.ndarray       # sorted query indices carrying a box target

    @classmethod
    def concat(cls, parts):
        offsets = np.cumsum([0] + [len(p.classes) for p in parts[:-1]])
        return cls(np.concatenate([p.classes for p in parts]),
                   np.concatenate([p.boxes for p in parts]),
                   np.concatenate([p.matched + o for p, o in zip(parts, offsets)]).astype(np.intp))


def build_targets(assignment, gts, grid, n_g):
    """Per-query targets: matched queries get their gt class and tile-relative box."""
    n_q = grid.rows * grid.cols * n_g
    classes = np.zeros(n_q, dtype=np.intp)
    boxes = np.zeros((n_q, 4), dtype=np.float64)
    for gt_index, column in assignment.pairs:
        box, cls_id = gts[gt_index]
        tile_row, tile_col, _ = query_index_to_tile(column, (grid.rows, grid.cols), n_g)
        classes[column] = cls_id
        boxes[column] = normalize_box(box, (tile_row, tile_col), grid)
    matched = np.flatnonzero(classes != BACKGROUND).astype(np.intp)
    return QueryTargets(classes, boxes, matched)


def total_loss(class_logits, box_params, targets, lam=1.0, beta=1.0):
    """L = mean CE over all queries + λ · mean smooth-L1 over matched queries.

    Returns the scalar loss tensor and the (class, box) components as floats.
    """
    l_cls = nx.cross_entropy(class_logits, targets.classes)
    if len(targets.matched) == 0 or lam == 0:
        return l_cls, l_cls.item(), 0.0
    picked = nx.take_rows(box_params, targets.matched)
    l_box = nx.smooth_l1(picked, targets.boxes[targets.matched], beta)
    loss = nx.add(l_cls, nx.scale(l_box, lam))
    return loss, l_cls.item(), l_box.item()
