"""Per-tile ground-truth to query matching.

Only tiles that contain at least one ground-truth centre build a cost matrix;
each is solved exactly with the Hungarian method over that tile's N_g slots.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import assign_tile, denormalize_array
from .head_index import tile_to_query_index
from .numerics.ops import log_softmax_rows, smooth_l1_elementwise


@dataclass
class Assignment:
    pairs: list = field(default_factory=list)        # (gt index, query slot/column)
    unmatched_gts: list = field(default_factory=list)
    n_cost_matrices: int = 0

    def total_cost(self, cost):
        return float(sum(cost[g, q] for g, q in self.pairs))


def _solve(cost):
    cols = kernels.linear_assignment(cost)
    return cols, float(cost[np.arange(len(cols)), cols].sum())


def _lex_min_assignment(cost):
    """Optimal row->column map (rows <= cols), lexicographically smallest among optima."""
    n, m = cost.shape
    assigned, opt = _solve(cost)
    assigned = [int(c) for c in assigned]
    tol = 1e-12 * max(1.0, float(np.abs(cost[np.arange(n), assigned]).sum()))
    used, prefix = set(), 0.0
    for i in range(n):
        for j in range(assigned[i]):
            if j in used:
                continue
            rest_cols = [c for c in range(m) if c not in used and c != j]
            sub = cost[np.ix_(range(i + 1, n), rest_cols)]
            sub_cols, sub_total = _solve(sub) if n - i - 1 else ([], 0.0)
            if prefix + cost[i, j] + sub_total <= opt + tol:
                assigned[i] = j
                assigned[i + 1:] = [rest_cols[c] for c in sub_cols]
                break
        used.add(assigned[i])
        prefix += cost[i, assigned[i]]
    return assigned


def hungarian(cost):
    """Exact minimum-cost matching of rows (ground truths) to columns (slots).

    Rectangular input is allowed; min(G, N) pairs are returned. Among optimal
    matchings the lexicographically smallest pair list wins.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    g, n = cost.shape
    if g == 0 or n == 0:
        return Assignment([], list(range(g)), 1)
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix contains non-finite entries")
    if g <= n:
        cols = _lex_min_assignment(cost)
        return Assignment([(i, c) for i, c in enumerate(cols)], [], 1)
    rows = _lex_min_assignment(cost.T)
    pairs = sorted((r, j) for j, r in enumerate(rows))
    matched = {r for r, _ in pairs}
    return Assignment(pairs, [i for i in range(g) if i not in matched], 1)


def match_cost_matrix(logits, boxes_norm, gts, tile, grid, lam=1.0, beta=1.0):
    """G×N_g cost: -log p(gt class) + λ·smooth-L1(decoded box, gt box) in pixels."""
    logits = np.asarray(logits, dtype=np.float64)
    logp = log_softmax_rows(logits)
    origin = np.tile(np.asarray(grid.origin(*tile), dtype=np.float64), (len(boxes_norm), 1))
    decoded = denormalize_array(boxes_norm, origin, grid)
    gt_boxes = np.array([list(b) for b, _ in gts], dtype=np.float64).reshape(-1, 4)
    gt_cls = np.array([c for _, c in gts], dtype=np.intp)
    cls_term = -logp[:, gt_cls].T
    diff = decoded[None, :, :] - gt_boxes[:, None, :]
    box_term = smooth_l1_elementwise(diff, beta).sum(axis=-1)
    return cls_term + lam * box_term


def match_cost(pred_logits, pred_box_norm, gt_box, gt_class, tile, grid, lam=1.0, beta=1.0):
    """Scalar matching cost for one prediction/ground-truth pair."""
    return float(match_cost_matrix(np.asarray(pred_logits)[None], np.asarray(pred_box_norm)[None],
                                   [(gt_box, gt_class)], tile, grid, lam, beta)[0, 0])


def group_by_tile(gts, grid):
    """{(row, col): [gt indices]} in first-seen order of tiles sorted row-major."""
    groups = {}
    for idx, (box, _) in enumerate(gts):
        groups.setdefault(assign_tile(box, grid), []).append(idx)
    return dict(sorted(groups.items()))


def tiled_match(class_logits, box_params, gts, grid, n_g, lam=1.0):
    """Match ground truths to query columns tile by tile.

    ``class_logits`` (N_q, K) and ``box_params`` (N_q, 4) hold one image's head
    output in tile-major column order. Returned pairs are (gt index, column).
    """
    class_logits = np.asarray(class_logits)
    box_params = np.asarray(box_params)
    grid_shape = (grid.rows, grid.cols)
    result = Assignment()
    for tile, members in group_by_tile(gts, grid).items():
        start = tile_to_query_index(tile[0], tile[1], 0, grid_shape, n_g)
        cost = match_cost_matrix(class_logits[start:start + n_g], box_params[start:start + n_g],
                                 [gts[i] for i in members], tile, grid, lam)
        local = hungarian(cost)
        result.n_cost_matrices += 1
        result.pairs.extend((members[g], start + s) for g, s in local.pairs)
        if local.unmatched_gts:
            warnings.warn(f"tile {tile} holds {len(members)} objects but only {n_g} query "
                          f"slots; {len(local.unmatched_gts)} left unmatched", RuntimeWarning,
                          stacklevel=2)
            result.unmatched_gts.extend(members[g] for g in local.unmatched_gts)
    result.pairs.sort()
    result.unmatched_gts.sort()
    return result
