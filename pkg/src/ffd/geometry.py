"""Boxes, tiles and the tile-relative box encoding.

Absolute boxes are (cx, cy, w, h) in pixels. A box is encoded relative to the
top-left corner of the tile holding its centre: offsets are in tile units and
extents are log-ratios to the full image size.
"""

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConfigError


class BoxAbs(NamedTuple):
    cx: float
    cy: float
    w: float
    h: float

    @property
    def area(self):
        return self.w * self.h

    def corners(self):
        return (self.cx - self.w / 2, self.cy - self.h / 2,
                self.cx + self.w / 2, self.cy + self.h / 2)


class BoxNorm(NamedTuple):
    ncx: float
    ncy: float
    lw: float
    lh: float


@dataclass(frozen=True)
class TileGrid:
    tile_w: int
    tile_h: int
    rows: int
    cols: int

    @classmethod
    def for_image(cls, width, height, tile):
        tw, th = (tile, tile) if isinstance(tile, int) else tile
        if width % tw or height % th:
            raise ConfigError(f"image {width}x{height} is not divisible by tile {tw}x{th}")
        return cls(tw, th, height // th, width // tw)

    @property
    def image_w(self):
        return self.tile_w * self.cols

    @property
    def image_h(self):
        return self.tile_h * self.rows

    @property
    def n_tiles(self):
        return self.rows * self.cols

    def origin(self, tile_row, tile_col):
        """Top-left pixel corner (g_x, g_y) of a tile."""
        return tile_col * self.tile_w, tile_row * self.tile_h


def assign_tile(box, grid):
    """(row, col) of the tile containing the box centre; boundary ties go up."""
    cx, cy = box[0], box[1]
    if not (0 <= cx <= grid.image_w and 0 <= cy <= grid.image_h):
        raise ValueError(f"box centre ({cx}, {cy}) lies outside the "
                         f"{grid.image_w}x{grid.image_h} image")
    col = min(int(math.floor(cx / grid.tile_w)), grid.cols - 1)
    row = min(int(math.floor(cy / grid.tile_h)), grid.rows - 1)
    return row, col


def normalize_box(box, tile, grid):
    """Encode an absolute box relative to ``tile`` = (row, col)."""
    cx, cy, w, h = box
    if w <= 0 or h <= 0:
        raise ValueError(f"box extents must be positive, got w={w}, h={h}")
    gx, gy = grid.origin(*tile)
    return BoxNorm((cx - gx) / grid.tile_w, (cy - gy) / grid.tile_h,
                   math.log(w / grid.image_w), math.log(h / grid.image_h))


def denormalize_box(bn, tile, grid):
    """Inverse of :func:`normalize_box`."""
    gx, gy = grid.origin(*tile)
    return BoxAbs(bn[0] * grid.tile_w + gx, bn[1] * grid.tile_h + gy,
                  math.exp(bn[2]) * grid.image_w, math.exp(bn[3]) * grid.image_h)


def denormalize_array(b, origins, grid):
    """Vectorised decode: ``b`` (M, 4) encodings, ``origins`` (M, 2) tile corners."""
    b = np.asarray(b, dtype=np.float64)
    origins = np.asarray(origins, dtype=np.float64)
    out = np.empty_like(b)
    out[:, 0] = b[:, 0] * grid.tile_w + origins[:, 0]
    out[:, 1] = b[:, 1] * grid.tile_h + origins[:, 1]
    out[:, 2] = np.exp(b[:, 2]) * grid.image_w
    out[:, 3] = np.exp(b[:, 3]) * grid.image_h
    return out


def intersection_area(a, b):
    ax0, ay0, ax1, ay1 = BoxAbs(*a).corners()
    bx0, by0, bx1, by1 = BoxAbs(*b).corners()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    return iw * ih if iw > 0 and ih > 0 else 0.0


def iou(a, b):
    inter = intersection_area(a, b)
    if inter <= 0:
        return 0.0
    union = a[2] * a[3] + b[2] * b[3] - inter
    return min(1.0, inter / union)


def iou_matrix(boxes_a, boxes_b):
    """Pairwise IoU between (M, 4) and (K, 4) arrays of (cx, cy, w, h)."""
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    a0, a1 = a[:, :2] - a[:, 2:] / 2, a[:, :2] + a[:, 2:] / 2
    b0, b1 = b[:, :2] - b[:, 2:] / 2, b[:, :2] + b[:, 2:] / 2
    lo = np.maximum(a0[:, None], b0[None])
    hi = np.minimum(a1[:, None], b1[None])
    wh = np.clip(hi - lo, 0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(inter > 0, inter / union, 0.0)
    return np.minimum(out, 1.0)


def box_from_extents(min_x, min_y, max_x, max_y):
    """Box covering pixels min..max inclusive (each pixel is a unit square)."""
    w = max_x - min_x + 1
    h = max_y - min_y + 1
    return BoxAbs(min_x + w / 2, min_y + h / 2, float(w), float(h))


def box_from_mask(pixels: Iterable):
    """Axis-aligned box of an instance given as (x, y) pixels or a boolean mask.

    The bounding box of the convex hull equals the bounding box of the pixel
    set, so the hull is never built.
    """
    if isinstance(pixels, np.ndarray) and pixels.dtype == bool and pixels.ndim == 2:
        ys, xs = np.nonzero(pixels)
    else:
        pts = np.asarray(list(pixels) if not isinstance(pixels, np.ndarray) else pixels)
        if pts.size == 0:
            raise ValueError("cannot build a box from an empty pixel set")
        xs, ys = pts[:, 0], pts[:, 1]
    if len(xs) == 0:
        raise ValueError("cannot build a box from an empty pixel set")
    return box_from_extents(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
