"""Postprocessing-free decoding: every query stands alone, no NMS, no merging."""

import numpy as np

from . import numerics as nx
from .data import image_to_tensor_data
from .errors import ConfigError
from .geometry import BoxAbs, TileGrid, denormalize_array
from .head_index import query_count
from .metrics import Detection


def decode(class_logits, box_params, grid, n_g, threshold=0.5, image_id=0):
    """Detections for one image's head output.

    Each query takes its argmax class with that softmax probability as score;
    it is emitted when the class is not background and the score reaches
    ``threshold``. Boxes are decoded relative to the query's tile.
    """
    logits = np.asarray(class_logits, dtype=np.float64)
    boxes = np.asarray(box_params, dtype=np.float64)
    n_q = query_count((grid.rows, grid.cols), n_g)
    if logits.shape[0] != n_q or boxes.shape != (n_q, 4):
        raise ConfigError(f"head output has {logits.shape[0]} queries, grid implies {n_q}")
    probs = np.exp(nx.log_softmax_rows(logits))
    cls = probs.argmax(axis=1)
    score = probs[np.arange(n_q), cls]
    tiles = np.arange(n_q) // n_g
    origins = np.stack([(tiles % grid.cols) * grid.tile_w, (tiles // grid.cols) * grid.tile_h], 1)
    decoded = denormalize_array(boxes, origins, grid)
    keep = np.flatnonzero((cls != 0) & (score >= threshold))
    return [Detection(BoxAbs(*map(float, decoded[q])), int(cls[q]), float(score[q]), image_id)
            for q in keep]


def check_image_size(width, height, stride):
    if width % stride or height % stride:
        def near(v):
            lo = max(stride, v // stride * stride)
            return f"{lo} or {lo + stride}" if lo != v else str(v)
        raise ConfigError(f"image {width}x{height} is not divisible by the stride {stride}; "
                          f"use width {near(width)} and height {near(height)}")


def infer(model, image, threshold=0.5, image_id=0):
    """Run the detector on an H×W×3 uint8 image."""
    h, w = image.shape[:2]
    stride = model.config.backbone.total_stride
    check_image_size(w, h, stride)
    out = model.forward(nx.Tensor(image_to_tensor_data(image)), mode="eval")
    grid = TileGrid.for_image(w, h, stride)
    logits, boxes = out.image(0)
    return decode(logits, boxes, grid, model.config.head.n_g, threshold, image_id)
