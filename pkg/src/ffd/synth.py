"""Occlusion-free scene synthesis by pasting whole instances onto empty images.

Starting from a fruit-free base image, up to N_i < N_max instances are copied
from a pool of annotated images to random positions. A placement is accepted
only when its box stays inside the image and does not overlap any box pasted
before it, so every emitted annotation is fully visible.
"""

from dataclasses import dataclass

import numpy as np

from .data import Sample, extract_instances
from .errors import ConfigError, DataError
from .geometry import BoxAbs, box_from_extents, intersection_area


@dataclass(frozen=True)
class SynthConfig:
    n_max: int = 100
    max_placement_attempts: int = 50

    def validate(self):
        if self.n_max < 1:
            raise ConfigError("n_max must be >= 1")
        if self.max_placement_attempts < 1:
            raise ConfigError("max_placement_attempts must be >= 1")
        return self


@dataclass
class PatchInstance:
    pixels: np.ndarray   # h×w×3 crop of the source image
    mask: np.ndarray     # h×w bool, True on the instance
    class_id: int = 1

    @property
    def size(self):
        h, w = self.mask.shape
        return w, h


def patches_from_sample(sample):
    """Crop every instance of an annotated sample into a PatchInstance."""
    out = []
    for iid, pts, _ in extract_instances(sample.mask):
        x0, y0 = pts.min(axis=0)
        x1, y1 = pts.max(axis=0) + 1
        m = sample.mask[y0:y1, x0:x1] == iid
        out.append(PatchInstance(sample.image[y0:y1, x0:x1].copy(), m,
                                 sample.classes.get(iid, 1)))
    return out


def verify_overlap_free(annotations):
    """True iff no two boxes share positive area (touching edges is fine)."""
    boxes = [a[0] if isinstance(a, tuple) and not isinstance(a, BoxAbs) else a
             for a in annotations]
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if intersection_area(boxes[i], boxes[j]) > 0:
                return False
    return True


def _patch_box(x0, y0, patch):
    w, h = patch.size
    return box_from_extents(x0, y0, x0 + w - 1, y0 + h - 1)


def synthesize_scene(base_image, pool, config, rng):
    """Compose one scene.

    ``pool`` is a list of Samples (or of PatchInstance lists, one per source
    image). Returns (image, [(BoxAbs, class id)], uint16 instance mask).
    """
    config.validate()
    rng = np.random.default_rng(rng)
    sources = [patches_from_sample(s) if isinstance(s, Sample) else list(s) for s in pool]
    sources = [s for s in sources if s]
    if not sources:
        raise DataError("instance pool is empty")
    image = np.array(base_image, dtype=np.uint8, copy=True)
    hgt, wid = image.shape[:2]
    mask = np.zeros((hgt, wid), dtype=np.uint16)
    annotations = []
    n_instances = int(rng.integers(0, config.n_max))
    for _ in range(n_instances):
        src = sources[int(rng.integers(len(sources)))]
        patch = src[int(rng.integers(len(src)))]
        pw, ph = patch.size
        if pw > wid or ph > hgt:
            continue
        for _attempt in range(config.max_placement_attempts):
            x0 = int(rng.integers(0, wid - pw + 1))
            y0 = int(rng.integers(0, hgt - ph + 1))
            box = _patch_box(x0, y0, patch)
            if all(intersection_area(box, b) == 0 for b, _ in annotations):
                break
        else:
            continue
        region = image[y0:y0 + ph, x0:x0 + pw]
        region[patch.mask] = patch.pixels[patch.mask]
        mask[y0:y0 + ph, x0:x0 + pw][patch.mask] = len(annotations) + 1
        annotations.append((box, patch.class_id))
    return image, annotations, mask


def scene_to_sample(image, annotations, mask, name=""):
    classes = {i + 1: c for i, (_, c) in enumerate(annotations)}
    return Sample(image, mask, classes, list(annotations), name)
