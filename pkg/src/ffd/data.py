"""Dataset I/O, annotation extraction, splitting and runtime augmentation.

On disk a dataset is ``images/*.png`` (8-bit RGB), ``masks/*.png`` (16-bit
instance ids, 0 = background) and a ``manifest.json`` listing
``{"image", "mask", "split"?, "classes"?}`` records. Boxes are never stored;
they are always re-derived from the masks.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import ConfigError, DataError
from .geometry import BoxAbs, box_from_extents

MANIFEST = "manifest.json"


@dataclass
class Sample:
    image: np.ndarray                        # H×W×3 uint8, RGB
    mask: np.ndarray                         # H×W uint16 instance ids
    classes: dict = field(default_factory=dict)   # instance id -> class id (default 1)
    annotations: list = field(default_factory=list)
    name: str = ""

    @classmethod
    def from_arrays(cls, image, mask, classes=None, name=""):
        image = np.ascontiguousarray(image, dtype=np.uint8)
        mask = np.ascontiguousarray(mask, dtype=np.uint16)
        if image.ndim != 3 or image.shape[2] != 3:
            raise DataError(f"{name or 'image'}: expected H×W×3, got {image.shape}")
        if mask.shape != image.shape[:2]:
            raise DataError(f"{name or 'sample'}: mask {mask.shape} does not match "
                            f"image {image.shape[:2]}")
        classes = {int(k): int(v) for k, v in (classes or {}).items()}
        anns = [(box, classes.get(iid, 1)) for iid, _, box in extract_instances(mask)]
        return cls(image, mask, classes, anns, name)

    @property
    def size(self):
        h, w = self.mask.shape
        return w, h


def extract_instances(mask):
    """[(instance id, (n, 2) array of (x, y) pixels, box)] for each nonzero id, ascending."""
    mask = np.asarray(mask)
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        return []
    ids = mask[ys, xs]
    order = np.argsort(ids, kind="stable")
    ids, xs, ys = ids[order], xs[order], ys[order]
    uniq, starts = np.unique(ids, return_index=True)
    ends = list(starts[1:]) + [len(ids)]
    out = []
    for iid, a, b in zip(uniq, starts, ends):
        px, py = xs[a:b], ys[a:b]
        box = box_from_extents(int(px.min()), int(py.min()), int(px.max()), int(py.max()))
        out.append((int(iid), np.stack([px, py], axis=1), box))
    return out


def check_instance_ids(mask, name=""):
    ids = np.unique(mask)
    ids = ids[ids != 0]
    if len(ids) and (ids[0] != 1 or ids[-1] != len(ids)):
        raise DataError(f"{name or 'mask'}: instance ids must be contiguous 1..K, "
                        f"found {ids.tolist()[:10]}")


def read_image(path):
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise DataError(f"cannot read image {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def read_mask(path):
    mask = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if mask is None:
        raise DataError(f"cannot read mask {path}")
    if mask.ndim != 2:
        raise DataError(f"mask {path} must be single-channel, got shape {mask.shape}")
    return mask.astype(np.uint16)


def write_image(path, image):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), cv2.cvtColor(np.asarray(image, np.uint8), cv2.COLOR_RGB2BGR)):
        raise DataError(f"cannot write image {path}")


def write_mask(path, mask):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), np.asarray(mask, np.uint16)):
        raise DataError(f"cannot write mask {path}")


def read_manifest(path):
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    if not path.exists():
        raise DataError(f"manifest {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {path} is not valid JSON: {exc}") from exc
    records = doc["samples"] if isinstance(doc, dict) else doc
    if not isinstance(records, list):
        raise DataError(f"manifest {path} must hold a list of records")
    return path.parent, records


def load_dataset(manifest_path, split=None):
    """Samples in manifest order, optionally filtered by their ``split`` tag."""
    root, records = read_manifest(manifest_path)
    samples = []
    for i, rec in enumerate(records):
        if split is not None and rec.get("split") != split:
            continue
        try:
            img_path, mask_path = root / rec["image"], root / rec["mask"]
        except (KeyError, TypeError) as exc:
            raise DataError(f"manifest record {i} needs 'image' and 'mask'") from exc
        for p in (img_path, mask_path):
            if not p.exists():
                raise DataError(f"manifest record {i}: missing file {p}")
        image, mask = read_image(img_path), read_mask(mask_path)
        if image.shape[:2] != mask.shape:
            raise DataError(f"manifest record {i}: image {image.shape[:2]} and mask "
                            f"{mask.shape} sizes differ")
        check_instance_ids(mask, str(mask_path))
        samples.append(Sample.from_arrays(image, mask, rec.get("classes"), Path(rec["image"]).stem))
    return samples


def save_dataset(out_dir, samples, splits=None):
    """Write samples in the on-disk layout; returns the manifest path."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    records = []
    for i, s in enumerate(samples):
        stem = s.name or f"{i:06d}"
        write_image(out / "images" / f"{stem}.png", s.image)
        write_mask(out / "masks" / f"{stem}.png", s.mask)
        rec = {"image": f"images/{stem}.png", "mask": f"masks/{stem}.png"}
        if splits is not None:
            rec["split"] = splits[i]
        if any(c != 1 for c in s.classes.values()):
            rec["classes"] = {str(k): v for k, v in sorted(s.classes.items())}
        records.append(rec)
    path = out / MANIFEST
    path.write_text(json.dumps({"version": 1, "samples": records}, indent=1, sort_keys=True))
    return path


def split_dataset(samples, ratio=(2, 1), seed=0):
    """Seeded shuffle, then the first share goes to train."""
    a, b = ratio
    if a < 0 or b < 0 or a + b <= 0:
        raise ConfigError(f"invalid split ratio {ratio}")
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(math.floor(len(samples) * a / (a + b) + 0.5))
    return [samples[i] for i in order[:n_train]], [samples[i] for i in order[n_train:]]


@dataclass(frozen=True)
class AugmentConfig:
    color_jitter_prob: float = 0.4
    rotation_deg: tuple = (-10.0, 10.0)
    translation_px: tuple = (-50.0, 50.0)
    mirror_prob: float = 0.5
    scale: tuple = (0.8, 1.25)
    hue_shift: float = 0.05
    sat_range: tuple = (0.7, 1.3)
    value_range: tuple = (0.7, 1.3)
    contrast_range: tuple = (0.7, 1.3)

    def __post_init__(self):
        for name in ("rotation_deg", "translation_px", "scale", "sat_range", "value_range",
                     "contrast_range"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @classmethod
    def identity(cls):
        return cls(0.0, (0.0, 0.0), (0.0, 0.0), 0.0, (1.0, 1.0))

    def validate(self):
        for p in (self.color_jitter_prob, self.mirror_prob):
            if not 0 <= p <= 1:
                raise ConfigError(f"augmentation probability {p} outside [0, 1]")
        for lo, hi in (self.rotation_deg, self.translation_px, self.scale, self.sat_range,
                       self.value_range, self.contrast_range):
            if lo > hi:
                raise ConfigError(f"augmentation range ({lo}, {hi}) is not ordered")
        if self.scale[0] <= 0:
            raise ConfigError("scale range must be positive")
        return self


def color_jitter(image, rng, cfg):
    """Hue/saturation/brightness in HSV space, then contrast about the mean."""
    hsv = cv2.cvtColor(image.astype(np.float32) / 255.0, cv2.COLOR_RGB2HSV)
    hsv[..., 0] = (hsv[..., 0] + 360.0 * rng.uniform(-cfg.hue_shift, cfg.hue_shift)) % 360.0
    hsv[..., 1] = np.clip(hsv[..., 1] * rng.uniform(*cfg.sat_range), 0, 1)
    hsv[..., 2] = np.clip(hsv[..., 2] * rng.uniform(*cfg.value_range), 0, 1)
    rgb = cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB)
    mean = rgb.mean()
    rgb = (rgb - mean) * rng.uniform(*cfg.contrast_range) + mean
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


def augment(sample, cfg, rng):
    """Randomly jitter colours and warp image + mask together.

    Boxes are re-extracted from the warped mask; instances whose centre leaves
    the frame are removed and the remaining ids renumbered 1..K.
    """
    rng = np.random.default_rng(rng)
    jitter = rng.random() < cfg.color_jitter_prob
    mirror = rng.random() < cfg.mirror_prob
    angle = rng.uniform(*cfg.rotation_deg)
    tx = rng.uniform(*cfg.translation_px)
    ty = rng.uniform(*cfg.translation_px)
    scale = rng.uniform(*cfg.scale)

    image, mask = sample.image, sample.mask
    h, w = mask.shape
    if jitter:
        image = color_jitter(image, rng, cfg)
    if mirror:
        image, mask = image[:, ::-1], mask[:, ::-1]
    if angle == 0 and tx == 0 and ty == 0 and scale == 1:
        if not (jitter or mirror):
            return sample
        return Sample.from_arrays(image, mask, sample.classes, sample.name)

    mat = cv2.getRotationMatrix2D((w / 2.0, h / 2.0), angle, scale)
    mat[:, 2] += (tx, ty)
    warped_img = cv2.warpAffine(np.ascontiguousarray(image), mat, (w, h), flags=cv2.INTER_LINEAR,
                                borderMode=cv2.BORDER_CONSTANT, borderValue=0)
    warped_mask = cv2.warpAffine(np.ascontiguousarray(mask), mat, (w, h),
                                 flags=cv2.INTER_NEAREST, borderMode=cv2.BORDER_CONSTANT,
                                 borderValue=0)
    keep = []
    for iid, _, box in extract_instances(mask):
        cx, cy = mat @ np.array([box.cx, box.cy, 1.0])
        if 0 <= cx < w and 0 <= cy < h:
            keep.append(iid)
    lut = np.zeros(int(mask.max()) + 1, dtype=np.uint16)
    present = set(np.unique(warped_mask).tolist())
    classes, next_id = {}, 1
    for iid in keep:
        if iid in present:
            lut[iid] = next_id
            classes[next_id] = sample.classes.get(iid, 1)
            next_id += 1
    return Sample.from_arrays(warped_img, lut[warped_mask], classes, sample.name)


def image_to_tensor_data(image):
    """H×W×3 uint8 -> 3×H×W float32 in [0, 1]."""
    return np.ascontiguousarray(np.asarray(image, np.float32).transpose(2, 0, 1) / 255.0)


def annotations_as_gts(sample):
    return [(BoxAbs(*b), c) for b, c in sample.annotations]
