"""Procedural fruit-free backgrounds and fruit instances for desk-scale runs."""

import cv2
import numpy as np

from .data import Sample
from .synth import SynthConfig, scene_to_sample, synthesize_scene


def background(rng, size=(64, 64)):
    """Smooth green-brown noise texture, H×W×3 uint8."""
    h, w = size
    coarse = rng.uniform(0, 1, size=(max(h // 8, 2), max(w // 8, 2), 3)).astype(np.float32)
    tex = cv2.resize(coarse, (w, h), interpolation=cv2.INTER_CUBIC)
    base = np.array([60, 110, 50], np.float32) + (tex - 0.5) * np.array([40, 60, 40], np.float32)
    return np.clip(base, 0, 255).astype(np.uint8)


def fruit_source(rng, size=(64, 64), n_fruit=4, radius=(4, 9)):
    """An annotated image holding a few red discs with a highlight."""
    h, w = size
    image = background(rng, size)
    mask = np.zeros((h, w), np.uint16)
    yy, xx = np.mgrid[0:h, 0:w]
    placed = 0
    for _ in range(n_fruit * 10):
        if placed == n_fruit:
            break
        r = rng.uniform(*radius)
        cx, cy = rng.uniform(r + 1, w - r - 1), rng.uniform(r + 1, h - r - 1)
        disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
        if (mask[disc] != 0).any():
            continue
        placed += 1
        shade = 1.0 - 0.5 * np.sqrt((xx - cx + r / 3) ** 2 + (yy - cy + r / 3) ** 2) / (1.5 * r)
        color = np.array([200 + rng.uniform(-30, 40), 30 + rng.uniform(0, 40), 30], np.float32)
        pix = np.clip(color[None] * shade[disc][:, None], 0, 255)
        image[disc] = pix.astype(np.uint8)
        mask[disc] = placed
    return Sample.from_arrays(image, mask)


def toy_dataset(n_images, seed, size=(64, 64), n_max=5, n_sources=4, min_instances=1):
    """Synthesised scenes over procedural backgrounds (each with >= min_instances)."""
    rng = np.random.default_rng(seed)
    pool = [fruit_source(rng, size) for _ in range(n_sources)]
    bases = [background(rng, size) for _ in range(max(2, n_sources))]
    cfg = SynthConfig(n_max=n_max)
    samples = []
    while len(samples) < n_images:
        base = bases[int(rng.integers(len(bases)))]
        image, anns, mask = synthesize_scene(base, pool, cfg, rng)
        if len(anns) < min_instances:
            continue
        samples.append(scene_to_sample(image, anns, mask, f"{len(samples):06d}"))
    return samples
