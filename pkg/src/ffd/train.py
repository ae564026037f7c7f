"""Training loop: augment -> forward -> tiled matching -> loss -> backward -> Adam."""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numerics as nx
from .checkpoint import checkpoint_from_model
from .data import annotations_as_gts, augment, image_to_tensor_data
from .errors import DataError, NumericalError
from .loss import QueryTargets, build_targets, total_loss
from .matching import tiled_match
from .model import Detector

log = logging.getLogger(__name__)


def cosine_lr(step, total, base_lr):
    """Cosine annealing from base_lr at step 0 to 0 at step total-1."""
    if total <= 1:
        return base_lr
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * min(step, total - 1) / (total - 1)))


class Adam:
    """Adam with decoupled weight decay."""

    def __init__(self, params, beta1=0.9, beta2=0.99, eps=1e-8, weight_decay=0.0):
        self.params = params
        self.beta1, self.beta2, self.eps, self.weight_decay = beta1, beta2, eps, weight_decay
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.step_count = 0

    def step(self, lr):
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data -= (lr * update).astype(p.data.dtype)


@dataclass
class TrainResult:
    model: Detector
    optimizer: Adam
    log: list = field(default_factory=list)   # (iteration, loss, L_c, L_b)
    rng_state: dict = None

    def checkpoint(self, config):
        return checkpoint_from_model(self.model, config, self.optimizer, self.rng_state)


def total_steps(config, n_samples):
    if config.iterations is not None:
        return config.iterations
    per_epoch = math.ceil(n_samples / (config.batch_size * config.accumulate)) if n_samples else 0
    return config.epochs * per_epoch


def _batches(n, batch, rng):
    """Endless (epoch, [indices]) stream over seeded per-epoch permutations."""
    epoch = 0
    while True:
        order = rng.permutation(n)
        for i in range(0, n, batch):
            yield epoch, order[i:i + batch].tolist()
        epoch += 1


def _dump_batch(dump_dir, step, images, gts):
    if dump_dir is None:
        return None
    path = Path(dump_dir) / f"nan_batch_{step:06d}.npz"
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, images=images, gts=np.array([[list(b) + [c] for b, c in g] for g in gts],
                                                dtype=object))
    return path


def train(config, samples, log_path=None, dump_dir=None, callback=None):
    """Fit a detector on ``samples``; deterministic for a fixed config seed."""
    config.validate()
    model = Detector.build(config.model, config.seed)
    params = model.parameters()
    opt = Adam(params, config.adam_beta1, config.adam_beta2, config.adam_eps,
               config.weight_decay)
    grid = config.model.grid
    n_g = config.model.head.n_g
    h, w = config.model.backbone.input_size
    for s in samples:
        if s.mask.shape != (h, w):
            raise DataError(f"sample {s.name!r} is {s.mask.shape[1]}x{s.mask.shape[0]}, "
                            f"config expects {w}x{h}")
    steps = total_steps(config, len(samples))
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    stream = _batches(len(samples), config.batch_size, rng) if samples else None
    result = TrainResult(model, opt)

    for step in range(steps):
        lr = cosine_lr(step, steps, config.base_lr)
        model.zero_grad()
        tot = l_c = l_b = 0.0
        for _ in range(config.accumulate):
            epoch, idx = next(stream)
            batch = []
            for i in idx:
                s = samples[i]
                if config.augment is not None:
                    s = augment(s, config.augment,
                                np.random.SeedSequence([config.seed, i, epoch]))
                batch.append(s)
            images = np.stack([image_to_tensor_data(s.image) for s in batch])
            gts = [annotations_as_gts(s) for s in batch]
            out = model.forward(nx.Tensor(images), mode="train")
            targets = []
            for b, g in enumerate(gts):
                logits, boxes = out.image(b)
                assignment = tiled_match(logits, boxes, g, grid, n_g, config.lam)
                targets.append(build_targets(assignment, g, grid, n_g))
            loss, c, bx = total_loss(out.class_logits, out.box_params,
                                     QueryTargets.concat(targets), config.lam)
            if not np.isfinite(loss.data).all():
                where = _dump_batch(dump_dir, step, images, gts)
                raise NumericalError(f"non-finite loss at iteration {step}"
                                     + (f"; batch dumped to {where}" if where else ""))
            if config.accumulate > 1:
                loss = nx.scale(loss, 1.0 / config.accumulate)
            nx.backward(loss)
            tot += loss.item()
            l_c += c / config.accumulate
            l_b += bx / config.accumulate
        opt.step(lr)
        result.log.append((step, tot, l_c, l_b))
        if callback is not None:
            callback(step, tot)
        if step % 100 == 0:
            log.debug("iter %d lr %.2e loss %.4f (cls %.4f box %.4f)", step, lr, tot, l_c, l_b)

    result.rng_state = rng.bit_generator.state
    if log_path is not None:
        write_loss_log(log_path, result.log)
    return result


def write_loss_log(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss", "L_c", "L_b"])
        for it, loss, lc, lb in rows:
            writer.writerow([it, repr(float(loss)), repr(float(lc)), repr(float(lb))])
