"""Named gradient checks over every primitive and the composed detector graph."""

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .backbone import BackboneConfig
from .head import LORConfig, build_head, delineate, ffn_box, ffn_class, lor_forward
from .loss import QueryTargets, total_loss
from .model import Detector, ModelConfig

TOLERANCE = 1e-4


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    checked: int
    excluded: int

    @property
    def passed(self):
        return self.max_rel_error < TOLERANCE


def _project(out, rng):
    """Scalar <out, R> with a fixed random R so every output element matters."""
    weights = nx.Tensor(rng.standard_normal(out.shape), dtype=out.dtype)
    return nx.sum_all(nx.mul(out, weights))


def primitive_cases(seed=0):
    """(name, fn, inputs) triples, one per differentiable primitive."""
    rng = np.random.default_rng(seed)
    r = rng.standard_normal

    def proj(seed_offset):
        def wrap(out):
            return _project(out, np.random.default_rng(seed + seed_offset))
        return wrap

    bn_stats = (np.zeros(3), np.ones(3))
    targets_ce = rng.integers(0, 3, size=5)
    targets_box = r((4, 4)) * 2
    cases = [
        ("conv2d_3x3_s1", lambda x, w, b: proj(1)(nx.conv2d(x, w, b, 1)),
         [r((2, 5, 5)), r((3, 2, 3, 3)), r(3)]),
        ("conv2d_3x3_s2", lambda x, w, b: proj(2)(nx.conv2d(x, w, b, 2)),
         [r((2, 6, 6)), r((3, 2, 3, 3)), r(3)]),
        ("conv2d_1x1_batched", lambda x, w, b: proj(3)(nx.conv2d(x, w, b, 1, 0)),
         [r((2, 3, 4, 4)), r((2, 3, 1, 1)), r(2)]),
        ("batch_norm_train", lambda x, g, b: proj(4)(
            nx.batch_norm(x, g, b, bn_stats[0].copy(), bn_stats[1].copy(), "train")),
         [r((3, 4, 4)), r(3), r(3)]),
        ("batch_norm_eval", lambda x, g, b: proj(5)(
            nx.batch_norm(x, g, b, np.full(3, 0.2), np.full(3, 1.5), "eval")),
         [r((3, 4, 4)), r(3), r(3)]),
        ("relu", lambda x: proj(6)(nx.relu(x)), [r((3, 4, 4))]),
        ("sigmoid", lambda x: proj(7)(nx.sigmoid(x)), [r((3, 4, 4))]),
        ("softmax_channels", lambda x: proj(8)(nx.softmax_channels(x)), [r((4, 3, 3))]),
        ("global_avg_pool", lambda x: proj(9)(nx.global_avg_pool(x)), [r((4, 3, 5))]),
        ("broadcast_mul", lambda a, b: proj(10)(nx.broadcast_mul(a, b)),
         [r((3, 2, 2)), r(3)]),
        ("add", lambda a, b: proj(11)(nx.add(a, b)), [r((3, 2, 2)), r((3, 2, 2))]),
        ("mul", lambda a, b: proj(12)(nx.mul(a, b)), [r((3, 2)), r((3, 2))]),
        ("reshape_transpose", lambda x: proj(13)(nx.transpose(nx.reshape(x, (2, 3, 4)), (2, 0, 1))),
         [r((4, 6))]),
        ("take_rows", lambda x: proj(14)(nx.take_rows(x, [3, 0, 2])), [r((5, 4))]),
        ("cross_entropy", lambda z: nx.cross_entropy(z, targets_ce), [r((5, 3))]),
        ("smooth_l1", lambda p: nx.smooth_l1(p, targets_box), [r((4, 4)) * 2]),
    ]
    return cases


def lor_case(seed=0, repetitions=3, squeeze="sigmoid"):
    """LOR block (QT + CCGC, N rounds) followed by delineation and both FFNs."""
    rng = np.random.default_rng(seed)
    cfg = LORConfig(d=3, n_g=2, repetitions=repetitions, expansion=2, num_classes=3,
                    squeeze=squeeze)
    hp = build_head(cfg, 6, rng)
    names = [k for k in hp.params if k != "proj.weight" and k != "proj.bias"]
    t_g = rng.standard_normal((cfg.channels, 2, 2))
    weights = {k: rng.standard_normal(s) for k, s in
               (("cls", (8, 3)), ("box", (8, 4)))}

    def fn(x, *params):
        hp64 = dataclasses.replace(hp, params=dict(zip(names, params)))
        qm = delineate(lor_forward(x, hp64), cfg.d)
        cls_out = nx.mul(ffn_class(qm, hp64), nx.Tensor(weights["cls"], dtype=np.float64))
        box_out = nx.mul(ffn_box(qm, hp64), nx.Tensor(weights["box"], dtype=np.float64))
        return nx.add(nx.sum_all(cls_out), nx.sum_all(box_out))

    return "lor_head", fn, [t_g] + [hp.params[k].data for k in names]


def detector_case(seed=0, max_coords=12):
    """Backbone + LOR + FFNs on a 64×64 image (2×2 tiles) under the training loss."""
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(BackboneConfig(channels_per_stage=(8, 16, 32, 64, 64), tile=32,
                                     input_size=(64, 64)),
                      LORConfig(d=16, n_g=4, repetitions=3, expansion=2, num_classes=2))
    model = Detector.build(cfg, seed).astype(np.float64)
    names = list(model.parameters())
    image = rng.uniform(0, 1, size=(3, 64, 64))
    n_q = 2 * 2 * cfg.head.n_g
    matched = np.array([1, 6, 13])
    classes = np.zeros(n_q, dtype=np.intp)
    classes[matched] = 1
    boxes = np.zeros((n_q, 4))
    boxes[matched] = [[0.4, 0.6, -1.5, -1.2], [0.7, 0.2, -2.0, -1.8], [0.1, 0.9, -2.5, -2.2]]
    targets = QueryTargets(classes, boxes, matched)

    def fn(img, *params):
        named = dict(zip(names, params))
        bb = dataclasses.replace(model.backbone, params={
            k.split(".", 1)[1]: v for k, v in named.items() if k.startswith("backbone.")})
        hd = dataclasses.replace(model.head, params={
            k.split(".", 1)[1]: v for k, v in named.items() if k.startswith("head.")})
        out = Detector(cfg, bb, hd).forward(img, mode="train")
        return total_loss(out.class_logits, out.box_params, targets, 1.0)[0]

    inputs = [image] + [t.data for t in model.parameters().values()]
    return "detector", fn, inputs, max_coords


def run_suite(seed=0, dtype=np.float64, include_detector=True, step=1e-3):
    results = []
    cases = [(n, f, i, None) for n, f, i in primitive_cases(seed)]
    cases.append(lor_case(seed) + (None,))
    _, fn, inputs = lor_case(seed, squeeze="softmax")
    cases.append(("lor_head_softmax", fn, inputs, None))
    if include_detector:
        cases.append(detector_case(seed))
    for name, fn, inputs, max_coords in cases:
        rep = nx.check_gradients(fn, inputs, step=step, max_coords=max_coords, seed=seed,
                                 dtype=dtype)
        results.append(CheckResult(name, rep.max_rel_error, rep.checked, rep.excluded))
    return results
