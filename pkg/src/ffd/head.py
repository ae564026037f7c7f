"""Latent object representation head.

Backbone features are projected to d·N_g channels, refined by N rounds of
query transformation gated by cross-channel global context, split into one
d-dimensional query per (tile, slot), and decoded by a one-layer class FFN
and a three-layer box FFN.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .errors import ConfigError, DimensionError
from .head_index import query_count, query_index_to_tile, tile_to_query_index  # noqa: F401

# queries per tile that reproduce 1600 / 800 / 400 total queries at 320×256
N_G_PRESETS = {16: 5, 32: 10, 64: 20}
SQUEEZE_KINDS = ("sigmoid", "softmax")


@dataclass(frozen=True)
class LORConfig:
    d: int = 32
    n_g: int = 10
    repetitions: int = 3
    expansion: int = 2
    num_classes: int = 2  # background included, index 0
    squeeze: str = "sigmoid"

    @classmethod
    def for_tile(cls, tile, **overrides):
        return cls(n_g=N_G_PRESETS[tile], **overrides)

    def validate(self):
        for name in ("d", "n_g", "repetitions", "expansion"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.num_classes < 2:
            raise ConfigError("num_classes counts background and must be >= 2")
        if self.squeeze not in SQUEEZE_KINDS:
            raise ConfigError(f"squeeze must be one of {SQUEEZE_KINDS}")
        return self

    @property
    def channels(self):
        return self.d * self.n_g


@dataclass
class HeadParams:
    config: LORConfig
    params: dict = field(default_factory=dict)

    def count(self):
        return sum(t.size for t in self.params.values())


@dataclass
class QueryMatrix:
    values: nx.Tensor      # d × N_q, or N × d × N_q for a batch
    grid_shape: tuple      # (H_o, W_o)
    n_g: int

    @property
    def n_queries(self):
        return query_count(self.grid_shape, self.n_g)


@dataclass
class HeadOutput:
    class_logits: nx.Tensor   # (batch·N_q) × K
    box_params: nx.Tensor     # (batch·N_q) × 4
    grid_shape: tuple
    n_g: int
    batch: int = 1

    @property
    def n_queries(self):
        return query_count(self.grid_shape, self.n_g)

    def image(self, i):
        """Numpy (logits, boxes) of the i-th image in the batch."""
        n_q = self.n_queries
        rows = slice(i * n_q, (i + 1) * n_q)
        return self.class_logits.data[rows], self.box_params.data[rows]


def _conv_param(rng, c_out, c_in, std):
    w = (rng.standard_normal((c_out, c_in, 1, 1)) * std).astype(np.float32)
    return nx.Tensor(w, requires_grad=True), nx.Tensor(np.zeros(c_out, np.float32),
                                                       requires_grad=True)


def build_head(config, in_channels, rng, grid=None, background_prior=0.99):
    """Initialise head parameters.

    The class bias starts at ``background_prior`` probability for background
    so an untrained model emits nothing; with ``grid`` the box bias decodes to
    a tile-sized box at the tile centre.
    """
    config.validate()
    rng = np.random.default_rng(rng)
    hp = HeadParams(config)
    p = hp.params
    c = config.channels
    p["proj.weight"], p["proj.bias"] = _conv_param(rng, c, in_channels, math.sqrt(2 / in_channels))
    for i in range(config.repetitions):
        p[f"lor{i}.qt.weight"], p[f"lor{i}.qt.bias"] = _conv_param(rng, c, c, math.sqrt(1 / c))
        rc = config.expansion * c
        p[f"lor{i}.expand.weight"], p[f"lor{i}.expand.bias"] = _conv_param(
            rng, rc, c, math.sqrt(2 / c))
        p[f"lor{i}.squeeze.weight"], p[f"lor{i}.squeeze.bias"] = _conv_param(
            rng, c, rc, math.sqrt(1 / rc))
    d, k = config.d, config.num_classes
    p["cls.weight"], p["cls.bias"] = _conv_param(rng, k, d, 0.01)
    p["cls.bias"].data[0] = math.log(background_prior * (k - 1) / (1 - background_prior))
    p["box1.weight"], p["box1.bias"] = _conv_param(rng, d, d, math.sqrt(2 / d))
    p["box2.weight"], p["box2.bias"] = _conv_param(rng, d, d, math.sqrt(2 / d))
    p["box3.weight"], p["box3.bias"] = _conv_param(rng, 4, d, 0.01)
    if grid is not None:
        p["box3.bias"].data[:] = [0.5, 0.5, math.log(grid.tile_w / grid.image_w),
                                  math.log(grid.tile_h / grid.image_h)]
    return hp


def query_projection(t_f, weight, bias):
    """1×1 conv from backbone channels to d·N_g."""
    return nx.conv2d(t_f, weight, bias, stride=1, padding=0)


def query_transform(t_i, weight, bias):
    """ReLU(conv1x1(T_i) + T_i)."""
    return nx.relu(nx.add(nx.conv2d(t_i, weight, bias, stride=1, padding=0), t_i))


def ccgc(t_qt, expand_w, expand_b, squeeze_w, squeeze_b, squeeze="sigmoid"):
    """Global pool -> expand (×r, ReLU) -> squeeze (sigmoid or softmax) gate per channel."""
    z = nx.global_avg_pool(t_qt)
    shape = z.shape
    z = nx.reshape(z, shape + (1, 1))
    e = nx.relu(nx.conv2d(z, expand_w, expand_b, stride=1, padding=0))
    s = nx.conv2d(e, squeeze_w, squeeze_b, stride=1, padding=0)
    gate = nx.sigmoid(s) if squeeze == "sigmoid" else nx.softmax_channels(s)
    return nx.reshape(gate, shape)


def lor_forward(t_g, hp):
    """N rounds of y = QT(x); x = y * CCGC(y)."""
    cfg, p = hp.config, hp.params
    x = t_g
    for i in range(cfg.repetitions):
        y = query_transform(x, p[f"lor{i}.qt.weight"], p[f"lor{i}.qt.bias"])
        gate = ccgc(y, p[f"lor{i}.expand.weight"], p[f"lor{i}.expand.bias"],
                    p[f"lor{i}.squeeze.weight"], p[f"lor{i}.squeeze.bias"], cfg.squeeze)
        x = nx.broadcast_mul(y, gate)
    return x


def delineate(t_lor, d):
    """(d·N_g)×H_o×W_o -> QueryMatrix whose column (r, c, s) is channels [s·d, (s+1)·d) at (r, c)."""
    batched = t_lor.ndim == 4
    chans, h, w = t_lor.shape[-3:]
    if chans % d:
        raise DimensionError("LOR channels are not a multiple of the query dimension",
                             axis="channel", expected=f"multiple of {d}", got=chans)
    n_g = chans // d
    if batched:
        n = t_lor.shape[0]
        v = nx.reshape(t_lor, (n, n_g, d, h, w))
        v = nx.transpose(v, (0, 2, 3, 4, 1))
        v = nx.reshape(v, (n, d, h * w * n_g))
    else:
        v = nx.reshape(t_lor, (n_g, d, h, w))
        v = nx.transpose(v, (1, 2, 3, 0))
        v = nx.reshape(v, (d, h * w * n_g))
    return QueryMatrix(v, (h, w), n_g)


def undelineate(qm):
    """Exact inverse of :func:`delineate`."""
    v = qm.values
    h, w = qm.grid_shape
    n_g = qm.n_g
    if v.ndim == 3:
        n, d = v.shape[:2]
        t = nx.reshape(v, (n, d, h, w, n_g))
        t = nx.transpose(t, (0, 4, 1, 2, 3))
        return nx.reshape(t, (n, n_g * d, h, w))
    d = v.shape[0]
    t = nx.reshape(v, (d, h, w, n_g))
    t = nx.transpose(t, (3, 0, 1, 2))
    return nx.reshape(t, (n_g * d, h, w))


def _pointwise(qm_values, layers):
    """Apply 1×1 convs (with ReLU between) to a d×N_q (or N×d×N_q) query matrix."""
    x = nx.reshape(qm_values, qm_values.shape + (1,))
    for i, (w, b) in enumerate(layers):
        x = nx.conv2d(x, w, b, stride=1, padding=0)
        if i < len(layers) - 1:
            x = nx.relu(x)
    out_c = x.shape[-3]
    if x.ndim == 4:
        n = x.shape[0]
        x = nx.reshape(x, (n, out_c, -1))
        x = nx.transpose(x, (0, 2, 1))
        return nx.reshape(x, (-1, out_c))
    x = nx.reshape(x, (out_c, -1))
    return nx.transpose(x, (1, 0))


def ffn_class(qm, hp):
    """One linear layer d -> K per query; raw logits."""
    p = hp.params
    return _pointwise(qm.values, [(p["cls.weight"], p["cls.bias"])])


def ffn_box(qm, hp):
    """d -> d -> d -> 4 with ReLU after the first two layers."""
    p = hp.params
    return _pointwise(qm.values, [(p["box1.weight"], p["box1.bias"]),
                                  (p["box2.weight"], p["box2.bias"]),
                                  (p["box3.weight"], p["box3.bias"])])


def head_forward(t_f, hp):
    p = hp.params
    t_g = query_projection(t_f, p["proj.weight"], p["proj.bias"])
    qm = delineate(lor_forward(t_g, hp), hp.config.d)
    batch = t_f.shape[0] if t_f.ndim == 4 else 1
    return HeadOutput(ffn_class(qm, hp), ffn_box(qm, hp), qm.grid_shape, qm.n_g, batch)
