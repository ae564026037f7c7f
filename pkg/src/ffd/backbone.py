"""Five-stage VGG-style feature extractor (conv3x3 + BatchNorm + ReLU layers).

The first layer of every stage downsamples by 2, giving a total stride of 32.
The ``tile`` setting only rewires stage-5 strides: 16 makes stage 5 unit
stride, 64 puts stride 2 on its last two layers. Parameter counts do not
depend on it.
"""

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .errors import ConfigError, DimensionError

TILE_CHOICES = (16, 32, 64)


@dataclass(frozen=True)
class BackboneConfig:
    layers_per_stage: tuple = (2, 2, 3, 3, 4)
    channels_per_stage: tuple = (16, 32, 64, 128, 256)
    tile: int = 32
    input_size: tuple = (64, 64)  # (H, W)
    in_channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, "layers_per_stage", tuple(int(v) for v in self.layers_per_stage))
        object.__setattr__(self, "channels_per_stage",
                           tuple(int(v) for v in self.channels_per_stage))
        object.__setattr__(self, "input_size", tuple(int(v) for v in self.input_size))

    def validate(self):
        if len(self.layers_per_stage) != 5 or len(self.channels_per_stage) != 5:
            raise ConfigError("backbone needs exactly five stages")
        if min(self.layers_per_stage) < 1 or min(self.channels_per_stage) < 1:
            raise ConfigError("stage layer and channel counts must be positive")
        if self.tile not in TILE_CHOICES:
            raise ConfigError(f"tile must be one of {TILE_CHOICES}, got {self.tile}")
        if self.tile == 64 and self.layers_per_stage[4] < 2:
            raise ConfigError("tile 64 needs at least two layers in stage 5")
        h, w = self.input_size
        if h % self.tile or w % self.tile:
            raise ConfigError(f"input size {h}x{w} must be divisible by {self.tile} "
                              f"(the total stride for tile {self.tile})")
        return self

    @property
    def out_channels(self):
        return self.channels_per_stage[-1]

    @property
    def total_stride(self):
        return int(np.prod([s for stage in stage_strides(self) for s in stage]))

    @property
    def output_size(self):
        h, w = self.input_size
        return h // self.total_stride, w // self.total_stride


def stage_strides(config):
    """Per-stage lists of per-layer strides."""
    out = []
    for i, n_layers in enumerate(config.layers_per_stage):
        strides = [2] + [1] * (n_layers - 1)
        if i == 4:
            if config.tile == 16:
                strides = [1] * n_layers
            elif config.tile == 64:
                strides = [1] * (n_layers - 2) + [2, 2]
        out.append(strides)
    return out


def layer_specs(config):
    """(name, c_in, c_out, stride) for every conv layer in order."""
    specs, c_in = [], config.in_channels
    for s, (c_out, strides) in enumerate(zip(config.channels_per_stage, stage_strides(config))):
        for j, stride in enumerate(strides):
            specs.append((f"s{s + 1}.l{j + 1}", c_in, c_out, stride))
            c_in = c_out
    return specs


def param_count(config):
    """Learnable parameters: 3×3 weights, conv bias, BN gamma and beta per layer."""
    return sum(c_in * c_out * 9 + 3 * c_out for _, c_in, c_out, _ in layer_specs(config))


@dataclass
class BackboneParams:
    config: BackboneConfig
    params: dict = field(default_factory=dict)
    buffers: dict = field(default_factory=dict)

    def count(self):
        return sum(t.size for t in self.params.values())


def build_backbone(config, rng):
    """He-initialised conv weights, zero bias, gamma=1, beta=0, unit running variance."""
    config.validate()
    rng = np.random.default_rng(rng)
    bp = BackboneParams(config)
    for name, c_in, c_out, _ in layer_specs(config):
        std = np.sqrt(2.0 / (c_in * 9))
        w = (rng.standard_normal((c_out, c_in, 3, 3)) * std).astype(np.float32)
        bp.params[f"{name}.weight"] = nx.Tensor(w, requires_grad=True)
        bp.params[f"{name}.bias"] = nx.Tensor(np.zeros(c_out, np.float32), requires_grad=True)
        bp.params[f"{name}.gamma"] = nx.Tensor(np.ones(c_out, np.float32), requires_grad=True)
        bp.params[f"{name}.beta"] = nx.Tensor(np.zeros(c_out, np.float32), requires_grad=True)
        bp.buffers[f"{name}.running_mean"] = np.zeros(c_out, np.float32)
        bp.buffers[f"{name}.running_var"] = np.ones(c_out, np.float32)
    return bp


def backbone_forward(bp, image, mode="eval"):
    """Image (3×H×W or N×3×H×W, values in [0, 1]) -> features C×H_o×W_o."""
    x = image if isinstance(image, nx.Tensor) else nx.Tensor(image)
    cfg = bp.config
    chan_axis = 1 if x.ndim == 4 else 0
    if x.ndim not in (3, 4) or x.shape[chan_axis] != cfg.in_channels:
        raise DimensionError("backbone expects an RGB image", axis="channel",
                             expected=cfg.in_channels,
                             got=x.shape[chan_axis] if x.ndim in (3, 4) else x.shape)
    h, w = x.shape[-2:]
    stride = cfg.total_stride
    if h % stride or w % stride:
        raise ConfigError(f"image {w}x{h} (WxH) must be divisible by the total stride {stride}")
    p, buf = bp.params, bp.buffers
    for name, _, _, s in layer_specs(cfg):
        x = nx.conv2d(x, p[f"{name}.weight"], p[f"{name}.bias"], stride=s, padding=1)
        x = nx.batch_norm(x, p[f"{name}.gamma"], p[f"{name}.beta"],
                          buf[f"{name}.running_mean"], buf[f"{name}.running_var"], mode=mode)
        x = nx.relu(x)
    return x
