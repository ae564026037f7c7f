"""Backbone + head bundled as one detector with a flat parameter namespace."""

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .backbone import BackboneConfig, BackboneParams, backbone_forward, build_backbone
from .geometry import TileGrid
from .head import HeadParams, LORConfig, build_head, head_forward


@dataclass(frozen=True)
class ModelConfig:
    backbone: BackboneConfig = BackboneConfig()
    head: LORConfig = LORConfig()

    def validate(self):
        self.backbone.validate()
        self.head.validate()
        return self

    @property
    def grid(self):
        h, w = self.backbone.input_size
        return TileGrid.for_image(w, h, self.backbone.total_stride)


@dataclass
class Detector:
    config: ModelConfig
    backbone: BackboneParams
    head: HeadParams

    @classmethod
    def build(cls, config, seed):
        config.validate()
        ss = np.random.SeedSequence(seed)
        rng_b, rng_h = (np.random.default_rng(s) for s in ss.spawn(2))
        bb = build_backbone(config.backbone, rng_b)
        hd = build_head(config.head, config.backbone.out_channels, rng_h, grid=config.grid)
        return cls(config, bb, hd)

    def parameters(self):
        """Ordered {name: Tensor} over backbone then head."""
        out = {f"backbone.{k}": v for k, v in self.backbone.params.items()}
        out.update({f"head.{k}": v for k, v in self.head.params.items()})
        return out

    def buffers(self):
        return {f"backbone.{k}": v for k, v in self.backbone.buffers.items()}

    def parameter_count(self):
        return sum(t.size for t in self.parameters().values())

    def zero_grad(self):
        for t in self.parameters().values():
            t.grad = None

    def astype(self, dtype):
        """Copy with every parameter and buffer cast to ``dtype``."""
        bb = BackboneParams(self.backbone.config,
                            {k: nx.Tensor(v.data.astype(dtype), requires_grad=True, dtype=dtype)
                             for k, v in self.backbone.params.items()},
                            {k: v.astype(dtype) for k, v in self.backbone.buffers.items()})
        hd = HeadParams(self.head.config,
                        {k: nx.Tensor(v.data.astype(dtype), requires_grad=True, dtype=dtype)
                         for k, v in self.head.params.items()})
        return Detector(self.config, bb, hd)

    def forward(self, images, mode="eval"):
        """Images (3×H×W or N×3×H×W in [0, 1]) -> HeadOutput."""
        return head_forward(backbone_forward(self.backbone, images, mode), self.head)
