"""Training configuration and its JSON form."""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .backbone import BackboneConfig
from .data import AugmentConfig
from .errors import ConfigError
from .head import N_G_PRESETS, LORConfig
from .model import ModelConfig


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 1e-3
    weight_decay: float = 1e-4
    adam_beta1: float = 0.90
    adam_beta2: float = 0.99
    adam_eps: float = 1e-8
    epochs: int = 1000
    iterations: Optional[int] = None   # overrides epochs when set
    batch_size: int = 1
    accumulate: int = 1
    seed: int = 0
    lam: float = 1.0
    augment: Optional[AugmentConfig] = field(default_factory=AugmentConfig)
    model: ModelConfig = field(default_factory=ModelConfig)

    def validate(self):
        if self.base_lr <= 0 or self.weight_decay < 0 or self.adam_eps <= 0:
            raise ConfigError("learning rate and epsilon must be positive, decay non-negative")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in (0, 1)")
        if self.epochs < 0 or (self.iterations is not None and self.iterations < 0):
            raise ConfigError("epochs/iterations must be non-negative")
        if self.batch_size < 1 or self.accumulate < 1:
            raise ConfigError("batch_size and accumulate must be >= 1")
        if self.lam < 0:
            raise ConfigError("loss weight must be non-negative")
        if self.augment is not None:
            self.augment.validate()
        self.model.validate()
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def with_tile(self, tile):
        """Switch tile size and the matching N_g preset."""
        bb = dataclasses.replace(self.model.backbone, tile=int(tile))
        hd = dataclasses.replace(self.model.head, n_g=N_G_PRESETS[int(tile)])
        return dataclasses.replace(self, model=ModelConfig(bb, hd))


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in {where}: {exc}") from exc


def config_from_dict(data):
    data = dict(data or {})
    model = data.pop("model", None) or {}
    if not isinstance(model, dict):
        raise ConfigError("model must be a JSON object")
    extra = set(model) - {"backbone", "head"}
    if extra:
        raise ConfigError(f"unknown keys in model: {sorted(extra)}")
    mc = ModelConfig(_build(BackboneConfig, model.get("backbone"), "model.backbone"),
                     _build(LORConfig, model.get("head"), "model.head"))
    augment = data.pop("augment", {}) if "augment" in data else {}
    aug = None if augment is None else _build(AugmentConfig, augment, "augment")
    cfg = _build(TrainConfig, data, "config")
    return dataclasses.replace(cfg, model=mc, augment=aug).validate()


def load_config(path):
    try:
        return config_from_dict(json.loads(Path(path).read_text()))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def toy_config(**overrides):
    """Small 64×64 model (2×2 tiles) used for desk-scale runs and tests."""
    model = ModelConfig(
        BackboneConfig(channels_per_stage=(8, 16, 32, 64, 64), tile=32, input_size=(64, 64)),
        LORConfig(d=16, n_g=4))
    base = TrainConfig(model=model, augment=None)
    return dataclasses.replace(base, **overrides).validate()
