import dataclasses

import pytest

from ffd.config import TrainConfig, config_from_dict, load_config, toy_config
from ffd.errors import ConfigError


def test_json_round_trip(tmp_path):
    cfg = toy_config(seed=9, iterations=12)
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    assert load_config(p) == cfg
    full = TrainConfig()
    assert config_from_dict(full.to_dict()) == full


def test_with_tile_uses_preset():
    cfg = TrainConfig().with_tile(16)
    assert cfg.model.backbone.tile == 16 and cfg.model.head.n_g == 5


def test_unknown_key_and_bad_values(tmp_path):
    with pytest.raises(ConfigError):
        config_from_dict({"learning_rate": 1.0})
    with pytest.raises(ConfigError):
        dataclasses.replace(TrainConfig(), base_lr=-1).validate()
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")
