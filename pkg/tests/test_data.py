import json

import numpy as np
import pytest

from ffd.data import (AugmentConfig, Sample, augment, check_instance_ids, extract_instances,
                      load_dataset, save_dataset, split_dataset)
from ffd.errors import ConfigError, DataError
from ffd.geometry import BoxAbs
from ffd.toydata import toy_dataset


def make_sample():
    img = np.zeros((32, 48, 3), np.uint8)
    img[..., 1] = 80
    mask = np.zeros((32, 48), np.uint16)
    mask[4:10, 6:12] = 1
    mask[20:30, 30:40] = 2
    img[mask > 0] = (200, 30, 30)
    return Sample.from_arrays(img, mask, {2: 3}, "s")


def test_extract_instances():
    s = make_sample()
    inst = extract_instances(s.mask)
    assert [i for i, _, _ in inst] == [1, 2]
    assert inst[0][2] == BoxAbs(9.0, 7.0, 6.0, 6.0)
    assert s.annotations == [(BoxAbs(9.0, 7.0, 6.0, 6.0), 1), (BoxAbs(35.0, 25.0, 10.0, 10.0), 3)]


def test_instance_ids_must_be_contiguous():
    m = np.zeros((4, 4), np.uint16)
    m[0, 0], m[2, 2] = 1, 3
    with pytest.raises(DataError):
        check_instance_ids(m)


def test_dataset_round_trip(tmp_path):
    samples = [make_sample()]
    save_dataset(tmp_path, samples, splits=["train"])
    back = load_dataset(tmp_path)
    assert np.array_equal(back[0].image, samples[0].image)
    assert np.array_equal(back[0].mask, samples[0].mask)
    assert back[0].annotations == samples[0].annotations
    assert load_dataset(tmp_path, split="test") == []


def test_manifest_errors(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path)
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(DataError):
        load_dataset(tmp_path)
    (tmp_path / "manifest.json").write_text(json.dumps([{"image": "a.png", "mask": "b.png"}]))
    with pytest.raises(DataError):
        load_dataset(tmp_path)


def test_augment_identity_returns_input():
    s = make_sample()
    out = augment(s, AugmentConfig.identity(), 0)
    assert out is s


def test_augment_mirror_only():
    s = make_sample()
    cfg = AugmentConfig(0.0, (0.0, 0.0), (0.0, 0.0), 1.0, (1.0, 1.0))
    out = augment(s, cfg, 0)
    assert np.array_equal(out.image, s.image[:, ::-1])
    assert [b for b, _ in out.annotations] == [BoxAbs(48 - 9.0, 7.0, 6.0, 6.0),
                                               BoxAbs(48 - 35.0, 25.0, 10.0, 10.0)]
    assert [c for _, c in out.annotations] == [1, 3]


def test_augment_keeps_mask_image_consistent():
    s = make_sample()
    cfg = AugmentConfig(color_jitter_prob=0.0)
    for seed in range(10):
        out = augment(s, cfg, seed)
        assert out.image.shape == s.image.shape
        check_instance_ids(out.mask)
        red = out.image[out.mask > 0]
        assert len(red) == 0 or red[:, 0].mean() > 120


def test_augment_config_validation():
    with pytest.raises(ConfigError):
        AugmentConfig(mirror_prob=1.5).validate()
    with pytest.raises(ConfigError):
        AugmentConfig(scale=(1.2, 0.9)).validate()


def test_split_is_seeded_partition():
    samples = toy_dataset(6, seed=0, size=(32, 32))
    a, b = split_dataset(samples, (2, 1), seed=4)
    assert len(a) == 4 and len(b) == 2
    assert {s.name for s in a} | {s.name for s in b} == {s.name for s in samples}
    a2, _ = split_dataset(samples, (2, 1), seed=4)
    assert [s.name for s in a] == [s.name for s in a2]
