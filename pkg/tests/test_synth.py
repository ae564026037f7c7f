import numpy as np
import pytest

from ffd.data import extract_instances
from ffd.errors import DataError
from ffd.geometry import BoxAbs
from ffd.synth import (PatchInstance, SynthConfig, patches_from_sample, synthesize_scene,
                       verify_overlap_free)
from ffd.toydata import background, fruit_source


@pytest.fixture(scope="module")
def pool():
    rng = np.random.default_rng(0)
    return [fruit_source(rng, (64, 64)) for _ in range(3)]


def check_scene(base, image, anns, mask, n_max):
    assert len(anns) < n_max
    assert verify_overlap_free(anns)
    outside = mask == 0
    assert np.array_equal(image[outside], base[outside])
    inst = extract_instances(mask)
    assert [b for _, _, b in inst] == [b for b, _ in anns]


def test_invariants_over_many_scenes(pool):
    rng = np.random.default_rng(1)
    base = background(rng, (64, 64))
    for seed in range(40):
        image, anns, mask = synthesize_scene(base, pool, SynthConfig(n_max=20), seed)
        check_scene(base, image, anns, mask, 20)


def test_pasted_pixels_equal_source():
    patch = PatchInstance(np.full((3, 4, 3), 200, np.uint8), np.ones((3, 4), bool))
    base = np.zeros((16, 16, 3), np.uint8)
    for seed in range(30):
        image, anns, mask = synthesize_scene(base, [[patch]], SynthConfig(n_max=2), seed)
        if anns:
            break
    assert len(anns) == 1
    box = anns[0][0]
    assert (box.w, box.h) == (4.0, 3.0)
    diff = np.any(image != base, axis=2)
    assert np.array_equal(diff, mask == 1)
    assert np.all(image[mask == 1] == 200)


def test_zero_instances_returns_base(pool):
    base = background(np.random.default_rng(0), (64, 64))
    image, anns, mask = synthesize_scene(base, pool, SynthConfig(n_max=1), 0)
    assert anns == [] and np.array_equal(image, base) and not mask.any()


def test_deterministic(pool):
    base = background(np.random.default_rng(0), (64, 64))
    a = synthesize_scene(base, pool, SynthConfig(n_max=10), 42)
    b = synthesize_scene(base, pool, SynthConfig(n_max=10), 42)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[2], b[2]) and a[1] == b[1]


def test_patches_from_sample(pool):
    patches = patches_from_sample(pool[0])
    assert len(patches) == len(pool[0].annotations)
    for p, (box, _) in zip(patches, pool[0].annotations):
        assert p.size == (box.w, box.h)


def test_empty_pool():
    with pytest.raises(DataError):
        synthesize_scene(np.zeros((8, 8, 3), np.uint8), [], SynthConfig(), 0)


def test_verify_overlap_free():
    assert verify_overlap_free([])
    a, b = BoxAbs(5, 5, 10, 10), BoxAbs(15, 5, 10, 10)
    assert verify_overlap_free([(a, 1), (b, 1)])
    assert not verify_overlap_free([(a, 1), (BoxAbs(8, 8, 10, 10), 1)])
