"""Fixed-weight extractor: shape contracts, determinism, degenerate inputs."""

import numpy as np
import pytest

from styleforge import ExtractorConfig, ImageRGB, extract_features
from styleforge.errors import InvalidConfig
from styleforge.extractor import image_input, run_block


def _image(seed, h=128, w=128):
    g = np.random.Generator(np.random.Philox(key=np.array([seed, 55], dtype=np.uint64)))
    return ImageRGB(g.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def test_default_shapes_per_block():
    img = _image(0)
    cfg = ExtractorConfig()
    assert extract_features(img, cfg, 0).data.shape == (8, 64, 64)
    assert extract_features(img, cfg, 1).data.shape == (16, 32, 32)


def test_same_seed_is_bit_identical():
    img = _image(1)
    cfg = ExtractorConfig(weight_seed=7)
    a = extract_features(img, cfg, 1)
    b = extract_features(img, cfg, 1)
    assert np.array_equal(a.data, b.data)


def test_different_weight_seeds_differ():
    img = _image(2)
    a = extract_features(img, ExtractorConfig(weight_seed=0), 0)
    b = extract_features(img, ExtractorConfig(weight_seed=1), 0)
    assert not np.array_equal(a.data, b.data)


def test_zero_image_gives_zero_features():
    img = ImageRGB(np.zeros((32, 32, 3), dtype=np.uint8))
    out = extract_features(img, ExtractorConfig(), 1)
    assert np.array_equal(out.data, np.zeros_like(out.data))


def test_outputs_are_nonnegative():
    out = extract_features(_image(3), ExtractorConfig(), 1)
    assert (out.data >= 0).all()


def test_reflect_padding_for_odd_dims():
    out = extract_features(_image(4, h=97, w=95), ExtractorConfig(), 0)
    assert out.data.shape == (8, 49, 48)


def test_image_input_scaling():
    img = ImageRGB(np.full((2, 2, 3), 255, dtype=np.uint8))
    x = image_input(img)
    assert x.shape == (3, 2, 2) and x.dtype == np.float32
    assert np.array_equal(x, np.ones((3, 2, 2), dtype=np.float32))


def test_block_index_validation():
    img = _image(5)
    with pytest.raises(InvalidConfig):
        extract_features(img, ExtractorConfig(), 2)
    with pytest.raises(InvalidConfig):
        run_block(image_input(img), ExtractorConfig(), -1)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        ExtractorConfig(blocks=2, channels=(8,), strides=(2, 2))
    with pytest.raises(InvalidConfig):
        ExtractorConfig(blocks=1, channels=(0,), strides=(2,))
    assert ExtractorConfig().stride_upto(1) == 4
