"""Channel permutation: group structure, sampling laws, losslessness."""

import math

import numpy as np
import pytest

from styleforge import (
    ChannelPermutation,
    CpMode,
    ImageRGB,
    apply_permutation,
    invert_permutation,
    sample_permutation,
)
from styleforge.colorperm import IDENTITY, PERMUTATIONS
from styleforge.errors import InvalidConfig
from styleforge.rng import stream

from oracles import ALL_PERMS, perm_apply_pixel, perm_compose


def _random_image(seed, h=16, w=16):
    g = np.random.Generator(np.random.Philox(key=np.array([seed, 99], dtype=np.uint64)))
    return ImageRGB(g.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def test_support_is_exactly_the_six_orders():
    assert set(PERMUTATIONS) == set(ALL_PERMS)
    seen = {sample_permutation(stream(3, "support", i), CpMode("uniform6")).map for i in range(400)}
    assert seen == set(ALL_PERMS)


def test_coinflip_p_raw_one_is_always_identity():
    rng = stream(11, "coinflip")
    for _ in range(1000):
        assert sample_permutation(rng, CpMode("coinflip", 1.0)).is_identity


def test_coinflip_p_raw_zero_is_never_identity():
    rng = stream(12, "coinflip")
    for _ in range(1000):
        assert not sample_permutation(rng, CpMode("coinflip", 0.0)).is_identity


def test_uniform6_counts_within_three_sigma():
    draws = 60_000
    rng = stream(2718, "chi-square")
    counts = {p: 0 for p in PERMUTATIONS}
    for _ in range(draws):
        counts[sample_permutation(rng, CpMode("uniform6")).map] += 1
    expected = draws / 6
    sigma = math.sqrt(draws * (1 / 6) * (5 / 6))
    for p, count in counts.items():
        assert abs(count - expected) <= 3 * sigma, (p, count)


def test_fixed_seed_reproduces_the_sequence():
    a = [sample_permutation(stream(42, "cp", i), CpMode("uniform6")).map for i in range(50)]
    b = [sample_permutation(stream(42, "cp", i), CpMode("uniform6")).map for i in range(50)]
    assert a == b


def test_apply_moves_channels_per_eq_indexing():
    img = ImageRGB(np.array([[[10, 20, 30]]], dtype=np.uint8))
    out = apply_permutation(img, ChannelPermutation((2, 0, 1)))
    assert tuple(out.pixels[0, 0]) == (30, 10, 20)


def test_identity_is_bit_identical():
    img = _random_image(1)
    out = apply_permutation(img, IDENTITY)
    assert np.array_equal(out.pixels, img.pixels)


def test_double_apply_equals_composed_permutation():
    img = _random_image(2)
    p = ChannelPermutation((1, 2, 0))
    twice = apply_permutation(apply_permutation(img, p), p)
    composed = perm_compose(p.map, p.map)
    assert composed == (2, 0, 1)
    once = apply_permutation(img, ChannelPermutation(composed))
    assert np.array_equal(twice.pixels, once.pixels)


def test_composition_table_matches_group_oracle():
    img = _random_image(3)
    for p in ALL_PERMS:
        for q in ALL_PERMS:
            via_apply = apply_permutation(apply_permutation(img, ChannelPermutation(p)), ChannelPermutation(q))
            via_compose = apply_permutation(img, ChannelPermutation(perm_compose(p, q)))
            assert np.array_equal(via_apply.pixels, via_compose.pixels), (p, q)


def test_invert_examples():
    assert invert_permutation(ChannelPermutation((2, 0, 1))).map == (1, 2, 0)
    assert invert_permutation(IDENTITY).map == (0, 1, 2)


def test_inverse_law_exhaustive():
    img = _random_image(4)
    for p in ALL_PERMS:
        perm = ChannelPermutation(p)
        restored = apply_permutation(apply_permutation(img, perm), invert_permutation(perm))
        assert np.array_equal(restored.pixels, img.pixels), p


def test_channel_multiset_preserved_on_random_images():
    for seed in range(100):
        img = _random_image(seed, h=8, w=8)
        perm = sample_permutation(stream(seed, "multiset"), CpMode("uniform6"))
        out = apply_permutation(img, perm)
        assert np.array_equal(np.sort(out.pixels, axis=2), np.sort(img.pixels, axis=2))
        assert out.pixels.shape == img.pixels.shape


def test_pixel_oracle_agreement():
    img = _random_image(5, h=4, w=4)
    for p in ALL_PERMS:
        out = apply_permutation(img, ChannelPermutation(p))
        for r in range(4):
            for c in range(4):
                assert tuple(out.pixels[r, c]) == perm_apply_pixel(tuple(img.pixels[r, c]), p)


def test_invalid_permutations_and_modes():
    with pytest.raises(ValueError):
        ChannelPermutation((0, 0, 1))
    with pytest.raises(InvalidConfig):
        CpMode("rainbow")
    with pytest.raises(InvalidConfig):
        CpMode("coinflip", 1.5)
