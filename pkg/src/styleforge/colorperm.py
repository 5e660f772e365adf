"""Image-level color augmentation by random permutation of the RGB channels.

The transform is lossless: output channel ``k`` is a copy of input channel
``perm.map[k]``, so every pixel keeps the same multiset of values. It applies
to 8-bit images before feature extraction, never to feature maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import ImageRGB
from .errors import InvalidConfig

__all__ = [
    "PERMUTATIONS",
    "IDENTITY",
    "ChannelPermutation",
    "CpMode",
    "sample_permutation",
    "apply_permutation",
    "invert_permutation",
]

#: All six channel orders in lexicographic order; index 0 is the identity.
PERMUTATIONS: tuple[tuple[int, int, int], ...] = (
    (0, 1, 2),
    (0, 2, 1),
    (1, 0, 2),
    (1, 2, 0),
    (2, 0, 1),
    (2, 1, 0),
)

UNIFORM6 = "uniform6"
COINFLIP = "coinflip"


@dataclass(frozen=True)
class ChannelPermutation:
    """Channel source indices: output channel k reads input channel map[k]."""

    map: tuple[int, int, int]

    def __post_init__(self) -> None:
        m = tuple(int(v) for v in self.map)
        if sorted(m) != [0, 1, 2]:
            raise ValueError(f"not a permutation of (0, 1, 2): {self.map!r}")
        object.__setattr__(self, "map", m)

    @property
    def is_identity(self) -> bool:
        return self.map == (0, 1, 2)


IDENTITY = ChannelPermutation((0, 1, 2))


@dataclass(frozen=True)
class CpMode:
    """Sampling law for channel permutations.

    ``uniform6`` draws uniformly over all six orders (identity included).
    ``coinflip`` keeps the raw image with probability ``p_raw`` and otherwise
    draws uniformly over the five non-identity orders.
    """

    variant: str = COINFLIP
    p_raw: float = 0.5

    def __post_init__(self) -> None:
        if self.variant not in (UNIFORM6, COINFLIP):
            raise InvalidConfig(f"unknown color-perturbation mode {self.variant!r}")
        if not 0.0 <= self.p_raw <= 1.0:
            raise InvalidConfig(f"p_raw must lie in [0, 1], got {self.p_raw}")


def sample_permutation(rng: np.random.Generator, mode: CpMode) -> ChannelPermutation:
    """Draw one permutation from ``mode``'s law using ``rng``.

    uniform6 consumes one integer draw; coinflip consumes one float draw plus
    one integer draw on the non-identity branch.
    """
    if mode.variant == UNIFORM6:
        idx = int(rng.integers(0, 6))
    elif rng.random() < mode.p_raw:
        idx = 0
    else:
        idx = 1 + int(rng.integers(0, 5))
    return ChannelPermutation(PERMUTATIONS[idx])


def apply_permutation(img: ImageRGB, perm: ChannelPermutation) -> ImageRGB:
    """Reorder the image's RGB channels; dimensions are unchanged."""
    return ImageRGB(img.pixels[:, :, list(perm.map)])


def invert_permutation(perm: ChannelPermutation) -> ChannelPermutation:
    """Permutation whose application undoes ``perm``."""
    inv = [0, 0, 0]
    for k, src in enumerate(perm.map):
        inv[src] = k
    return ChannelPermutation(tuple(inv))
