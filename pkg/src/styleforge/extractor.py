"""Fixed-weight convolutional feature extractor.

A deterministic stand-in for a backbone: stacked 3x3 convolutions with
stride, zero bias, and a rectifier, whose weights are drawn once from a
seeded stream at scale ``1/sqrt(fan_in)``. It validates transform semantics
at realistic feature shapes; nothing here is trained.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataio import FeatureMap, ImageRGB
from .errors import InvalidConfig
from .rng import stream

__all__ = ["ExtractorConfig", "image_input", "run_block", "extract_features"]


@dataclass(frozen=True)
class ExtractorConfig:
    """Shape of the extractor: per-block output channels and strides, 3x3 kernels."""

    blocks: int = 2
    channels: tuple[int, ...] = (8, 16)
    strides: tuple[int, ...] = (2, 2)
    weight_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "strides", tuple(int(s) for s in self.strides))
        if self.blocks < 1:
            raise InvalidConfig(f"need at least one block, got {self.blocks}")
        if len(self.channels) != self.blocks or len(self.strides) != self.blocks:
            raise InvalidConfig(
                f"channels/strides must list one entry per block: "
                f"{self.channels} / {self.strides} for {self.blocks} blocks"
            )
        if min(self.channels) < 1 or min(self.strides) < 1:
            raise InvalidConfig("channel and stride counts must be >= 1")

    def stride_upto(self, block: int) -> int:
        """Cumulative stride through ``block`` inclusive."""
        out = 1
        for s in self.strides[: block + 1]:
            out *= s
        return out


@lru_cache(maxsize=64)
def _block_weights(cfg: ExtractorConfig, block: int) -> np.ndarray:
    in_channels = 3 if block == 0 else cfg.channels[block - 1]
    g = stream(cfg.weight_seed, "extractor-weights", block)
    fan_in = in_channels * 9
    w = g.standard_normal((cfg.channels[block], in_channels, 3, 3)) / np.sqrt(fan_in)
    return w.astype(np.float32)


def image_input(img: ImageRGB) -> np.ndarray:
    """Image as the extractor's (3, h, w) float32 input in [0, 1]."""
    return np.ascontiguousarray(img.pixels.transpose(2, 0, 1)).astype(np.float32) / np.float32(255.0)


def run_block(x: np.ndarray, cfg: ExtractorConfig, block: int) -> np.ndarray:
    """One block: reflect-pad to a stride multiple, 3x3 conv, rectifier.

    For dims divisible by the stride the output is (channels[block],
    h/stride, w/stride); all outputs are nonnegative.
    """
    if not 0 <= block < cfg.blocks:
        raise InvalidConfig(f"block index {block} out of range for {cfg.blocks} blocks")
    s = cfg.strides[block]
    _, h, w = x.shape
    pad_h = (-h) % s
    pad_w = (-w) % s
    if pad_h or pad_w:
        x = np.pad(x, ((0, 0), (0, pad_h), (0, pad_w)), mode="reflect")
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(xp, (3, 3), axis=(1, 2))[:, ::s, ::s]
    weights = _block_weights(cfg, block)
    y = np.tensordot(weights, windows, axes=([1, 2, 3], [0, 3, 4]))
    return np.maximum(y, np.float32(0.0))


def extract_features(img: ImageRGB, cfg: ExtractorConfig, upto_block: int) -> FeatureMap:
    """Forward through blocks ``0..upto_block`` inclusive."""
    if not 0 <= upto_block < cfg.blocks:
        raise InvalidConfig(f"upto_block {upto_block} out of range for {cfg.blocks} blocks")
    x = image_input(img)
    for b in range(upto_block + 1):
        x = run_block(x, cfg, b)
    return FeatureMap(np.ascontiguousarray(x))
