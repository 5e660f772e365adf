"""Channel and region style statistics, AdaIN restyling, and split/splice.

A style is the per-channel (mean, std) pair of a set of feature cells, with
the std regularized inside the square root: ``sigma = sqrt(var + eps)`` using
population variance (divide by the cell count, no Bessel correction). AdaIN
renormalizes a patch so its statistics match a target style.

Region handling: object boxes become integer cell rectangles by outer
rounding (floor the min corner, ceil the max corner) after scaling from image
to feature coordinates, so any box that intersects the image keeps at least
one cell. The background is the mask complement of the rectangle union.
Statistics and patch gathers run in row-major cell order throughout; splice
writes the background first, then objects in annotation order, so on overlap
the later write wins.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .dataio import AnnotationSet, FeatureMap
from .errors import EmptyRegion, InvalidConfig, ShapeMismatch

__all__ = [
    "DEFAULT_EPS",
    "BACKGROUND",
    "OBJECT",
    "StyleVector",
    "RegionPartition",
    "channel_stats",
    "region_stats",
    "patch_stats",
    "adain",
    "build_partition",
    "split",
    "splice",
]

log = logging.getLogger(__name__)

#: Default numerical-stability constant added to the variance.
DEFAULT_EPS = 1e-5

BACKGROUND = "background"
OBJECT = "object"
_KINDS = (BACKGROUND, OBJECT)

#: Half-open cell rectangle on the feature grid: (row0, col0, row1, col1).
Rect = tuple[int, int, int, int]


@dataclass(frozen=True)
class StyleVector:
    """Per-channel (mean, std) of a feature region; std is eps-regularized."""

    mu: np.ndarray
    sigma: np.ndarray
    source_kind: str = BACKGROUND

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float32)
        sigma = np.asarray(self.sigma, dtype=np.float32)
        if mu.ndim != 1 or sigma.shape != mu.shape:
            raise ValueError(f"mu and sigma must be equal-length vectors, got {mu.shape} vs {sigma.shape}")
        if not (np.isfinite(mu).all() and np.isfinite(sigma).all()):
            raise ValueError("style statistics must be finite")
        if not (sigma > 0).all():
            raise ValueError("sigma must be strictly positive")
        if self.source_kind not in _KINDS:
            raise ValueError(f"source_kind must be one of {_KINDS}, got {self.source_kind!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def channels(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class RegionPartition:
    """Background mask plus per-object cell rectangles on one feature grid.

    ``background_mask`` is the complement of the rectangle union; ``dropped``
    counts boxes that lost every cell at this resolution.
    """

    background_mask: np.ndarray
    object_rects: tuple[Rect, ...]
    dropped: int = 0

    def __post_init__(self) -> None:
        mask = np.asarray(self.background_mask)
        if mask.dtype != np.bool_ or mask.ndim != 2:
            raise ValueError("background_mask must be a 2-D boolean grid")
        object.__setattr__(self, "background_mask", mask)
        object.__setattr__(self, "object_rects", tuple(tuple(int(v) for v in r) for r in self.object_rects))

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.background_mask.shape

    @property
    def area_background(self) -> int:
        return int(self.background_mask.sum())

    @property
    def object_areas(self) -> tuple[int, ...]:
        return tuple((r1 - r0) * (c1 - c0) for r0, c0, r1, c1 in self.object_rects)


def _check_eps(eps: float) -> None:
    if not (eps > 0 and math.isfinite(eps)):
        raise InvalidConfig(f"eps must be a positive finite number, got {eps}")


def patch_stats(patch: np.ndarray, eps: float = DEFAULT_EPS, kind: str = BACKGROUND) -> StyleVector:
    """Style of a gathered (C, A) patch: per-channel population mean/std."""
    _check_eps(eps)
    patch = np.asarray(patch)
    if patch.ndim != 2:
        raise ShapeMismatch(f"patch must be (C, A), got shape {patch.shape}")
    if patch.shape[1] < 1:
        raise EmptyRegion("cannot take statistics of an empty patch")
    mu = patch.mean(axis=1, dtype=np.float64)
    var = patch.var(axis=1, dtype=np.float64)
    sigma = np.sqrt(var + eps)
    return StyleVector(mu.astype(np.float32), sigma.astype(np.float32), kind)


def channel_stats(fm: FeatureMap, eps: float = DEFAULT_EPS, kind: str = BACKGROUND) -> StyleVector:
    """Whole-map style: statistics over all H*W cells of each channel."""
    return patch_stats(fm.data.reshape(fm.channels, -1), eps, kind)


def gather_region(fm: FeatureMap, region: Rect | np.ndarray) -> np.ndarray:
    """Cells of ``region`` as a (C, A) array in row-major cell order.

    ``region`` is either a half-open cell rectangle or a boolean (H, W) mask.
    """
    if isinstance(region, np.ndarray):
        if region.dtype != np.bool_ or region.shape != (fm.height, fm.width):
            raise ShapeMismatch(
                f"mask must be boolean with shape {(fm.height, fm.width)}, got {region.dtype} {region.shape}"
            )
        return fm.data[:, region]
    r0, c0, r1, c1 = (int(v) for v in region)
    if not (0 <= r0 <= r1 <= fm.height and 0 <= c0 <= c1 <= fm.width):
        raise ShapeMismatch(f"rectangle {region!r} exceeds the {fm.height}x{fm.width} grid")
    return fm.data[:, r0:r1, c0:c1].reshape(fm.channels, -1).copy()


def region_stats(
    fm: FeatureMap,
    region: Rect | np.ndarray,
    eps: float = DEFAULT_EPS,
    kind: str = BACKGROUND,
) -> StyleVector:
    """Style of one region, same formulas as :func:`channel_stats` over A cells."""
    cells = gather_region(fm, region)
    if cells.shape[1] == 0:
        raise EmptyRegion(f"region {region!r} selects zero cells")
    return patch_stats(cells, eps, kind)


def adain(patch: np.ndarray, own: StyleVector, target: StyleVector) -> np.ndarray:
    """Renormalize a (C, A) patch from its own style to the target style.

    Evaluates ``(target.sigma / own.sigma) * (patch - own.mu) + target.mu``
    per channel in float64, returning float32. When target equals own this is
    the identity bit-for-bit.
    """
    patch = np.asarray(patch)
    if patch.ndim != 2:
        raise ShapeMismatch(f"patch must be (C, A), got shape {patch.shape}")
    if own.channels != patch.shape[0] or target.channels != patch.shape[0]:
        raise ShapeMismatch(
            f"channel mismatch: patch C={patch.shape[0]}, own C={own.channels}, target C={target.channels}"
        )
    scale = target.sigma.astype(np.float64) / own.sigma.astype(np.float64)
    out = scale[:, None] * (patch.astype(np.float64) - own.mu.astype(np.float64)[:, None])
    out += target.mu.astype(np.float64)[:, None]
    return out.astype(np.float32)


def build_partition(
    ann: AnnotationSet,
    image_dims: tuple[int, int],
    feature_dims: tuple[int, int],
) -> RegionPartition:
    """Scale boxes from image (h, w) space onto the (H, W) feature grid.

    Boxes are outer-rounded then clipped; a box that keeps no cell is dropped
    with a warning rather than failing. Retained rectangles stay in
    annotation order.
    """
    h, w = image_dims
    hf, wf = feature_dims
    if min(h, w, hf, wf) < 1:
        raise InvalidConfig(f"dims must be positive, got image {image_dims}, feature {feature_dims}")
    sy = hf / h
    sx = wf / w
    rects: list[Rect] = []
    dropped = 0
    for box in ann.boxes:
        if box.w <= 0 or box.h <= 0:
            # outer rounding would inflate a zero-area box to a full cell
            dropped += 1
            log.warning(
                "dropping zero-area box (%s, %s, %s, %s) of image %r",
                box.x, box.y, box.w, box.h, ann.image_id,
            )
            continue
        r0 = max(0, math.floor(box.y * sy))
        c0 = max(0, math.floor(box.x * sx))
        r1 = min(hf, math.ceil((box.y + box.h) * sy))
        c1 = min(wf, math.ceil((box.x + box.w) * sx))
        if r1 <= r0 or c1 <= c0:
            dropped += 1
            log.warning(
                "dropping box (%s, %s, %s, %s) of image %r: no cells at %dx%d resolution",
                box.x, box.y, box.w, box.h, ann.image_id, hf, wf,
            )
            continue
        rects.append((r0, c0, r1, c1))
    mask = np.ones((hf, wf), dtype=bool)
    for r0, c0, r1, c1 in rects:
        mask[r0:r1, c0:c1] = False
    return RegionPartition(mask, tuple(rects), dropped)


def split(fm: FeatureMap, part: RegionPartition) -> list[np.ndarray]:
    """Gather patches ``[background, object_1, ...]`` as (C, A) arrays.

    Overlapping rectangles duplicate cells: each object patch sees its full
    rectangle. The background patch may have zero cells when boxes cover the
    whole grid.
    """
    if part.grid_shape != (fm.height, fm.width):
        raise ShapeMismatch(
            f"partition grid {part.grid_shape} does not match feature map {(fm.height, fm.width)}"
        )
    patches = [fm.data[:, part.background_mask]]
    for rect in part.object_rects:
        patches.append(gather_region(fm, rect))
    return patches


def splice(
    patches: list[np.ndarray],
    part: RegionPartition,
    dims: tuple[int, int, int],
) -> FeatureMap:
    """Scatter patches back to their positions; inverse of :func:`split`.

    Writes the background first, then objects in order, so on overlap the
    later object wins. Every grid cell is covered by construction.
    """
    channels, height, width = dims
    if part.grid_shape != (height, width):
        raise ShapeMismatch(f"partition grid {part.grid_shape} does not match dims {dims}")
    if len(patches) != 1 + len(part.object_rects):
        raise ShapeMismatch(
            f"expected {1 + len(part.object_rects)} patches (background + objects), got {len(patches)}"
        )
    out = np.zeros((channels, height, width), dtype=np.float32)
    bg = np.asarray(patches[0], dtype=np.float32)
    if bg.shape != (channels, part.area_background):
        raise ShapeMismatch(f"background patch shape {bg.shape} != {(channels, part.area_background)}")
    out[:, part.background_mask] = bg
    for patch, (r0, c0, r1, c1) in zip(patches[1:], part.object_rects):
        patch = np.asarray(patch, dtype=np.float32)
        area = (r1 - r0) * (c1 - c0)
        if patch.shape != (channels, area):
            raise ShapeMismatch(f"object patch shape {patch.shape} != {(channels, area)}")
        out[:, r0:r1, c0:c1] = patch.reshape(channels, r1 - r0, c1 - c0)
    return FeatureMap(out)
