"""Synthetic detection corpus with controllable style distributions.

Scenes are vertical color gradients (one of several weather-like palettes,
cycled per image) with flat-colored rectangles standing in for objects. Box
geometry and colors come from seeded substreams, so a corpus is a pure
function of (seed, count, size). Annotations are written in the COCO-subset
JSON layout.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataio import AnnotationSet, BoundingBox, ImageInfo, ImageRGB, save_image, write_annotations
from .errors import InvalidConfig
from .rng import stream

__all__ = ["PALETTES", "generate_image", "generate_corpus"]

#: Gradient endpoints (top assorted to bottom) and an object base color per scene kind.
PALETTES: dict[str, dict[str, tuple[int, int, int]]] = {
    "sunny": {"top": (140, 190, 235), "bottom": (90, 130, 80), "object": (200, 60, 50)},
    "night": {"top": (10, 12, 40), "bottom": (25, 25, 35), "object": (180, 170, 90)},
    "fog": {"top": (190, 195, 200), "bottom": (140, 145, 150), "object": (80, 90, 110)},
    "rain": {"top": (70, 85, 105), "bottom": (45, 55, 70), "object": (150, 140, 60)},
    "dusk": {"top": (200, 120, 70), "bottom": (60, 40, 70), "object": (40, 60, 130)},
}

_PALETTE_ORDER = tuple(PALETTES)


def _gradient(height: int, width: int, top, bottom, jitter: np.ndarray) -> np.ndarray:
    t = np.linspace(0.0, 1.0, height)[:, None, None]
    top_v = np.asarray(top, dtype=np.float64) + jitter
    bot_v = np.asarray(bottom, dtype=np.float64) + jitter
    img = (1.0 - t) * top_v[None, None, :] + t * bot_v[None, None, :]
    return np.clip(np.rint(np.broadcast_to(img, (height, width, 3))), 0, 255).astype(np.uint8)


def generate_image(
    seed: int,
    index: int,
    size: tuple[int, int] = (96, 96),
    boxes_per_image: int = 2,
) -> tuple[ImageRGB, list[BoundingBox]]:
    """Deterministic scene number ``index`` of the corpus keyed by ``seed``."""
    height, width = size
    if height < 16 or width < 16:
        raise InvalidConfig(f"synthetic images must be at least 16x16, got {size}")
    g = stream(seed, "synth", index)
    palette = PALETTES[_PALETTE_ORDER[index % len(_PALETTE_ORDER)]]
    tint = g.uniform(-18.0, 18.0, size=3)
    pixels = _gradient(height, width, palette["top"], palette["bottom"], tint).copy()

    boxes: list[BoundingBox] = []
    base = np.asarray(palette["object"], dtype=np.float64)
    for _ in range(boxes_per_image):
        bw = int(g.integers(8, max(9, width // 3)))
        bh = int(g.integers(8, max(9, height // 3)))
        x = int(g.integers(0, width - bw))
        y = int(g.integers(0, height - bh))
        color = np.clip(np.rint(base + g.uniform(-30.0, 30.0, size=3)), 0, 255).astype(np.uint8)
        pixels[y : y + bh, x : x + bw] = color
        boxes.append(BoundingBox(float(x), float(y), float(bw), float(bh)))
    return ImageRGB(pixels), boxes


def generate_corpus(
    n: int,
    out_dir: str | Path,
    seed: int = 0,
    size: tuple[int, int] = (96, 96),
    boxes_per_image: int = 2,
) -> tuple[list[ImageInfo], dict]:
    """Write ``n`` scenes plus ``annotations.json`` under ``out_dir``.

    Returns the image index and annotation sets, mirroring what a parse of
    the emitted JSON yields.
    """
    if n < 1:
        raise InvalidConfig(f"corpus size must be >= 1, got {n}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    infos: list[ImageInfo] = []
    sets: dict = {}
    for i in range(n):
        img, boxes = generate_image(seed, i, size, boxes_per_image)
        file_name = f"scene_{i:04d}.png"
        save_image(img, out_dir / file_name)
        info = ImageInfo(id=i, file_name=file_name, width=img.width, height=img.height)
        infos.append(info)
        sets[i] = AnnotationSet(i, tuple(boxes))
    write_annotations(infos, sets, out_dir / "annotations.json")
    return infos, sets
