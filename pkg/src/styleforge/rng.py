"""Seeded, splittable random streams backed by the Philox counter-based generator.

Every random decision in the package draws from a stream obtained via
:func:`stream`. Streams are keyed, not jumped: the Philox-4x64 key is
``[seed, sha256(path)[:8]]``, so the same ``(seed, *path)`` always yields the
same sequence on every platform, and distinct paths yield statistically
independent sequences. The pipeline convention is one substream per image
index, e.g. ``stream(seed, "cp", image_index)``.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "substream_key"]

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _canonical(part: int | str) -> str:
    if isinstance(part, bool):  # bool is an int subclass; be explicit
        raise TypeError("stream path parts must be int or str, not bool")
    if isinstance(part, int):
        return f"i{part}"
    if isinstance(part, str):
        return f"s{part}"
    raise TypeError(f"stream path parts must be int or str, got {type(part).__name__}")


def substream_key(*path: int | str) -> int:
    """Stable 64-bit key for a substream path of ints and strings."""
    canon = "/".join(_canonical(p) for p in path)
    digest = hashlib.sha256(canon.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(seed: int, *path: int | str) -> np.random.Generator:
    """Independent random stream for ``(seed, *path)``.

    Reproducible across runs and platforms; callers that need concurrent
    randomness must take one stream per unit of work rather than sharing.
    """
    key = np.array(
        [seed & _MASK64, substream_key(*path)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
