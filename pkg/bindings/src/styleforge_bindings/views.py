"""Caller-owned buffer views.

A view wraps memory the caller already owns (an ndarray, bytearray,
memoryview, or anything else exposing the buffer protocol) without copying.
Only two layouts exist at this boundary: ``u8`` images shaped (h, w, 3) and
``f32`` feature tensors shaped (C, H, W), both contiguous row-major. Nothing
retains the buffer past a call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ViewError

__all__ = ["BufferView", "u8_image_view", "f32_tensor_view"]

_DTYPES = {"u8": np.uint8, "f32": np.float32}


@dataclass(frozen=True)
class BufferView:
    """Typed, shaped window onto caller memory."""

    array: np.ndarray
    dtype_tag: str

    @property
    def shape(self) -> tuple[int, ...]:
        return self.array.shape


def _as_view(buf, dtype_tag: str, shape: tuple[int, ...], writable: bool) -> BufferView:
    dtype = _DTYPES[dtype_tag]
    if isinstance(buf, np.ndarray):
        arr = buf
        if arr.dtype != dtype:
            raise ViewError(f"expected dtype {np.dtype(dtype).name}, got {arr.dtype}")
        if arr.shape != shape:
            raise ViewError(f"expected shape {shape}, got {arr.shape}")
        if not arr.flags.c_contiguous:
            raise ViewError("buffer must be contiguous row-major")
    else:
        try:
            mem = memoryview(buf)
        except TypeError as exc:
            raise ViewError(f"object does not expose a buffer: {type(buf).__name__}") from exc
        expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
        if mem.nbytes != expected:
            raise ViewError(f"buffer holds {mem.nbytes} bytes, expected {expected} for {shape}")
        arr = np.frombuffer(mem, dtype=dtype).reshape(shape)
    if writable and not arr.flags.writeable:
        raise ViewError("in-place operation needs a writable buffer")
    return BufferView(arr, dtype_tag)


def u8_image_view(buf, shape: tuple[int, int, int], writable: bool = True) -> BufferView:
    """View ``buf`` as an (h, w, 3) uint8 image."""
    if len(shape) != 3 or shape[2] != 3 or shape[0] < 1 or shape[1] < 1:
        raise ViewError(f"image shape must be (h, w, 3), got {shape}")
    return _as_view(buf, "u8", tuple(int(v) for v in shape), writable)


def f32_tensor_view(buf, shape: tuple[int, int, int]) -> BufferView:
    """View ``buf`` as a (C, H, W) float32 tensor (read-only use)."""
    if len(shape) != 3 or min(shape) < 1:
        raise ViewError(f"tensor shape must be (C, H, W) with positive dims, got {shape}")
    return _as_view(buf, "f32", tuple(int(v) for v in shape), writable=False)
