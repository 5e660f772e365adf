"""Session lifecycle and the two bound operations.

A session owns one dual-style-memory state, its config, and a call counter.
Call ``k`` of :func:`bind_dsm_forward` draws from the stream
``(seed, "dsm", block, k)``, the same rule the batch CLI uses per image
index, so a session fed the same tensors in the same order reproduces a CLI
run bit for bit. Boxes arrive already in feature coordinates; the training
loop owns stride knowledge.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from styleforge import (
    AnnotationSet,
    BoundingBox,
    DsmConfig,
    DsmState,
    FeatureMap,
)
from styleforge.errors import InvalidConfig
from styleforge.memory import dsm_forward, restore_state, snapshot_state
from styleforge.rng import stream

from .errors import SessionClosed, ViewError
from .views import BufferView

__all__ = [
    "SessionHandle",
    "session_open",
    "session_snapshot",
    "session_close",
    "bind_apply_permutation",
    "bind_dsm_forward",
]


class SessionHandle:
    """Opaque owner of one restyle stream; calls must be serialized."""

    def __init__(self, config: DsmConfig, state: DsmState, seed: int, block: int):
        self._config = config
        self._state = state
        self._seed = seed
        self._block = block
        self._calls = 0
        self._closed = False

    def _require_open(self) -> None:
        if self._closed:
            raise SessionClosed("session is closed")


def session_open(config, state_path: str | Path | None = None) -> SessionHandle:
    """Open a session from a JSON config string (or dict).

    Recognized keys: exchange, layout, capacity, apply_probability, eps,
    seed, block; all optional. ``state_path`` restores previously
    snapshotted queues instead of starting empty.
    """
    if isinstance(config, (str, bytes)):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise InvalidConfig(f"config must be a JSON object, got {type(config).__name__}")
    defaults = DsmConfig()
    cfg = DsmConfig(
        exchange=config.get("exchange", defaults.exchange),
        memory_layout=config.get("layout", defaults.memory_layout),
        capacity=config.get("capacity", defaults.capacity),
        apply_probability=config.get("apply_probability", defaults.apply_probability),
        eps=config.get("eps", defaults.eps),
    )
    seed = int(config.get("seed", 0))
    block = int(config.get("block", 0))
    if state_path is not None:
        state = restore_state(state_path)
        if state.layout != cfg.memory_layout or state.capacity != cfg.capacity:
            raise InvalidConfig(
                f"restored state (layout={state.layout!r}, capacity={state.capacity}) "
                f"does not match config (layout={cfg.memory_layout!r}, capacity={cfg.capacity})"
            )
    else:
        state = DsmState.from_config(cfg)
    return SessionHandle(cfg, state, seed, block)


def session_snapshot(session: SessionHandle, path: str | Path) -> None:
    """Persist the session's queues in the engine snapshot format."""
    session._require_open()
    snapshot_state(session._state, path)


def session_close(session: SessionHandle) -> None:
    session._require_open()
    session._closed = True


def bind_apply_permutation(view: BufferView, perm) -> None:
    """Permute the RGB channels of a (h, w, 3) u8 view in place."""
    if view.dtype_tag != "u8":
        raise ViewError(f"channel permutation needs a u8 view, got {view.dtype_tag}")
    perm = tuple(int(v) for v in perm)
    if sorted(perm) != [0, 1, 2]:
        raise ViewError(f"not a permutation of (0, 1, 2): {perm}")
    if not view.array.flags.writeable:
        raise ViewError("in-place permutation needs a writable buffer")
    view.array[:] = view.array[:, :, perm]


def bind_dsm_forward(session: SessionHandle, view: BufferView, boxes) -> tuple[np.ndarray, dict]:
    """Restyle one (C, H, W) f32 view; returns a new buffer plus a trace summary.

    The input buffer is read, never written, so callers keep their
    pre-augmentation features.
    """
    session._require_open()
    if view.dtype_tag != "f32":
        raise ViewError(f"restyle needs an f32 view, got {view.dtype_tag}")
    try:
        fm = FeatureMap(np.ascontiguousarray(view.array))
    except ValueError as exc:
        raise ViewError(str(exc)) from exc
    ann_boxes = []
    for box in boxes:
        x, y, w, h = (float(v) for v in box)
        ann_boxes.append(BoundingBox(x, y, w, h))
    ann = AnnotationSet("session", tuple(ann_boxes))
    rng = stream(session._seed, "dsm", session._block, session._calls)
    session._calls += 1
    out, trace = dsm_forward(fm, ann, session._state, session._config, rng)
    summary = {
        "skipped": trace.skipped,
        "patches": [
            {
                "kind": rec.kind,
                "object_index": rec.object_index,
                "source_memory": rec.source_memory,
                "sampled_index": rec.sampled_index,
                "fallback": rec.fallback,
            }
            for rec in trace.records
        ],
    }
    return out.data.copy(), summary
