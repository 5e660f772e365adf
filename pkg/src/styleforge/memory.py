"""Dual-style-memory: bounded FIFO style queues and cross-exchanged restyling.

The forward pass splits a feature map into background and object patches,
then per patch (background first, then objects in annotation order): compute
its style, push it into the matching queue with FIFO eviction, draw a target
style from the selected queue, and renormalize the patch to the target.
Patches are spliced back at the end. Drawing happens after the push, so
styles saved earlier in the same image are already in the pool.

Target-queue selection: ``exchange`` draws the object's target from the
background queue and vice versa; ``no-exchange`` draws from the same-kind
queue; the ``shared`` layout keeps a single queue for both kinds. An empty
target queue leaves the patch unmodified (cold-start fallback) and consumes
no random draw.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import AnnotationSet, FeatureMap, read_npy_f32, write_npy_f32
from .errors import FormatError, InvalidConfig, ShapeMismatch
from .stylestats import (
    BACKGROUND,
    DEFAULT_EPS,
    OBJECT,
    StyleVector,
    adain,
    build_partition,
    channel_stats,
    patch_stats,
    splice,
    split,
)

__all__ = [
    "EXCHANGE",
    "NO_EXCHANGE",
    "DUAL",
    "SHARED",
    "DEFAULT_CAPACITY",
    "StyleMemory",
    "DsmConfig",
    "DsmState",
    "PatchRecord",
    "AugmentationTrace",
    "dsm_forward",
    "mixstyle",
    "sample_mix_lambda",
    "snapshot_state",
    "restore_state",
]

EXCHANGE = "exchange"
NO_EXCHANGE = "no-exchange"
DUAL = "dual"
SHARED = "shared"

#: Default queue length.
DEFAULT_CAPACITY = 100


class StyleMemory:
    """Bounded FIFO queue of style vectors; insertion order is observable."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if not isinstance(capacity, int) or capacity < 1:
            raise InvalidConfig(f"memory capacity must be an integer >= 1, got {capacity!r}")
        self.capacity = capacity
        self._entries: deque[StyleVector] = deque()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> tuple[StyleVector, ...]:
        return tuple(self._entries)

    def push(self, style: StyleVector) -> None:
        """Append ``style``; if the queue is already full, evict the oldest first."""
        if len(self._entries) >= self.capacity:
            self._entries.popleft()
        self._entries.append(style)

    def sample(self, rng: np.random.Generator) -> tuple[StyleVector, int] | None:
        """Uniform draw over current entries, or None when empty (no draw consumed)."""
        if not self._entries:
            return None
        r = int(rng.integers(0, len(self._entries)))
        return self._entries[r], r


@dataclass(frozen=True)
class DsmConfig:
    """Knobs of the dual-style-memory transform."""

    exchange: str = EXCHANGE
    memory_layout: str = DUAL
    capacity: int = DEFAULT_CAPACITY
    apply_probability: float = 1.0
    eps: float = DEFAULT_EPS

    def __post_init__(self) -> None:
        if self.exchange not in (EXCHANGE, NO_EXCHANGE):
            raise InvalidConfig(f"exchange must be {EXCHANGE!r} or {NO_EXCHANGE!r}, got {self.exchange!r}")
        if self.memory_layout not in (DUAL, SHARED):
            raise InvalidConfig(f"memory_layout must be {DUAL!r} or {SHARED!r}, got {self.memory_layout!r}")
        if not isinstance(self.capacity, int) or self.capacity < 1:
            raise InvalidConfig(f"capacity must be an integer >= 1, got {self.capacity!r}")
        if not 0.0 <= self.apply_probability <= 1.0:
            raise InvalidConfig(f"apply_probability must lie in [0, 1], got {self.apply_probability}")
        if not self.eps > 0:
            raise InvalidConfig(f"eps must be positive, got {self.eps}")


class DsmState:
    """Mutable pair of style queues; under the shared layout both names alias one queue.

    Single-writer: callers must serialize pushes and forwards per instance.
    """

    def __init__(self, layout: str = DUAL, capacity: int = DEFAULT_CAPACITY):
        if layout not in (DUAL, SHARED):
            raise InvalidConfig(f"layout must be {DUAL!r} or {SHARED!r}, got {layout!r}")
        self.layout = layout
        self.m_back = StyleMemory(capacity)
        self.m_obj = self.m_back if layout == SHARED else StyleMemory(capacity)

    @classmethod
    def from_config(cls, cfg: DsmConfig) -> "DsmState":
        return cls(cfg.memory_layout, cfg.capacity)

    @property
    def capacity(self) -> int:
        return self.m_back.capacity


@dataclass(frozen=True)
class PatchRecord:
    """Audit record for one processed patch, in processing order."""

    kind: str                      # "background" | "object"
    object_index: int | None      # 1-based position among retained objects
    pushed: StyleVector           # style computed from the pre-normalization patch
    source_memory: str            # "m_back" | "m_obj" | "shared"
    sampled_index: int | None     # draw index r, or None on fallback
    fallback: bool
    target: StyleVector | None


@dataclass(frozen=True)
class AugmentationTrace:
    """Per-image record of what the forward pass did."""

    skipped: bool
    records: tuple[PatchRecord, ...] = ()


def _target_memory(state: DsmState, cfg: DsmConfig, kind: str) -> tuple[StyleMemory, str]:
    if cfg.memory_layout == SHARED:
        return state.m_back, SHARED
    own_is_back = kind == BACKGROUND
    pick_back = own_is_back if cfg.exchange == NO_EXCHANGE else not own_is_back
    return (state.m_back, "m_back") if pick_back else (state.m_obj, "m_obj")


def dsm_forward(
    fm: FeatureMap,
    ann: AnnotationSet,
    state: DsmState,
    cfg: DsmConfig,
    rng: np.random.Generator,
    image_dims: tuple[int, int] | None = None,
) -> tuple[FeatureMap, AugmentationTrace]:
    """Run the dual-style-memory forward pass on one feature map.

    ``image_dims`` is the (h, w) the annotation boxes live in; when omitted
    the boxes are taken to be in feature coordinates already. One gate draw is
    always consumed; with probability ``1 - apply_probability`` the input is
    returned unchanged and the trace notes the skip. Output shape equals input
    shape and all values stay finite.
    """
    if state.layout != cfg.memory_layout:
        raise InvalidConfig(f"state layout {state.layout!r} does not match config {cfg.memory_layout!r}")
    if state.capacity != cfg.capacity:
        raise InvalidConfig(f"state capacity {state.capacity} does not match config {cfg.capacity}")

    if rng.random() >= cfg.apply_probability:
        return fm, AugmentationTrace(skipped=True)

    dims = image_dims if image_dims is not None else (fm.height, fm.width)
    part = build_partition(ann, dims, (fm.height, fm.width))
    patches = split(fm, part)
    out_patches = list(patches)
    records: list[PatchRecord] = []

    for pos, patch in enumerate(patches):
        if patch.shape[1] == 0:
            continue  # background fully covered by boxes: nothing to push or restyle
        kind = BACKGROUND if pos == 0 else OBJECT
        obj_index = None if pos == 0 else pos
        own = patch_stats(patch, cfg.eps, kind)
        own_memory = state.m_back if kind == BACKGROUND else state.m_obj
        own_memory.push(own)
        target_memory, source_name = _target_memory(state, cfg, kind)
        drawn = target_memory.sample(rng)
        if drawn is None:
            records.append(PatchRecord(kind, obj_index, own, source_name, None, True, None))
            continue
        target, r = drawn
        out_patches[pos] = adain(patch, own, target)
        records.append(PatchRecord(kind, obj_index, own, source_name, r, False, target))

    out = splice(out_patches, part, (fm.channels, fm.height, fm.width))
    return out, AugmentationTrace(skipped=False, records=tuple(records))


def mixstyle(
    fa: FeatureMap,
    fb: FeatureMap,
    lam: float,
    eps: float = DEFAULT_EPS,
) -> FeatureMap:
    """Reference baseline: blend whole-map styles of two maps, restyle the first.

    ``lam = 1`` returns ``fa`` unchanged; ``lam = 0`` transfers ``fb``'s style
    entirely. No regions and no memories are involved.
    """
    if fa.data.shape != fb.data.shape:
        raise ShapeMismatch(f"shape mismatch: {fa.data.shape} vs {fb.data.shape}")
    if not 0.0 <= lam <= 1.0:
        raise InvalidConfig(f"lambda must lie in [0, 1], got {lam}")
    stats_a = channel_stats(fa, eps)
    stats_b = channel_stats(fb, eps)
    blended = StyleVector(
        (lam * stats_a.mu.astype(np.float64) + (1.0 - lam) * stats_b.mu.astype(np.float64)).astype(np.float32),
        (lam * stats_a.sigma.astype(np.float64) + (1.0 - lam) * stats_b.sigma.astype(np.float64)).astype(np.float32),
        stats_a.source_kind,
    )
    flat = fa.data.reshape(fa.channels, -1)
    out = adain(flat, stats_a, blended).reshape(fa.data.shape)
    return FeatureMap(out)


def sample_mix_lambda(rng: np.random.Generator, alpha: float = 0.1) -> float:
    """Beta(alpha, alpha) mixing coefficient, the usual stochastic drive."""
    return float(rng.beta(alpha, alpha))


# --------------------------------------------------------------------------
# snapshots: an NPY stack of (mu, sigma) rows plus a JSON sidecar holding
# layout, capacity, each row's source kind, and each row's queue.


def _sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def snapshot_state(state: DsmState, path: str | Path) -> None:
    """Persist both queues losslessly: ``path`` (NPY) plus ``path + ".json"``."""
    if state.layout == SHARED:
        rows = [("shared", s) for s in state.m_back.entries]
    else:
        rows = [("m_back", s) for s in state.m_back.entries]
        rows += [("m_obj", s) for s in state.m_obj.entries]
    channel_counts = {s.channels for _, s in rows}
    if len(channel_counts) > 1:
        raise FormatError(f"cannot snapshot mixed channel counts {sorted(channel_counts)}")
    channels = channel_counts.pop() if channel_counts else 0
    arr = np.zeros((len(rows), 2, channels), dtype=np.float32)
    for i, (_, s) in enumerate(rows):
        arr[i, 0] = s.mu
        arr[i, 1] = s.sigma
    write_npy_f32(arr, path)
    sidecar = {
        "layout": state.layout,
        "capacity": state.capacity,
        "kinds": [s.source_kind for _, s in rows],
        "order": [queue for queue, _ in rows],
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, sort_keys=True, indent=2), encoding="utf-8")


def restore_state(path: str | Path) -> DsmState:
    """Rebuild a state snapshotted by :func:`snapshot_state`."""
    arr = read_npy_f32(path)
    sidecar_file = _sidecar_path(path)
    if not sidecar_file.exists():
        raise FileNotFoundError(f"missing snapshot sidecar: {sidecar_file}")
    try:
        sidecar = json.loads(sidecar_file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"unparseable snapshot sidecar {sidecar_file}: {exc}") from exc
    try:
        layout = sidecar["layout"]
        capacity = sidecar["capacity"]
        kinds = sidecar["kinds"]
        order = sidecar["order"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"snapshot sidecar {sidecar_file} missing field: {exc}") from exc
    if arr.shape[1] != 2 or len(kinds) != arr.shape[0] or len(order) != arr.shape[0]:
        raise FormatError(f"snapshot payload/sidecar disagree for {path}")

    state = DsmState(layout, capacity)
    for row, kind, queue in zip(arr, kinds, order):
        try:
            style = StyleVector(row[0], row[1], kind)
        except ValueError as exc:
            raise FormatError(f"invalid style row in snapshot {path}: {exc}") from exc
        if layout == SHARED:
            if queue != "shared":
                raise FormatError(f"queue tag {queue!r} invalid for shared layout in {path}")
            target = state.m_back
        elif queue == "m_back":
            target = state.m_back
        elif queue == "m_obj":
            target = state.m_obj
        else:
            raise FormatError(f"unknown queue tag {queue!r} in {path}")
        if len(target) >= capacity:
            raise FormatError(f"snapshot {path} holds more than capacity={capacity} rows for {queue!r}")
        target.push(style)
    return state
