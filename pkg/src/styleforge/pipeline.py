"""End-to-end batch pipeline: color perturbation, extraction, restyling.

Per image, in input order: optionally permute the RGB channels, run the
fixed-weight extractor block by block, and apply the dual-style-memory
transform after every placed block while its queues evolve across the whole
batch. The final features (at the deepest placed block) yield one style row
per patch for export and diversity measurement.

Randomness is keyed per image index: ``stream(seed, "cp", i)`` for the
permutation and ``stream(seed, "dsm", block, i)`` for the restyle draws, so a
run is a pure function of (inputs, config, seed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .colorperm import ChannelPermutation, CpMode, apply_permutation, sample_permutation
from .dataio import AnnotationSet, FeatureMap, ImageInfo, ImageRGB
from .errors import FormatError, InvalidConfig, ShapeMismatch, StyleForgeError
from .extractor import ExtractorConfig, image_input, run_block
from .memory import AugmentationTrace, DsmConfig, DsmState, dsm_forward
from .rng import stream
from .stylestats import BACKGROUND, OBJECT, StyleVector, build_partition, region_stats

__all__ = [
    "PipelineConfig",
    "StyleRow",
    "StyleTable",
    "BatchResult",
    "augment_batch",
    "style_diversity",
    "export_style_table",
    "read_style_table",
]


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a batch run depends on besides the input files."""

    cp_enabled: bool = True
    cp_mode: CpMode = field(default_factory=CpMode)
    dsm: DsmConfig = field(default_factory=DsmConfig)
    dsm_placement: tuple[int, ...] = (0,)
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    seed: int = 0
    images_dir: str | None = None
    ann_file: str | None = None
    out_dir: str | None = None

    def __post_init__(self) -> None:
        placement = tuple(sorted({int(b) for b in self.dsm_placement}))
        if not placement:
            raise InvalidConfig("dsm_placement must name at least one block")
        object.__setattr__(self, "dsm_placement", placement)
        if placement[0] < 0 or placement[-1] >= self.extractor.blocks:
            raise InvalidConfig(
                f"dsm_placement {placement} out of range for {self.extractor.blocks} extractor blocks"
            )

    # -- JSON mirror -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "cp": {"enabled": self.cp_enabled, "mode": self.cp_mode.variant, "p_raw": self.cp_mode.p_raw},
            "dsm": {
                "exchange": self.dsm.exchange,
                "layout": self.dsm.memory_layout,
                "capacity": self.dsm.capacity,
                "apply_probability": self.dsm.apply_probability,
                "eps": self.dsm.eps,
                "placement": list(self.dsm_placement),
            },
            "extractor": {
                "blocks": self.extractor.blocks,
                "channels": list(self.extractor.channels),
                "strides": list(self.extractor.strides),
                "weight_seed": self.extractor.weight_seed,
            },
            "seed": self.seed,
            "images_dir": self.images_dir,
            "ann_file": self.ann_file,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_json_dict(cls, raw: dict) -> "PipelineConfig":
        try:
            cp = raw.get("cp", {})
            dsm = raw.get("dsm", {})
            ext = raw.get("extractor", {})
            cp_defaults = CpMode()
            cp_mode = CpMode(cp.get("mode", cp_defaults.variant), cp.get("p_raw", cp_defaults.p_raw))
            dsm_defaults = DsmConfig()
            dsm_cfg = DsmConfig(
                exchange=dsm.get("exchange", dsm_defaults.exchange),
                memory_layout=dsm.get("layout", dsm_defaults.memory_layout),
                capacity=dsm.get("capacity", dsm_defaults.capacity),
                apply_probability=dsm.get("apply_probability", dsm_defaults.apply_probability),
                eps=dsm.get("eps", dsm_defaults.eps),
            )
            ext_defaults = ExtractorConfig()
            extractor = ExtractorConfig(
                blocks=ext.get("blocks", ext_defaults.blocks),
                channels=tuple(ext.get("channels", ext_defaults.channels)),
                strides=tuple(ext.get("strides", ext_defaults.strides)),
                weight_seed=ext.get("weight_seed", ext_defaults.weight_seed),
            )
            return cls(
                cp_enabled=cp.get("enabled", True),
                cp_mode=cp_mode,
                dsm=dsm_cfg,
                dsm_placement=tuple(dsm.get("placement", (0,))),
                extractor=extractor,
                seed=raw.get("seed", 0),
                images_dir=raw.get("images_dir"),
                ann_file=raw.get("ann_file"),
                out_dir=raw.get("out_dir"),
            )
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"malformed pipeline config: {exc}") from exc


@dataclass(frozen=True)
class StyleRow:
    """One exportable style vector: which image, which patch, what statistics."""

    image_id: int | str
    kind: str  # "background" or "object_<i>" (1-based)
    style: StyleVector


@dataclass
class StyleTable:
    """Ordered style rows plus the channel count (kept even when empty)."""

    channels: int
    rows: list[StyleRow] = field(default_factory=list)

    def append(self, row: StyleRow) -> None:
        if row.style.channels != self.channels:
            raise ShapeMismatch(f"row has {row.style.channels} channels, table expects {self.channels}")
        self.rows.append(row)

    def vectors(self) -> list[StyleVector]:
        return [r.style for r in self.rows]


@dataclass
class BatchResult:
    """Everything one batch run produced, in processing order."""

    images: list[tuple[ImageInfo, ImageRGB]]
    features: list[tuple[ImageInfo, FeatureMap]]
    style_table: StyleTable
    traces: list[tuple[int | str, int, AugmentationTrace]]
    permutations: list[tuple[int | str, ChannelPermutation | None]]
    states: dict[int, DsmState]


def _style_row_kind(position: int) -> str:
    return BACKGROUND if position == 0 else f"object_{position}"


def augment_batch(
    items: list[tuple[ImageInfo, ImageRGB]],
    annotations: dict,
    cfg: PipelineConfig,
    states: dict[int, DsmState] | None = None,
) -> BatchResult:
    """Run the pipeline over ``items`` in order with shared evolving DSM state.

    ``annotations`` maps image id to :class:`AnnotationSet`; images without an
    entry get an empty set. Pass ``states`` to resume from restored queues
    (one per placed block); otherwise fresh empty states are created.
    """
    if states is None:
        states = {b: DsmState.from_config(cfg.dsm) for b in cfg.dsm_placement}
    for b in cfg.dsm_placement:
        if b not in states:
            raise InvalidConfig(f"no DSM state supplied for placed block {b}")

    deepest = max(cfg.dsm_placement)
    out_images: list[tuple[ImageInfo, ImageRGB]] = []
    out_features: list[tuple[ImageInfo, FeatureMap]] = []
    traces: list[tuple[int | str, int, AugmentationTrace]] = []
    perms: list[tuple[int | str, ChannelPermutation | None]] = []
    table: StyleTable | None = None

    for index, (info, img) in enumerate(items):
        try:
            ann = annotations.get(info.id, AnnotationSet(info.id))
            if cfg.cp_enabled:
                perm = sample_permutation(stream(cfg.seed, "cp", index), cfg.cp_mode)
                img = apply_permutation(img, perm)
                perms.append((info.id, perm))
            else:
                perms.append((info.id, None))
            out_images.append((info, img))

            x = image_input(img)
            for block in range(deepest + 1):
                x = run_block(x, cfg.extractor, block)
                if block in cfg.dsm_placement:
                    fm = FeatureMap(np.ascontiguousarray(x))
                    fm, trace = dsm_forward(
                        fm,
                        ann,
                        states[block],
                        cfg.dsm,
                        stream(cfg.seed, "dsm", block, index),
                        image_dims=(info.height, info.width),
                    )
                    traces.append((info.id, block, trace))
                    x = fm.data
            final = FeatureMap(np.ascontiguousarray(x))
            out_features.append((info, final))

            if table is None:
                table = StyleTable(channels=final.channels)
            part = build_partition(ann, (info.height, info.width), (final.height, final.width))
            if part.area_background > 0:
                table.append(StyleRow(info.id, _style_row_kind(0), region_stats(final, part.background_mask, cfg.dsm.eps, BACKGROUND)))
            for i, rect in enumerate(part.object_rects, start=1):
                table.append(StyleRow(info.id, _style_row_kind(i), region_stats(final, rect, cfg.dsm.eps, OBJECT)))
        except (StyleForgeError, OSError, ValueError) as exc:
            raise type(exc)(f"image {info.id!r}: {exc}") from exc

    if table is None:
        table = StyleTable(channels=0)
    return BatchResult(out_images, out_features, table, traces, perms, states)


def style_diversity(vectors) -> float:
    """Mean pairwise Euclidean distance over concatenated (mu, sigma) vectors.

    A single vector has diversity zero; an empty collection is an error.
    """
    vectors = list(vectors)
    if not vectors:
        raise InvalidConfig("need at least one style vector")
    channels = vectors[0].channels
    if any(v.channels != channels for v in vectors):
        raise ShapeMismatch("style vectors disagree on channel count")
    if len(vectors) == 1:
        return 0.0
    stacked = np.stack(
        [np.concatenate([v.mu, v.sigma]).astype(np.float64) for v in vectors]
    )
    total = 0.0
    count = 0
    for i in range(len(vectors)):
        diffs = stacked[i + 1 :] - stacked[i]
        total += float(np.sqrt((diffs * diffs).sum(axis=1)).sum())
        count += diffs.shape[0]
    return total / count


# --------------------------------------------------------------------------
# CSV export: image_id,kind,mu_0..mu_{C-1},sigma_0..sigma_{C-1}


def _format_value(v: np.floating) -> str:
    return repr(float(v))


def export_style_table(table: StyleTable, path: str | Path) -> None:
    """Write the table as CSV in row order; an empty table is header-only."""
    header = (
        ["image_id", "kind"]
        + [f"mu_{i}" for i in range(table.channels)]
        + [f"sigma_{i}" for i in range(table.channels)]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in table.rows:
            writer.writerow(
                [row.image_id, row.kind]
                + [_format_value(v) for v in row.style.mu]
                + [_format_value(v) for v in row.style.sigma]
            )


def read_style_table(path: str | Path) -> StyleTable:
    """Parse a CSV written by :func:`export_style_table` back to a table."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such style table: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"empty style table file: {path}") from None
        if len(header) < 2 or header[:2] != ["image_id", "kind"] or (len(header) - 2) % 2 != 0:
            raise FormatError(f"malformed style table header in {path}")
        channels = (len(header) - 2) // 2
        table = StyleTable(channels=channels)
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"style table row {line} has {len(row)} fields, expected {len(header)}")
            image_id: int | str = row[0]
            if isinstance(image_id, str) and image_id.lstrip("-").isdigit():
                image_id = int(image_id)
            kind = row[1]
            source = BACKGROUND if kind == BACKGROUND else OBJECT
            try:
                mu = np.array([float(v) for v in row[2 : 2 + channels]], dtype=np.float32)
                sigma = np.array([float(v) for v in row[2 + channels :]], dtype=np.float32)
                style = StyleVector(mu, sigma, source)
            except ValueError as exc:
                raise FormatError(f"invalid style values at row {line} in {path}: {exc}") from exc
            table.append(StyleRow(image_id, kind, style))
    return table
