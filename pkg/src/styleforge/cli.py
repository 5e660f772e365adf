"""Command-line surface: corpus synthesis, augmentation runs, reports.

Exit codes: 0 on success, 2 for configuration errors, 3 for I/O and data
errors. All commands are deterministic given their flags and seed.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .colorperm import COINFLIP, UNIFORM6, CpMode, apply_permutation, sample_permutation
from .dataio import (
    load_image,
    parse_annotations,
    parse_image_index,
    save_image,
    save_tensor,
)
from .errors import DecodeError, FormatError, InvalidConfig, StyleForgeError
from .memory import DUAL, EXCHANGE, NO_EXCHANGE, SHARED, DsmConfig, DsmState, restore_state, snapshot_state
from .pipeline import PipelineConfig, augment_batch, export_style_table, read_style_table, style_diversity
from .report import render_diversity_report, render_sweep_report
from .rng import stream
from .synth import generate_corpus

log = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_IO = 3


def _fail(code: int, message: str) -> "click.exceptions.Exit":
    click.echo(f"error: {message}", err=True)
    return click.exceptions.Exit(code)


def _run_guarded(fn):
    """Map package errors onto the documented exit codes."""
    try:
        fn()
    except InvalidConfig as exc:
        raise _fail(EXIT_CONFIG, str(exc))
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        raise _fail(EXIT_IO, str(exc))
    except (DecodeError, FormatError, OSError) as exc:
        raise _fail(EXIT_IO, str(exc))
    except StyleForgeError as exc:
        raise _fail(EXIT_IO, str(exc))


@click.group()
@click.option("--verbose", is_flag=True, help="Log per-step details to stderr.")
def main(verbose: bool) -> None:
    """Deterministic color-permutation and dual-style-memory augmentation."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


# --------------------------------------------------------------------------
# synth


@main.command()
@click.option("--n", type=int, required=True, help="Number of images to generate.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--size", default="96x96", show_default=True, help="Image size as HxW.")
@click.option("--boxes", type=int, default=2, show_default=True, help="Objects per image.")
def synth(n: int, out_dir: Path, seed: int, size: str, boxes: int) -> None:
    """Generate a synthetic corpus with COCO-subset annotations."""

    def run() -> None:
        try:
            h, w = (int(v) for v in size.lower().split("x"))
        except ValueError:
            raise InvalidConfig(f"--size must look like 96x96, got {size!r}") from None
        infos, _ = generate_corpus(n, out_dir, seed=seed, size=(h, w), boxes_per_image=boxes)
        click.echo(f"wrote {len(infos)} images and annotations.json to {out_dir}")

    _run_guarded(run)


# --------------------------------------------------------------------------
# cp


@main.command()
@click.option("--images", "images_dir", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--mode", type=click.Choice([UNIFORM6, COINFLIP]), default=COINFLIP, show_default=True)
@click.option("--p-raw", type=float, default=0.5, show_default=True, help="Keep-raw probability (coinflip mode).")
@click.option("--seed", type=int, default=0, show_default=True)
def cp(images_dir: Path, out_dir: Path, mode: str, p_raw: float, seed: int) -> None:
    """Apply color perturbation to every image in a directory.

    Images are processed in sorted-filename order, one random substream per
    index; outputs are written as PNG under the same basename.
    """

    def run() -> None:
        cp_mode = CpMode(mode, p_raw)
        paths = sorted(
            p for p in images_dir.iterdir() if p.suffix.lower() in (".png", ".ppm")
        )
        if not paths:
            raise FileNotFoundError(f"no .png or .ppm images in {images_dir}")
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = []
        for index, path in enumerate(paths):
            img = load_image(path)
            perm = sample_permutation(stream(seed, "cp", index), cp_mode)
            save_image(apply_permutation(img, perm), out_dir / (path.stem + ".png"))
            rows.append((path.name, perm.map))
        with open(out_dir / "perms.csv", "w", encoding="utf-8") as fh:
            fh.write("file,perm\n")
            for name, pmap in rows:
                fh.write(f"{name},{pmap[0]}{pmap[1]}{pmap[2]}\n")
        click.echo(f"permuted {len(rows)} images into {out_dir}")

    _run_guarded(run)


# --------------------------------------------------------------------------
# augment


def _load_config_file(path: Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InvalidConfig(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidConfig(f"config file {path} must hold a JSON object")
    return PipelineConfig.from_json_dict(raw)


def _parse_placement(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.replace("&", ",").split(",") if part != "")
    except ValueError:
        raise InvalidConfig(f"placement must be block indices like '0' or '0&1', got {text!r}") from None


def _snapshot_path(base: Path, block: int, multi: bool) -> Path:
    if not multi:
        return base
    return base.with_name(f"{base.stem}_block{block}{base.suffix}")


def _resolve_augment_config(
    config: Path | None,
    images_dir: Path | None,
    ann_file: Path | None,
    out_dir: Path | None,
    seed: int | None,
    dsm_placement: str | None,
    dsm_capacity: int | None,
    dsm_mode: str | None,
    dsm_layout: str | None,
    dsm_p: float | None,
    cp_flag: bool | None,
    cp_mode: str | None,
    p_raw: float | None,
) -> PipelineConfig:
    cfg = _load_config_file(config)
    dsm = cfg.dsm
    dsm = DsmConfig(
        exchange=dsm_mode if dsm_mode is not None else dsm.exchange,
        memory_layout=dsm_layout if dsm_layout is not None else dsm.memory_layout,
        capacity=dsm_capacity if dsm_capacity is not None else dsm.capacity,
        apply_probability=dsm_p if dsm_p is not None else dsm.apply_probability,
        eps=dsm.eps,
    )
    mode = cfg.cp_mode
    mode = CpMode(
        cp_mode if cp_mode is not None else mode.variant,
        p_raw if p_raw is not None else mode.p_raw,
    )
    return PipelineConfig(
        cp_enabled=cp_flag if cp_flag is not None else cfg.cp_enabled,
        cp_mode=mode,
        dsm=dsm,
        dsm_placement=_parse_placement(dsm_placement) if dsm_placement is not None else cfg.dsm_placement,
        extractor=cfg.extractor,
        seed=seed if seed is not None else cfg.seed,
        images_dir=str(images_dir) if images_dir is not None else cfg.images_dir,
        ann_file=str(ann_file) if ann_file is not None else cfg.ann_file,
        out_dir=str(out_dir) if out_dir is not None else cfg.out_dir,
    )


def _load_batch_inputs(cfg: PipelineConfig):
    if not cfg.images_dir or not cfg.ann_file:
        raise InvalidConfig("both an images directory and an annotation file are required")
    infos = parse_image_index(cfg.ann_file)
    annotations = parse_annotations(cfg.ann_file)
    items = []
    for info in infos:
        try:
            items.append((info, load_image(Path(cfg.images_dir) / info.file_name)))
        except (StyleForgeError, OSError) as exc:
            raise type(exc)(f"image {info.id!r}: {exc}") from exc
    return items, annotations


def _trace_to_json(image_id, block, trace) -> dict:
    records = []
    for rec in trace.records:
        records.append(
            {
                "kind": rec.kind,
                "object_index": rec.object_index,
                "source_memory": rec.source_memory,
                "sampled_index": rec.sampled_index,
                "fallback": rec.fallback,
                "pushed": {"mu": rec.pushed.mu.tolist(), "sigma": rec.pushed.sigma.tolist()},
                "target": None
                if rec.target is None
                else {"mu": rec.target.mu.tolist(), "sigma": rec.target.sigma.tolist()},
            }
        )
    return {"image_id": image_id, "block": block, "skipped": trace.skipped, "records": records}


@main.command()
@click.option("--config", type=click.Path(path_type=Path), default=None, help="JSON config file.")
@click.option("--images", "images_dir", type=click.Path(path_type=Path), default=None)
@click.option("--ann", "ann_file", type=click.Path(path_type=Path), default=None)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--dsm-placement", default=None, help="Block indices, e.g. '0' or '0&1'.")
@click.option("--dsm-capacity", type=int, default=None)
@click.option("--dsm-mode", type=click.Choice([EXCHANGE, NO_EXCHANGE]), default=None)
@click.option("--dsm-layout", type=click.Choice([DUAL, SHARED]), default=None)
@click.option("--dsm-p", type=float, default=None, help="Probability of applying the restyle pass.")
@click.option("--cp/--no-cp", "cp_flag", default=None, help="Enable or disable color perturbation.")
@click.option("--cp-mode", type=click.Choice([UNIFORM6, COINFLIP]), default=None)
@click.option("--p-raw", type=float, default=None)
@click.option("--export-styles", type=click.Path(path_type=Path), default=None, help="Style CSV path (default: OUT/styles.csv).")
@click.option("--snapshot", type=click.Path(path_type=Path), default=None, help="Write final queue state here.")
@click.option("--state-in", type=click.Path(path_type=Path), default=None, help="Resume queues from a snapshot.")
def augment(
    config, images_dir, ann_file, out_dir, seed,
    dsm_placement, dsm_capacity, dsm_mode, dsm_layout, dsm_p,
    cp_flag, cp_mode, p_raw, export_styles, snapshot, state_in,
) -> None:
    """Run the full pipeline over a corpus and write a deterministic output tree."""

    def run() -> None:
        cfg = _resolve_augment_config(
            config, images_dir, ann_file, out_dir, seed,
            dsm_placement, dsm_capacity, dsm_mode, dsm_layout, dsm_p,
            cp_flag, cp_mode, p_raw,
        )
        if not cfg.out_dir:
            raise InvalidConfig("an output directory is required")
        out = Path(cfg.out_dir)
        multi = len(cfg.dsm_placement) > 1

        states = None
        if state_in is not None:
            states = {
                b: restore_state(_snapshot_path(state_in, b, multi)) for b in cfg.dsm_placement
            }
            for b, st in states.items():
                if st.layout != cfg.dsm.memory_layout or st.capacity != cfg.dsm.capacity:
                    raise InvalidConfig(
                        f"snapshot for block {b} has layout={st.layout!r} capacity={st.capacity}, "
                        f"config wants layout={cfg.dsm.memory_layout!r} capacity={cfg.dsm.capacity}"
                    )

        items, annotations = _load_batch_inputs(cfg)
        result = augment_batch(items, annotations, cfg, states)

        (out / "images").mkdir(parents=True, exist_ok=True)
        (out / "features").mkdir(parents=True, exist_ok=True)
        # out_dir is run-local, not part of the transform config; keep the
        # recorded config identical across runs that differ only in --out
        recorded = cfg.to_json_dict()
        recorded["out_dir"] = None
        (out / "config.json").write_text(
            json.dumps(recorded, indent=2, sort_keys=True), encoding="utf-8"
        )
        for info, img in result.images:
            save_image(img, out / "images" / (Path(info.file_name).stem + ".png"))
        for info, fm in result.features:
            save_tensor(fm, out / "features" / (Path(info.file_name).stem + ".npy"))
        styles_path = export_styles if export_styles is not None else out / "styles.csv"
        export_style_table(result.style_table, styles_path)
        traces_json = [_trace_to_json(i, b, t) for i, b, t in result.traces]
        (out / "traces.json").write_text(
            json.dumps(traces_json, indent=2, sort_keys=True), encoding="utf-8"
        )
        if snapshot is not None:
            for b in cfg.dsm_placement:
                snapshot_state(result.states[b], _snapshot_path(snapshot, b, multi))
        click.echo(
            f"augmented {len(result.images)} images "
            f"({len(result.style_table.rows)} style rows) into {out}"
        )

    _run_guarded(run)


# --------------------------------------------------------------------------
# sweep


@main.command()
@click.option("--param", type=click.Choice(["capacity", "placement"]), required=True)
@click.option("--values", required=True, help="Comma-separated values, e.g. '10,100' or '0,1,0&1'.")
@click.option("--config", type=click.Path(path_type=Path), default=None)
@click.option("--images", "images_dir", type=click.Path(path_type=Path), required=True)
@click.option("--ann", "ann_file", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=None)
def sweep(param, values, config, images_dir, ann_file, out_dir, seed) -> None:
    """Re-run the pipeline for each parameter value, reporting output diversity."""

    def run() -> None:
        base = _resolve_augment_config(
            config, images_dir, ann_file, out_dir, seed,
            None, None, None, None, None, None, None, None,
        )
        labels = [v.strip() for v in values.split(",") if v.strip()]
        if not labels:
            raise InvalidConfig("--values must not be empty")
        items, annotations = _load_batch_inputs(base)
        diversities = []
        for label in labels:
            if param == "capacity":
                try:
                    capacity = int(label)
                except ValueError:
                    raise InvalidConfig(f"capacity values must be integers, got {label!r}") from None
                dsm = DsmConfig(
                    exchange=base.dsm.exchange,
                    memory_layout=base.dsm.memory_layout,
                    capacity=capacity,
                    apply_probability=base.dsm.apply_probability,
                    eps=base.dsm.eps,
                )
                cfg = PipelineConfig(
                    cp_enabled=base.cp_enabled, cp_mode=base.cp_mode, dsm=dsm,
                    dsm_placement=base.dsm_placement, extractor=base.extractor,
                    seed=base.seed, images_dir=base.images_dir, ann_file=base.ann_file,
                )
            else:
                cfg = PipelineConfig(
                    cp_enabled=base.cp_enabled, cp_mode=base.cp_mode, dsm=base.dsm,
                    dsm_placement=_parse_placement(label), extractor=base.extractor,
                    seed=base.seed, images_dir=base.images_dir, ann_file=base.ann_file,
                )
            result = augment_batch(items, annotations, cfg)
            diversities.append(style_diversity(result.style_table.vectors()))
        outputs = render_sweep_report(param, labels, diversities, out_dir)
        for label, value in zip(labels, diversities):
            click.echo(f"{param}={label}: diversity={value:.6g}")
        click.echo(f"report written to {outputs['csv']} and {outputs['figure']}")

    _run_guarded(run)


# --------------------------------------------------------------------------
# diversity


@main.command()
@click.option("--styles", "styles_file", type=click.Path(path_type=Path), required=True)
@click.option("--report", "report_dir", type=click.Path(path_type=Path), default=None)
def diversity(styles_file: Path, report_dir: Path | None) -> None:
    """Mean pairwise style distance of an exported style table."""

    def run() -> None:
        table = read_style_table(styles_file)
        if not table.rows:
            raise FormatError(f"style table {styles_file} has no rows")
        value = style_diversity(table.vectors())
        click.echo(repr(value))
        if report_dir is not None:
            outputs = render_diversity_report(table, report_dir)
            click.echo(f"report written to {report_dir} ({', '.join(sorted(outputs))})", err=True)

    _run_guarded(run)


if __name__ == "__main__":
    main()
