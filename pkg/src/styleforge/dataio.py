"""Core data model and file I/O: RGB rasters, float32 feature tensors, box annotations.

Images travel as lossless PNG (or PPM P6), feature tensors as NPY v1.0
(little-endian float32, C-order, rank 3), annotations as a minimal
COCO-detection JSON subset. All values are immutable after construction and
safe to share across concurrent readers.
"""

from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, FormatError

__all__ = [
    "ImageRGB",
    "FeatureMap",
    "BoundingBox",
    "AnnotationSet",
    "ImageInfo",
    "load_image",
    "save_image",
    "load_tensor",
    "save_tensor",
    "read_npy_f32",
    "write_npy_f32",
    "parse_annotations",
    "parse_image_index",
    "write_annotations",
]

NPY_MAGIC = b"\x93NUMPY"


@dataclass(frozen=True)
class ImageRGB:
    """8-bit interleaved RGB raster, pixels shaped (h, w, 3)."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8 or px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) uint8 pixels, got {px.dtype} {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        object.__setattr__(self, "pixels", np.ascontiguousarray(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class FeatureMap:
    """Finite float32 feature tensor, channel-major (C, H, W)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.dtype != np.float32 or arr.ndim != 3:
            raise ValueError(f"expected (C, H, W) float32 data, got {arr.dtype} shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("feature map contains NaN or Inf")
        object.__setattr__(self, "data", np.ascontiguousarray(arr))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in image pixel coordinates: top-left corner plus size.

    Kept permissive on purpose: parsers validate on ingest, and the region
    partitioner drops boxes that lose every cell at feature resolution.
    """

    x: float
    y: float
    w: float
    h: float


@dataclass(frozen=True)
class AnnotationSet:
    """Ordered boxes for one image; order is preserved end to end."""

    image_id: int | str
    boxes: tuple[BoundingBox, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "boxes", tuple(self.boxes))


@dataclass(frozen=True)
class ImageInfo:
    """Identity row from an annotation file's image table."""

    id: int | str
    file_name: str
    width: int
    height: int


# --------------------------------------------------------------------------
# images


def load_image(path: str | Path) -> ImageRGB:
    """Decode an 8-bit RGB PNG or PPM (P6) file.

    Grayscale, palette, and alpha inputs are rejected rather than silently
    converted.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "PPM"):
                raise DecodeError(f"unsupported image format {im.format!r} in {path}")
            if im.mode != "RGB":
                raise DecodeError(f"expected 8-bit RGB pixels, got mode {im.mode!r} in {path}")
            im.load()
            arr = np.asarray(im, dtype=np.uint8)
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    return ImageRGB(arr)


def save_image(img: ImageRGB, path: str | Path) -> None:
    """Write ``img`` losslessly; PNG unless the path ends in .ppm (then P6)."""
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() == ".ppm" else "PNG"
    Image.fromarray(img.pixels, mode="RGB").save(path, format=fmt)


# --------------------------------------------------------------------------
# NPY v1.0 tensors
#
# The codec is written out explicitly (rather than calling numpy's save/load)
# so the on-disk contract stays strict: magic + version 1.0, descr '<f4',
# fortran_order false, rank-3 shape, no trailing bytes. Interop with numpy's
# own reader/writer is pinned by tests.


def _npy_header_bytes(shape: tuple[int, ...]) -> bytes:
    dict_str = "{'descr': '<f4', 'fortran_order': False, 'shape': %s, }" % (repr(tuple(shape)),)
    # pad so magic(6) + version(2) + hlen(2) + header is 64-byte aligned
    pad = (-(10 + len(dict_str) + 1)) % 64
    return (dict_str + " " * pad + "\n").encode("latin1")


def write_npy_f32(arr: np.ndarray, path: str | Path) -> None:
    """Write a rank-3 float32 array as NPY v1.0 (little-endian, C-order)."""
    arr = np.asarray(arr)
    if arr.dtype != np.float32 or arr.ndim != 3:
        raise ValueError(f"expected rank-3 float32 array, got {arr.dtype} rank {arr.ndim}")
    header = _npy_header_bytes(arr.shape)
    payload = np.ascontiguousarray(arr).astype("<f4", copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(NPY_MAGIC)
        fh.write(b"\x01\x00")
        fh.write(struct.pack("<H", len(header)))
        fh.write(header)
        fh.write(payload)


def read_npy_f32(path: str | Path) -> np.ndarray:
    """Read an NPY v1.0 file, enforcing float32 little-endian C-order rank 3."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such tensor file: {path}")
    with open(path, "rb") as fh:
        preamble = fh.read(10)
        if len(preamble) < 10 or preamble[:6] != NPY_MAGIC:
            raise FormatError(f"not an NPY file: {path}")
        major, minor = preamble[6], preamble[7]
        if (major, minor) != (1, 0):
            raise FormatError(f"unsupported NPY version {major}.{minor} in {path}")
        (hlen,) = struct.unpack("<H", preamble[8:10])
        header_raw = fh.read(hlen)
        if len(header_raw) != hlen:
            raise FormatError(f"truncated NPY header in {path}")
        try:
            meta = ast.literal_eval(header_raw.decode("latin1"))
        except (ValueError, SyntaxError) as exc:
            raise FormatError(f"unparseable NPY header in {path}: {exc}") from exc
        if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
            raise FormatError(f"malformed NPY header dict in {path}")
        if meta["descr"] != "<f4":
            raise FormatError(f"expected dtype '<f4', got {meta['descr']!r} in {path}")
        if meta["fortran_order"] is not False:
            raise FormatError(f"expected C-order payload in {path}")
        shape = meta["shape"]
        if (
            not isinstance(shape, tuple)
            or len(shape) != 3
            or not all(isinstance(n, int) and n >= 0 for n in shape)
        ):
            raise FormatError(f"expected rank-3 shape, got {shape!r} in {path}")
        count = int(np.prod(shape, dtype=np.int64))
        payload = fh.read(count * 4)
        if len(payload) != count * 4:
            raise FormatError(f"truncated NPY payload in {path}")
        if fh.read(1):
            raise FormatError(f"trailing bytes after NPY payload in {path}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(shape)
    return arr.astype(np.float32, copy=True)


def load_tensor(path: str | Path) -> FeatureMap:
    """Load a (C, H, W) float32 tensor from an NPY v1.0 file."""
    arr = read_npy_f32(path)
    try:
        return FeatureMap(arr)
    except ValueError as exc:
        raise FormatError(f"invalid tensor payload in {path}: {exc}") from exc


def save_tensor(fm: FeatureMap, path: str | Path) -> None:
    """Write a feature map as NPY v1.0, shape recorded as (C, H, W)."""
    write_npy_f32(fm.data, path)


# --------------------------------------------------------------------------
# annotations (COCO-detection subset)


def _require(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise FormatError(f"annotation file missing field {key!r} in {ctx}")
    return obj[key]


def _load_annotation_file(path: str | Path) -> tuple[list[ImageInfo], dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such annotation file: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"annotation file is not valid JSON: {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise FormatError(f"annotation file must contain a JSON object: {path}")

    infos: list[ImageInfo] = []
    sets: dict = {}
    for entry in _require(raw, "images", str(path)):
        info = ImageInfo(
            id=_require(entry, "id", "images[]"),
            file_name=_require(entry, "file_name", "images[]"),
            width=_require(entry, "width", "images[]"),
            height=_require(entry, "height", "images[]"),
        )
        if info.id in sets:
            raise FormatError(f"duplicate image id {info.id!r} in {path}")
        if info.width < 1 or info.height < 1:
            raise FormatError(f"non-positive image dims for id {info.id!r} in {path}")
        infos.append(info)
        sets[info.id] = []

    dims = {info.id: (info.width, info.height) for info in infos}
    for ann in _require(raw, "annotations", str(path)):
        image_id = _require(ann, "image_id", "annotations[]")
        bbox = _require(ann, "bbox", "annotations[]")
        if image_id not in sets:
            raise FormatError(f"annotation references unknown image id {image_id!r} in {path}")
        if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
            raise FormatError(f"bbox must be [x, y, w, h], got {bbox!r} in {path}")
        x, y, w, h = (float(v) for v in bbox)
        if w <= 0 or h <= 0:
            raise FormatError(f"non-positive bbox size {bbox!r} for image {image_id!r} in {path}")
        img_w, img_h = dims[image_id]
        if x >= img_w or y >= img_h or x + w <= 0 or y + h <= 0:
            raise FormatError(
                f"bbox {bbox!r} does not intersect image {image_id!r} ({img_w}x{img_h}) in {path}"
            )
        sets[image_id].append(BoundingBox(x, y, w, h))

    ann_sets = {img_id: AnnotationSet(img_id, tuple(boxes)) for img_id, boxes in sets.items()}
    return infos, ann_sets


def parse_annotations(path: str | Path) -> dict:
    """Parse annotations keyed by image id; box order within the file is kept."""
    _, ann_sets = _load_annotation_file(path)
    return ann_sets


def parse_image_index(path: str | Path) -> list[ImageInfo]:
    """Image identity rows (id, file_name, width, height) in file order."""
    infos, _ = _load_annotation_file(path)
    return infos


def write_annotations(infos: list[ImageInfo], sets: dict, path: str | Path) -> None:
    """Serialize images and boxes back to the COCO-subset JSON layout."""
    images = [
        {"id": i.id, "file_name": i.file_name, "width": i.width, "height": i.height}
        for i in infos
    ]
    annotations = []
    for info in infos:
        ann = sets.get(info.id)
        if ann is None:
            continue
        for box in ann.boxes:
            annotations.append({"image_id": info.id, "bbox": [box.x, box.y, box.w, box.h]})
    payload = {"images": images, "annotations": annotations}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
