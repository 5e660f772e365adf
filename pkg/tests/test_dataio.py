"""Core I/O: image codecs, strict NPY handling, annotation parsing."""

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from styleforge import (
    AnnotationSet,
    BoundingBox,
    FeatureMap,
    ImageInfo,
    ImageRGB,
    load_image,
    load_tensor,
    parse_annotations,
    parse_image_index,
    save_image,
    save_tensor,
)
from styleforge.dataio import read_npy_f32, write_annotations, write_npy_f32
from styleforge.errors import DecodeError, FormatError


def _random_pixels(shape, seed):
    g = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    return g.integers(0, 256, size=shape, dtype=np.uint8)


def _random_tensor(shape, seed):
    g = np.random.Generator(np.random.Philox(key=np.array([seed, 1], dtype=np.uint64)))
    return g.standard_normal(shape).astype(np.float32)


# --------------------------------------------------------------------------
# domain types


def test_image_type_validation():
    with pytest.raises(ValueError):
        ImageRGB(np.zeros((2, 2, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        ImageRGB(np.zeros((0, 2, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        ImageRGB(np.zeros((2, 2, 3), dtype=np.float32))


def test_feature_map_validation():
    with pytest.raises(ValueError):
        FeatureMap(np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        FeatureMap(np.zeros((1, 2, 2), dtype=np.float64))
    bad = np.zeros((1, 2, 2), dtype=np.float32)
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        FeatureMap(bad)


# --------------------------------------------------------------------------
# images


def test_load_constant_png(tmp_path):
    path = tmp_path / "red.png"
    Image.fromarray(np.full((2, 2, 3), (255, 0, 0), dtype=np.uint8), "RGB").save(path)
    img = load_image(path)
    assert (img.height, img.width) == (2, 2)
    assert np.array_equal(img.pixels, np.full((2, 2, 3), (255, 0, 0), dtype=np.uint8))


def test_png_load_save_load_round_trip(tmp_path):
    src = tmp_path / "src.png"
    Image.fromarray(_random_pixels((13, 9, 3), 7), "RGB").save(src)
    first = load_image(src)
    save_image(first, tmp_path / "copy.png")
    second = load_image(tmp_path / "copy.png")
    assert np.array_equal(first.pixels, second.pixels)


def test_save_1x1_black(tmp_path):
    path = tmp_path / "black.png"
    save_image(ImageRGB(np.zeros((1, 1, 3), dtype=np.uint8)), path)
    with Image.open(path) as im:
        assert im.format == "PNG" and im.size == (1, 1)
        assert im.getpixel((0, 0)) == (0, 0, 0)


def test_ppm_round_trip(tmp_path):
    img = ImageRGB(_random_pixels((5, 6, 3), 21))
    save_image(img, tmp_path / "img.ppm")
    back = load_image(tmp_path / "img.ppm")
    assert np.array_equal(img.pixels, back.pixels)


def test_truncated_png_is_decode_error(tmp_path):
    path = tmp_path / "whole.png"
    Image.fromarray(_random_pixels((32, 32, 3), 3), "RGB").save(path)
    clipped = tmp_path / "clipped.png"
    clipped.write_bytes(path.read_bytes()[:60])
    with pytest.raises(DecodeError):
        load_image(clipped)


def test_non_image_bytes_are_decode_error(tmp_path):
    path = tmp_path / "junk.png"
    path.write_bytes(b"definitely not a png")
    with pytest.raises(DecodeError):
        load_image(path)


@pytest.mark.parametrize("mode,shape", [("L", (4, 4)), ("RGBA", (4, 4, 4))])
def test_grayscale_and_alpha_rejected(tmp_path, mode, shape):
    path = tmp_path / f"{mode}.png"
    arr = np.zeros(shape, dtype=np.uint8)
    Image.fromarray(arr, mode).save(path)
    with pytest.raises(DecodeError):
        load_image(path)


def test_missing_image_file():
    with pytest.raises(FileNotFoundError):
        load_image("/nonexistent/nothing.png")


def test_unwritable_save_path(tmp_path):
    img = ImageRGB(np.zeros((1, 1, 3), dtype=np.uint8))
    with pytest.raises(OSError):
        save_image(img, tmp_path / "missing_dir" / "img.png")


@settings(max_examples=25, deadline=None)
@given(
    h=st.integers(1, 12),
    w=st.integers(1, 12),
    seed=st.integers(0, 2**32 - 1),
)
def test_png_round_trip_property(tmp_path_factory, h, w, seed):
    tmp = tmp_path_factory.mktemp("png_prop")
    img = ImageRGB(_random_pixels((h, w, 3), seed))
    save_image(img, tmp / "x.png")
    assert np.array_equal(load_image(tmp / "x.png").pixels, img.pixels)


# --------------------------------------------------------------------------
# NPY tensors


def test_zero_tensor_round_trip(tmp_path):
    fm = FeatureMap(np.zeros((16, 32, 32), dtype=np.float32))
    save_tensor(fm, tmp_path / "z.npy")
    back = load_tensor(tmp_path / "z.npy")
    assert back.data.shape == (16, 32, 32)
    assert np.array_equal(back.data, fm.data)


def test_single_value_tensor(tmp_path):
    save_tensor(FeatureMap(np.full((1, 1, 1), 3.5, dtype=np.float32)), tmp_path / "v.npy")
    assert load_tensor(tmp_path / "v.npy").data[0, 0, 0] == np.float32(3.5)


def test_round_trip_preserves_bit_patterns(tmp_path):
    arr = np.array([[[-0.0, 0.0], [1.5, -1.5]]], dtype=np.float32)
    save_tensor(FeatureMap(arr), tmp_path / "bits.npy")
    back = load_tensor(tmp_path / "bits.npy")
    assert np.array_equal(back.data.view(np.uint32), arr.view(np.uint32))


def test_payload_bytes_stable_over_round_trip(tmp_path):
    fm = FeatureMap(_random_tensor((3, 5, 7), 11))
    save_tensor(fm, tmp_path / "a.npy")
    save_tensor(load_tensor(tmp_path / "a.npy"), tmp_path / "b.npy")
    assert (tmp_path / "a.npy").read_bytes() == (tmp_path / "b.npy").read_bytes()


def test_shape_recorded_channel_major(tmp_path):
    fm = FeatureMap(_random_tensor((2, 3, 4), 5))
    save_tensor(fm, tmp_path / "chw.npy")
    assert np.load(tmp_path / "chw.npy").shape == (2, 3, 4)


def test_numpy_reads_our_files(tmp_path):
    fm = FeatureMap(_random_tensor((4, 6, 5), 17))
    save_tensor(fm, tmp_path / "ours.npy")
    assert np.array_equal(np.load(tmp_path / "ours.npy"), fm.data)


def test_we_read_numpy_files(tmp_path):
    arr = _random_tensor((4, 6, 5), 23)
    np.save(tmp_path / "theirs.npy", arr)
    assert np.array_equal(load_tensor(tmp_path / "theirs.npy").data, arr)


def test_float64_header_rejected(tmp_path):
    np.save(tmp_path / "f8.npy", np.zeros((2, 2, 2), dtype=np.float64))
    with pytest.raises(FormatError):
        load_tensor(tmp_path / "f8.npy")


def test_fortran_order_rejected(tmp_path):
    np.save(tmp_path / "f.npy", np.asfortranarray(_random_tensor((2, 3, 4), 2)))
    with pytest.raises(FormatError):
        load_tensor(tmp_path / "f.npy")


@pytest.mark.parametrize("dtype", [np.float64, np.float16, np.int32, np.uint8, ">f4"])
def test_dtype_fuzz_corpus_rejected(tmp_path, dtype):
    path = tmp_path / "fuzz.npy"
    np.save(path, np.zeros((2, 2, 2)).astype(dtype))
    with pytest.raises(FormatError):
        load_tensor(path)


@pytest.mark.parametrize("shape", [(4,), (4, 4), (2, 2, 2, 2)])
def test_wrong_rank_rejected(tmp_path, shape):
    np.save(tmp_path / "r.npy", np.zeros(shape, dtype=np.float32))
    with pytest.raises(FormatError):
        load_tensor(tmp_path / "r.npy")


def test_wrong_magic_rejected(tmp_path):
    (tmp_path / "bad.npy").write_bytes(b"\x93NUMPZ" + b"\x01\x00" + b"\x00" * 32)
    with pytest.raises(FormatError):
        load_tensor(tmp_path / "bad.npy")


def test_unsupported_version_rejected(tmp_path):
    path = tmp_path / "v2.npy"
    with open(path, "wb") as fh:
        np.lib.format.write_array(fh, np.zeros((1, 1, 1), dtype=np.float32), version=(2, 0))
    with pytest.raises(FormatError):
        load_tensor(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "t.npy"
    save_tensor(FeatureMap(_random_tensor((2, 3, 4), 9)), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-5])
    with pytest.raises(FormatError):
        load_tensor(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "t.npy"
    save_tensor(FeatureMap(_random_tensor((2, 3, 4), 9)), path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(FormatError):
        load_tensor(path)


def test_nan_payload_rejected(tmp_path):
    path = tmp_path / "nan.npy"
    arr = np.zeros((1, 1, 2), dtype=np.float32)
    arr[0, 0, 0] = np.nan
    np.save(path, arr)
    with pytest.raises(FormatError):
        load_tensor(path)


def test_header_format_matches_numpy_writer(tmp_path):
    # identical bytes for the same array means interop is more than value-level
    fm = FeatureMap(_random_tensor((3, 4, 5), 31))
    save_tensor(fm, tmp_path / "ours.npy")
    np.save(tmp_path / "theirs.npy", fm.data)
    assert (tmp_path / "ours.npy").read_bytes() == (tmp_path / "theirs.npy").read_bytes()


def test_snapshot_helper_rank_validation(tmp_path):
    with pytest.raises(ValueError):
        write_npy_f32(np.zeros((2, 2), dtype=np.float32), tmp_path / "x.npy")
    arr = np.zeros((0, 2, 0), dtype=np.float32)
    write_npy_f32(arr, tmp_path / "empty.npy")
    assert read_npy_f32(tmp_path / "empty.npy").shape == (0, 2, 0)


@settings(max_examples=25, deadline=None)
@given(
    c=st.integers(1, 5),
    h=st.integers(1, 8),
    w=st.integers(1, 8),
    seed=st.integers(0, 2**32 - 1),
)
def test_tensor_round_trip_property(tmp_path_factory, c, h, w, seed):
    tmp = tmp_path_factory.mktemp("npy_prop")
    fm = FeatureMap(_random_tensor((c, h, w), seed))
    save_tensor(fm, tmp / "x.npy")
    back = load_tensor(tmp / "x.npy")
    assert np.array_equal(back.data.view(np.uint32), fm.data.view(np.uint32))


# --------------------------------------------------------------------------
# annotations


def _ann_payload():
    return {
        "images": [
            {"id": 1, "file_name": "a.png", "width": 64, "height": 48},
            {"id": 2, "file_name": "b.png", "width": 32, "height": 32},
        ],
        "annotations": [
            {"image_id": 1, "bbox": [4, 4, 10, 12]},
            {"image_id": 1, "bbox": [20, 8, 6, 6]},
        ],
    }


def test_parse_two_boxes_in_order(tmp_path):
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(_ann_payload()))
    sets = parse_annotations(path)
    assert len(sets[1].boxes) == 2
    assert sets[1].boxes[0] == BoundingBox(4, 4, 10, 12)
    assert sets[1].boxes[1] == BoundingBox(20, 8, 6, 6)


def test_image_without_annotations_is_empty_set(tmp_path):
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(_ann_payload()))
    assert parse_annotations(path)[2].boxes == ()


def test_zero_size_bbox_rejected(tmp_path):
    payload = _ann_payload()
    payload["annotations"].append({"image_id": 2, "bbox": [10, 10, 0, 5]})
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(FormatError):
        parse_annotations(path)


@pytest.mark.parametrize("drop", ["id", "file_name", "width", "height"])
def test_missing_image_fields_rejected(tmp_path, drop):
    payload = _ann_payload()
    del payload["images"][0][drop]
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(FormatError):
        parse_annotations(path)


def test_unknown_image_id_rejected(tmp_path):
    payload = _ann_payload()
    payload["annotations"].append({"image_id": 99, "bbox": [1, 1, 2, 2]})
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(FormatError):
        parse_annotations(path)


def test_non_intersecting_box_rejected(tmp_path):
    payload = _ann_payload()
    payload["annotations"].append({"image_id": 2, "bbox": [40, 0, 5, 5]})
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(FormatError):
        parse_annotations(path)


def test_image_index_order(tmp_path):
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(_ann_payload()))
    infos = parse_image_index(path)
    assert [i.id for i in infos] == [1, 2]
    assert infos[0].file_name == "a.png"


def test_reserialize_preserves_box_order(tmp_path):
    g = np.random.Generator(np.random.Philox(key=np.array([5, 5], dtype=np.uint64)))
    infos = [ImageInfo(id=k, file_name=f"{k}.png", width=100, height=80) for k in range(4)]
    sets = {}
    for info in infos:
        boxes = []
        for _ in range(int(g.integers(0, 6))):
            x = float(g.integers(0, 90))
            y = float(g.integers(0, 70))
            boxes.append(BoundingBox(x, y, float(g.integers(1, 10)), float(g.integers(1, 10))))
        sets[info.id] = AnnotationSet(info.id, tuple(boxes))
    first = tmp_path / "first.json"
    write_annotations(infos, sets, first)
    parsed = parse_annotations(first)
    second = tmp_path / "second.json"
    write_annotations(parse_image_index(first), parsed, second)
    reparsed = parse_annotations(second)
    assert reparsed == parsed
    for info in infos:
        assert reparsed[info.id].boxes == sets[info.id].boxes
