"""Bridge tests, including the cross-component contract with the primary
package: every emitted file must parse with benthic_count.ingest, and
polygons traced from bitmasks must rasterize back to (nearly) the same mask.
"""

import json

import numpy as np
import pytest

from benthic_count.geometry import BitMask, PolygonMask, iou_mask, rasterize
from benthic_count.ingest import parse_detections, parse_ground_truth

from detector_bridge.cli import main
from detector_bridge.convert import (
    ConversionError,
    LabelmeDocument,
    convert_labelme,
    export_detections,
    load_dump,
)
from detector_bridge.masks import decode_mask, largest_component, mask_to_polygon


def labelme_doc(shapes, w=640, h=480, path="img0.png"):
    return LabelmeDocument.from_dict({
        "imagePath": path, "imageWidth": w, "imageHeight": h,
        "shapes": [{"label": lab, "points": pts, "shape_type": "polygon"}
                   for lab, pts in shapes],
    })


def random_blob(rng, size=48) -> np.ndarray:
    """Random solid ellipse-ish component with >= 100 pixels."""
    while True:
        cy, cx = rng.uniform(size * 0.3, size * 0.7, 2)
        ry = rng.uniform(6, size * 0.28)
        rx = rng.uniform(6, size * 0.28)
        yy, xx = np.mgrid[0:size, 0:size]
        bits = (((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2) <= 1.0
        # roughen the boundary a little so it is not a perfect ellipse
        noise = rng.uniform(size=bits.shape) < 0.03
        bits = bits & ~noise
        bits = largest_component(bits) if bits.any() else bits
        if bits.sum() >= 100:
            return bits


class TestMaskTracing:
    def test_square_round_trips_exactly(self):
        bits = np.zeros((16, 16), dtype=bool)
        bits[3:13, 2:12] = True
        poly = mask_to_polygon(bits)
        back = rasterize(PolygonMask(tuple(poly)), 16, 16)
        assert np.array_equal(back.bits, bits)

    def test_largest_component_selected(self):
        bits = np.zeros((20, 20), dtype=bool)
        bits[1:4, 1:4] = True      # 9 px
        bits[8:16, 8:16] = True    # 64 px
        poly = mask_to_polygon(bits)
        back = rasterize(PolygonMask(tuple(poly)), 20, 20)
        expected = np.zeros_like(bits)
        expected[8:16, 8:16] = True
        assert np.array_equal(back.bits, expected)

    def test_l_shape_round_trips(self):
        bits = np.zeros((12, 12), dtype=bool)
        bits[2:10, 2:5] = True
        bits[7:10, 2:10] = True
        back = rasterize(PolygonMask(tuple(mask_to_polygon(bits))), 12, 12)
        assert np.array_equal(back.bits, bits)

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            mask_to_polygon(np.zeros((4, 4), dtype=bool))

    def test_diagonal_pinch_round_trips(self):
        # two pixels of one component meeting only at a corner: the trace
        # must keep hugging the region instead of jumping across
        bits = np.array([[1, 1, 0], [1, 0, 1], [1, 1, 1]], dtype=bool)
        back = rasterize(PolygonMask(tuple(mask_to_polygon(bits))), 3, 3)
        assert np.array_equal(back.bits, bits)

    def test_staircase_round_trips(self):
        bits = np.zeros((10, 10), dtype=bool)
        for k in range(8):
            bits[k, k] = True
            bits[k + 1, k] = True
        back = rasterize(PolygonMask(tuple(mask_to_polygon(bits))), 10, 10)
        assert np.array_equal(back.bits, bits)

    def test_decode_rle_counts(self):
        # 4x3 mask: two zeros, three ones, rest zeros (row-major)
        doc = {"width": 4, "height": 3, "counts": [2, 3, 7]}
        bits = decode_mask(doc)
        expected = np.zeros(12, dtype=bool)
        expected[2:5] = True
        assert np.array_equal(bits, expected.reshape(3, 4))

    def test_decode_rejects_bad_total(self):
        with pytest.raises(ValueError):
            decode_mask({"width": 4, "height": 3, "counts": [2, 3]})


class TestPolygonizationFidelity:
    def test_mask_iou_at_least_095_on_20_synthetic_masks(self):
        rng = np.random.default_rng(77)
        worst = 1.0
        for _ in range(20):
            bits = random_blob(rng)
            h, w = bits.shape
            poly = mask_to_polygon(bits)
            back = rasterize(PolygonMask(tuple(poly)), w, h)
            iou = iou_mask(BitMask(w, h, bits), back)
            worst = min(worst, iou)
            assert iou >= 0.95
        print(f"[PASS] polygonization fidelity (worst mask IoU {worst:.4f})")


class TestConvertLabelme:
    def test_filters_by_label(self):
        tri = [[0.0, 0.0], [10.0, 0.0], [5.0, 8.0]]
        doc = labelme_doc([("live_oyster", tri), ("live_oyster", tri),
                           ("live_oyster", tri), ("rock", tri)])
        gt = parse_ground_truth(convert_labelme([doc]))
        assert len(gt.frames[0].objects) == 3
        assert all(o.label == "live_oyster" for o in gt.frames[0].objects)

    def test_empty_shapes(self):
        gt = parse_ground_truth(convert_labelme([labelme_doc([])]))
        assert gt.frames[0].objects == []

    def test_coordinates_preserved_exactly(self):
        pts = [[12.5, 40.25], [43.75, 40.0], [28.0, 67.5]]
        doc = labelme_doc([("live_oyster", pts)])
        raw = json.loads(convert_labelme([doc]))
        assert raw["frames"][0]["objects"][0]["polygon"] == pts

    def test_inconsistent_dimensions_rejected(self):
        a = labelme_doc([], w=640, h=480)
        b = labelme_doc([], w=640, h=481)
        with pytest.raises(ConversionError):
            convert_labelme([a, b])

    def test_one_frame_per_document_in_order(self):
        docs = [labelme_doc([], path=f"img{i}.png") for i in range(3)]
        gt = parse_ground_truth(convert_labelme(docs))
        assert [f.index for f in gt.frames] == [0, 1, 2]


class TestExportDetections:
    def test_empty_dump(self):
        out = export_detections({"images": []})
        df = parse_detections(out)
        assert df.frames == []

    def test_box_field_mapping(self):
        dump = {"images": [{"image": "f0.png", "detections": [
            {"bbox": [10, 20, 30, 40], "score": 0.9}]}]}
        df = parse_detections(export_detections(dump))
        det = df.frames[0].detections[0]
        assert det.bbox.as_list() == [10, 20, 30, 40]
        assert det.score == 0.9

    def test_mask_becomes_polygon_and_parses(self):
        bits = np.zeros((24, 24), dtype=bool)
        bits[4:18, 6:20] = True
        dump = {"images": [{"image": "f0.png", "detections": [
            {"score": 0.8, "mask": {"bits": bits.astype(int).tolist()}}]}]}
        df = parse_detections(export_detections(dump))
        det = df.frames[0].detections[0]
        assert det.mask is not None
        assert det.bbox.as_list() == [6.0, 4.0, 14.0, 14.0]
        back = rasterize(det.mask, 24, 24)
        assert iou_mask(BitMask(24, 24, bits), back) >= 0.95

    def test_frame_ordering_resolution(self):
        dump = {"images": [
            {"image": "b.png", "detections": []},
            {"image": "a.png", "detections": []},
        ]}
        df = parse_detections(export_detections(dump, ["a.png", "b.png"]))
        assert [f.index for f in df.frames] == [0, 1]

    def test_unresolvable_frame_errors(self):
        dump = {"images": [{"image": "mystery.png", "detections": []}]}
        with pytest.raises(ConversionError, match="mystery"):
            export_detections(dump, ["a.png"])

    def test_score_out_of_range_rejected(self):
        dump = {"images": [{"image": "f.png", "detections": [
            {"bbox": [0, 0, 5, 5], "score": 1.5}]}]}
        with pytest.raises(ConversionError):
            export_detections(dump)


class TestCli:
    def test_labelme_command(self, tmp_path):
        ann = tmp_path / "ann"
        ann.mkdir()
        tri = [[0.0, 0.0], [10.0, 0.0], [5.0, 8.0]]
        for i in range(2):
            (ann / f"img{i}.json").write_text(json.dumps({
                "imagePath": f"img{i}.png", "imageWidth": 64, "imageHeight": 48,
                "shapes": [{"label": "live_oyster", "points": tri}],
            }))
        out = tmp_path / "gt.json"
        assert main(["labelme", "--in", str(ann), "--out", str(out)]) == 0
        gt = parse_ground_truth(out.read_bytes())
        assert len(gt.frames) == 2

    def test_export_command_with_directory_dump(self, tmp_path):
        dump_dir = tmp_path / "dump"
        dump_dir.mkdir()
        (dump_dir / "00000.json").write_text(json.dumps(
            [{"bbox": [1, 2, 3, 4], "score": 0.5}]))
        (dump_dir / "00001.json").write_text(json.dumps(
            {"detections": [{"bbox": [5, 6, 7, 8], "score": 0.25}]}))
        out = tmp_path / "det.json"
        assert main(["export", "--dump", str(dump_dir), "--out", str(out)]) == 0
        df = parse_detections(out.read_bytes())
        assert [f.index for f in df.frames] == [0, 1]
        assert df.frames[1].detections[0].bbox.as_list() == [5, 6, 7, 8]

    def test_missing_dump_exits_2(self, tmp_path):
        assert main(["export", "--dump", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "o.json")]) == 2


def test_load_dump_single_file(tmp_path):
    f = tmp_path / "dump.json"
    f.write_text(json.dumps({"images": [{"image": "x.png", "detections": []}]}))
    dump = load_dump(f)
    assert dump["images"][0]["image"] == "x.png"
