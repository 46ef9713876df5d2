import json

import numpy as np
import pytest
from PIL import Image

from benthic_count.geometry import BBox
from benthic_count.ingest import (
    DetectionFile,
    DetectionFrame,
    ParseError,
    canonical_json,
    load_frames,
    parse_detections,
    parse_ground_truth,
    serialize_detections,
    write_report,
)
from benthic_count.tracking import CountReport, Detection, TrackSummary

MINIMAL = {"schema_version": 1, "video": "v", "frames": [{"index": 0, "detections": []}]}


class TestParseDetections:
    def test_minimal_file(self):
        df = parse_detections(json.dumps(MINIMAL))
        assert df.video == "v"
        assert len(df.frames) == 1 and df.frames[0].detections == []

    def test_round_trip_is_fixed_point(self):
        doc = {
            "schema_version": 1, "video": "clip", "fps": 59.0,
            "frames": [
                {"index": 0, "detections": [
                    {"bbox": [1.5, 2.0, 10.0, 8.0], "score": 0.75},
                    {"bbox": [20.0, 5.0, 6.0, 6.0], "score": 1.0,
                     "polygon": [[20.0, 5.0], [26.0, 5.0], [23.0, 11.0]]},
                ]},
                {"index": 3, "detections": []},
            ],
        }
        first = parse_detections(json.dumps(doc))
        second = parse_detections(serialize_detections(first))
        assert first == second
        assert serialize_detections(first) == serialize_detections(second)

    def test_score_out_of_range_names_location(self):
        doc = {
            "video": "v",
            "frames": [
                {"index": 0, "detections": []},
                {"index": 3, "detections": [{"bbox": [0, 0, 5, 5], "score": 1.5}]},
            ],
        }
        with pytest.raises(ParseError, match="frame 3 detection 0: score out of range"):
            parse_detections(json.dumps(doc))

    def test_decreasing_frame_indices(self):
        doc = {"video": "v", "frames": [{"index": 2, "detections": []},
                                        {"index": 1, "detections": []}]}
        with pytest.raises(ParseError, match="strictly increasing"):
            parse_detections(json.dumps(doc))

    def test_nonpositive_box(self):
        doc = {"video": "v",
               "frames": [{"index": 0,
                           "detections": [{"bbox": [0, 0, 0, 5], "score": 0.5}]}]}
        with pytest.raises(ParseError, match="frame 0 detection 0"):
            parse_detections(json.dumps(doc))

    def test_malformed_json(self):
        with pytest.raises(ParseError, match="not valid JSON"):
            parse_detections(b"{nope")

    def test_unknown_fields_ignored_and_optionals_defaulted(self):
        doc = dict(MINIMAL)
        doc["future_field"] = {"x": 1}
        df = parse_detections(json.dumps(doc))
        assert df.fps is None and df.image_size is None

    def test_wrong_schema_version(self):
        doc = dict(MINIMAL, schema_version=2)
        with pytest.raises(ParseError, match="schema_version"):
            parse_detections(json.dumps(doc))

    def test_missing_score_defaults_to_one(self):
        doc = {"video": "v",
               "frames": [{"index": 0, "detections": [{"bbox": [0, 0, 5, 5]}]}]}
        df = parse_detections(json.dumps(doc))
        assert df.frames[0].detections[0].score == 1.0


class TestParseGroundTruth:
    def test_labels_required(self):
        doc = {"video": "v",
               "frames": [{"index": 0, "objects": [{"bbox": [0, 0, 5, 5]}]}]}
        with pytest.raises(ParseError, match="frame 0 object 0: label"):
            parse_ground_truth(json.dumps(doc))

    def test_valid_ground_truth(self):
        doc = {"video": "v",
               "frames": [{"index": 0, "objects": [
                   {"bbox": [0, 0, 5, 5], "label": "live_oyster"}]}]}
        gt = parse_ground_truth(json.dumps(doc))
        assert gt.frames[0].objects[0].label == "live_oyster"


class TestWriteReport:
    def test_empty_report_exact_bytes(self):
        report = CountReport(total_count=0, tracks=[], per_frame_active=[])
        expected = b'{"total_count":0,"tracks":[],"per_frame_active":[]}\n'
        assert write_report(report) == expected

    def test_byte_determinism(self):
        report = CountReport(
            total_count=2,
            tracks=[TrackSummary(1, 0, 9, 10), TrackSummary(2, 3, 7, 5)],
            per_frame_active=[1, 1, 2, 2],
        )
        assert write_report(report) == write_report(report)

    def test_hits_field_mapping(self):
        report = CountReport(total_count=1,
                             tracks=[TrackSummary(1, 0, 9, 10)],
                             per_frame_active=[1] * 10)
        assert b'"hits":10' in write_report(report)
        assert b'"birth_frame":0' in write_report(report)

    def test_float_rounding_six_significant_digits(self):
        out = canonical_json({"v": 0.12345678901, "w": 1.0, "n": 3})
        assert out == b'{"v":0.123457,"w":1.0,"n":3}\n'


class TestLoadFrames:
    def make_png(self, path, w=32, h=24, value=100):
        Image.fromarray(np.full((h, w), value, dtype=np.uint8), "L").save(path)

    def test_sorted_by_filename(self, tmp_path):
        for name in ("002.png", "000.png", "001.png"):
            self.make_png(tmp_path / name)
        src = load_frames(tmp_path)
        assert [p.name for p in src.paths] == ["000.png", "001.png", "002.png"]
        assert len(src) == 3
        assert src[0].shape == (24, 32)

    def test_empty_directory(self, tmp_path):
        with pytest.raises(ParseError, match="no frames"):
            load_frames(tmp_path)

    def test_mixed_dimensions(self, tmp_path):
        self.make_png(tmp_path / "a.png", w=640, h=480)
        self.make_png(tmp_path / "b.png", w=640, h=481)
        with pytest.raises(ParseError, match="b.png"):
            load_frames(tmp_path)

    def test_undecodable_file_named(self, tmp_path):
        (tmp_path / "bad.png").write_bytes(b"not a png")
        with pytest.raises(ParseError, match="bad.png"):
            load_frames(tmp_path)


def test_serialize_includes_schema_version():
    df = DetectionFile(video="v", frames=[DetectionFrame(0, [
        Detection(BBox(1, 2, 3, 4), 0.5)])])
    data = json.loads(serialize_detections(df))
    assert data["schema_version"] == 1
    assert data["frames"][0]["detections"][0]["bbox"] == [1, 2, 3, 4]
