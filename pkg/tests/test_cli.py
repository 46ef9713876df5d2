import json
from pathlib import Path

import pytest

from benthic_count.cli import main, parse_config_file

# camera pans 0..87, window reaches 207: every spot of the 210px world is
# covered, so all 4 objects become visible
COUNT_SCENE = {
    "seed": 9,
    "n_objects": 4,
    "object_size_range": [14, 18],
    "world_size": [210, 120],
    "camera_size": [120, 120],
    "camera_velocity": [3.0, 0.0],
    "n_frames": 30,
    "min_separation": 28.0,
    "noise": {},
}


@pytest.fixture()
def scene_dir(tmp_path):
    spec_path = tmp_path / "scene.json"
    spec_path.write_text(json.dumps(COUNT_SCENE))
    out = tmp_path / "scene"
    assert main(["synth", "--spec", str(spec_path), "--out", str(out)]) == 0
    return out


def grayscale_config(tmp_path) -> Path:
    cfg = tmp_path / "kcf.cfg"
    cfg.write_text("feature_mode = grayscale\ncell_size = 1\n")
    return cfg


class TestSynthCommand:
    def test_writes_expected_layout(self, scene_dir):
        assert (scene_dir / "frames").is_dir()
        assert (scene_dir / "truth.json").is_file()
        assert (scene_dir / "detections.json").is_file()
        assert len(list((scene_dir / "frames").glob("*.png"))) == 30

    def test_byte_identical_rerun(self, tmp_path, scene_dir):
        spec_path = tmp_path / "scene.json"
        out2 = tmp_path / "scene2"
        assert main(["synth", "--spec", str(spec_path), "--out", str(out2)]) == 0
        for name in ("truth.json", "detections.json"):
            assert (scene_dir / name).read_bytes() == (out2 / name).read_bytes()
        for png in sorted((scene_dir / "frames").glob("*.png")):
            assert png.read_bytes() == (out2 / "frames" / png.name).read_bytes()

    def test_impossible_packing_exits_2(self, tmp_path):
        doc = dict(COUNT_SCENE, n_objects=80, object_size_range=[40, 50],
                   world_size=[120, 120], camera_velocity=[0.0, 0.0])
        spec_path = tmp_path / "bad.json"
        spec_path.write_text(json.dumps(doc))
        assert main(["synth", "--spec", str(spec_path),
                     "--out", str(tmp_path / "x")]) == 2

    def test_missing_spec_exits_2(self, tmp_path):
        assert main(["synth", "--spec", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "x")]) == 2


class TestCountCommand:
    def test_counts_scene_and_prints_total(self, tmp_path, scene_dir, capsys):
        out = tmp_path / "report.json"
        code = main([
            "count", "--frames", str(scene_dir / "frames"),
            "--detections", str(scene_dir / "detections.json"),
            "--config", str(grayscale_config(tmp_path)),
            "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["schema_version"] == 1
        assert report["total_count"] == 4
        assert report["config"]["iou_threshold"] == 0.2
        assert report["config"]["max_misses"] == 10
        final_line = capsys.readouterr().out.strip().splitlines()[-1]
        assert final_line == "4"

    def test_missing_detections_exits_2(self, tmp_path, scene_dir):
        assert main([
            "count", "--frames", str(scene_dir / "frames"),
            "--detections", str(tmp_path / "missing.json"),
            "--out", str(tmp_path / "r.json"),
        ]) == 2

    def test_flag_overrides_echoed(self, tmp_path, scene_dir):
        out = tmp_path / "report.json"
        main([
            "count", "--frames", str(scene_dir / "frames"),
            "--detections", str(scene_dir / "detections.json"),
            "--config", str(grayscale_config(tmp_path)),
            "--iou-thresh", "0.3", "--max-misses", "5",
            "--out", str(out),
        ])
        report = json.loads(out.read_text())
        assert report["config"]["iou_threshold"] == 0.3
        assert report["config"]["max_misses"] == 5

    def test_plots_written(self, tmp_path, scene_dir):
        plots = tmp_path / "plots"
        main([
            "count", "--frames", str(scene_dir / "frames"),
            "--detections", str(scene_dir / "detections.json"),
            "--config", str(grayscale_config(tmp_path)),
            "--out", str(tmp_path / "r.json"), "--plots", str(plots),
        ])
        assert (plots / "active_tracks.png").is_file()
        assert (plots / "tracks.csv").is_file()
        assert (plots / "per_frame_active.csv").is_file()


class TestEvalApCommand:
    def write_pair(self, tmp_path, pred_boxes, gt_boxes):
        pred = {"video": "v", "frames": [{"index": 0, "detections": [
            {"bbox": b, "score": 1.0} for b in pred_boxes]}]}
        gt = {"video": "v", "frames": [{"index": 0, "objects": [
            {"bbox": b, "label": "live_oyster"} for b in gt_boxes]}]}
        pp = tmp_path / "pred.json"
        gp = tmp_path / "gt.json"
        pp.write_text(json.dumps(pred))
        gp.write_text(json.dumps(gt))
        return pp, gp

    def test_perfect_predictions(self, tmp_path):
        pp, gp = self.write_pair(tmp_path, [[0, 0, 10, 10]], [[0, 0, 10, 10]])
        out = tmp_path / "ap.json"
        assert main(["eval-ap", "--pred", str(pp), "--gt", str(gp),
                     "--geometry", "box", "--out", str(out)]) == 0
        result = json.loads(out.read_text())
        assert result["ap"] == 1.0 and result["ap50"] == 1.0

    def test_empty_predictions(self, tmp_path):
        pp, gp = self.write_pair(tmp_path, [], [[0, 0, 10, 10]])
        out = tmp_path / "ap.json"
        main(["eval-ap", "--pred", str(pp), "--gt", str(gp),
              "--geometry", "box", "--out", str(out)])
        assert json.loads(out.read_text())["ap"] == 0.0

    def test_iou_point_six_pair(self, tmp_path):
        pp, gp = self.write_pair(tmp_path, [[0, 0, 10, 3]], [[0, 0, 10, 5]])
        out = tmp_path / "ap.json"
        plots = tmp_path / "apfig"
        main(["eval-ap", "--pred", str(pp), "--gt", str(gp),
              "--geometry", "box", "--out", str(out), "--plots", str(plots)])
        result = json.loads(out.read_text())
        assert result["ap50"] == 1.0
        assert result["ap75"] == 0.0
        assert result["per_threshold"]["0.55"] == 1.0
        assert result["per_threshold"]["0.60"] == 0.0
        assert (plots / "pr_curves.png").is_file()


class TestEvalCountCommand:
    def test_single_pair(self, tmp_path, capsys):
        report = tmp_path / "r.json"
        report.write_text(json.dumps({"total_count": 27}))
        assert main(["eval-count", "--report", str(report), "--manual", "21"]) == 0
        out = capsys.readouterr().out.strip()
        assert out.startswith("0.777778")

    def test_equal_counts(self, tmp_path, capsys):
        report = tmp_path / "r.json"
        report.write_text(json.dumps({"total_count": 12}))
        main(["eval-count", "--report", str(report), "--manual", "12"])
        assert capsys.readouterr().out.strip() == "1.0"

    def test_batch_file(self, tmp_path, capsys):
        pairs = tmp_path / "pairs.json"
        pairs.write_text(json.dumps([[27, 21], [25, 20], [118, 94], [215, 176]]))
        out = tmp_path / "acc.json"
        assert main(["eval-count", "--manual-file", str(pairs),
                     "--out", str(out)]) == 0
        printed = float(capsys.readouterr().out.strip())
        assert abs(printed - 0.798) < 0.0005
        assert abs(json.loads(out.read_text())["accuracy"] - 0.798) < 0.0005

    def test_missing_args_exit_2(self, tmp_path):
        assert main(["eval-count", "--manual", "5"]) == 2


class TestConfigFile:
    def test_parses_flat_keys(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(
            "# tracker settings\n"
            "iou_threshold = 0.25\n"
            "max_misses = 7\n"
            'feature_mode = "grayscale"\n'
            "lambda = 1e-3\n"
        )
        values = parse_config_file(cfg)
        assert values == {"iou_threshold": 0.25, "max_misses": 7,
                          "feature_mode": "grayscale", "lambda": 1e-3}

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("bogus = 1\n")
        from benthic_count.cli import InputError
        with pytest.raises(InputError):
            parse_config_file(cfg)
