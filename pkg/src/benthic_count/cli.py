"""Command-line entry point.

Subcommands: count, eval-ap, eval-count, synth. Exit codes are stable:
0 success, 1 internal error, 2 input validation failure. Reports echo the
effective configuration under "config" so runs are reproducible from the
output alone. BENTHIC_COUNT_THREADS caps per-track parallelism (0 = auto).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation, ingest, synth
from .kcf import KcfParams
from .tracking import MultiObjectTracker, TrackerConfig

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2

# config-file keys -> (section, field, type)
CONFIG_KEYS = {
    "iou_threshold": ("tracker", "iou_threshold", float),
    "max_misses": ("tracker", "max_misses", int),
    "score_threshold": ("tracker", "score_threshold", float),
    "min_hits_to_count": ("tracker", "min_hits_to_count", int),
    "lambda": ("kcf", "lambda_value", float),
    "kernel_sigma": ("kcf", "kernel_sigma", float),
    "output_sigma_factor": ("kcf", "output_sigma_factor", float),
    "padding": ("kcf", "padding", float),
    "learning_rate": ("kcf", "learning_rate", float),
    "cell_size": ("kcf", "cell_size", int),
    "feature_mode": ("kcf", "feature_mode", str),
}


class InputError(ValueError):
    """User input problem -> exit 2."""


def parse_config_file(path: str | Path) -> dict:
    """Flat key=value lines; '#' starts a comment; unknown keys rejected."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip().strip('"')
        if key not in CONFIG_KEYS:
            raise InputError(f"{path}:{lineno}: unknown config key {key!r}")
        _, _, typ = CONFIG_KEYS[key]
        try:
            values[key] = typ(val)
        except ValueError:
            raise InputError(f"{path}:{lineno}: bad value for {key}: {val!r}") from None
    return values


def _build_config(args) -> TrackerConfig:
    tracker_kw: dict = {}
    kcf_kw: dict = {}
    if args.config:
        for key, value in parse_config_file(args.config).items():
            section, field, _ = CONFIG_KEYS[key]
            (tracker_kw if section == "tracker" else kcf_kw)[field] = value
    # flags override the file
    if args.iou_thresh is not None:
        tracker_kw["iou_threshold"] = args.iou_thresh
    if args.max_misses is not None:
        tracker_kw["max_misses"] = args.max_misses
    if args.score_thresh is not None:
        tracker_kw["score_threshold"] = args.score_thresh
    if args.min_hits is not None:
        tracker_kw["min_hits_to_count"] = args.min_hits
    if kcf_kw.get("feature_mode") == "grayscale" and "cell_size" not in kcf_kw:
        kcf_kw["cell_size"] = 1
    try:
        return TrackerConfig(kcf=KcfParams(**kcf_kw), **tracker_kw)
    except (TypeError, ValueError) as e:
        raise InputError(f"bad configuration: {e}") from None


def _config_echo(config: TrackerConfig, extra: dict) -> dict:
    echo = {
        "iou_threshold": config.iou_threshold,
        "max_misses": config.max_misses,
        "score_threshold": config.score_threshold,
        "min_hits_to_count": config.min_hits_to_count,
        "lambda": config.kcf.lambda_value,
        "kernel_sigma": config.kcf.kernel_sigma,
        "output_sigma_factor": config.kcf.output_sigma_factor,
        "padding": config.kcf.padding,
        "learning_rate": config.kcf.learning_rate,
        "cell_size": config.kcf.cell_size,
        "feature_mode": config.kcf.feature_mode,
    }
    echo.update(extra)
    return echo


def cmd_count(args) -> int:
    config = _build_config(args)
    detections_path = Path(args.detections)
    if not detections_path.is_file():
        raise InputError(f"detections file not found: {detections_path}")
    det_file = ingest.parse_detections(detections_path.read_bytes())
    frames = ingest.load_frames(args.frames)

    by_index = det_file.by_index()
    bad = [i for i in by_index if i >= len(frames)]
    if bad:
        raise InputError(
            f"detections reference frames {sorted(bad)} beyond the "
            f"{len(frames)}-frame sequence"
        )

    tracker = MultiObjectTracker(config)
    for i in range(len(frames)):
        tracker.step(i, frames[i], by_index.get(i, []))
    report = tracker.finalize()

    payload = {"schema_version": ingest.SCHEMA_VERSION}
    payload.update(ingest.report_payload(report))
    payload["config"] = _config_echo(config, {
        "frames": str(args.frames),
        "detections": str(args.detections),
    })
    Path(args.out).write_bytes(ingest.canonical_json(payload))

    if args.plots:
        from .figures import save_count_outputs
        save_count_outputs(report, args.plots)

    print(report.total_count)
    return EXIT_OK


def cmd_eval_ap(args) -> int:
    pred_path, gt_path = Path(args.pred), Path(args.gt)
    for p in (pred_path, gt_path):
        if not p.is_file():
            raise InputError(f"file not found: {p}")
    preds = ingest.parse_detections(pred_path.read_bytes())
    gts = ingest.parse_ground_truth(gt_path.read_bytes())
    try:
        result = evaluation.evaluate(preds, gts, args.geometry,
                                     strict=(args.iou_rule == "gt"))
    except ValueError as e:
        raise InputError(str(e)) from None

    payload = {"schema_version": ingest.SCHEMA_VERSION}
    payload.update(evaluation.ap_payload(result))
    payload["config"] = {
        "geometry": args.geometry,
        "iou_rule": args.iou_rule,
        "pred": str(args.pred),
        "gt": str(args.gt),
    }
    Path(args.out).write_bytes(ingest.canonical_json(payload))

    if args.plots:
        from .figures import save_ap_outputs
        save_ap_outputs(result, args.plots)

    print(f"{result.ap:.6g}")
    return EXIT_OK


def cmd_eval_count(args) -> int:
    if args.manual_file:
        try:
            pairs = json.loads(Path(args.manual_file).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read manual counts: {e}") from None
        if (not isinstance(pairs, list)
                or not all(isinstance(p, list) and len(p) == 2 for p in pairs)):
            raise InputError("manual file must be a JSON list of [counted, manual] pairs")
        counted = [p[0] for p in pairs]
        manual = [p[1] for p in pairs]
    else:
        if args.report is None or args.manual is None:
            raise InputError("need --report and --manual, or --manual-file")
        try:
            report = json.loads(Path(args.report).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read report: {e}") from None
        if "total_count" not in report:
            raise InputError("report has no total_count")
        counted = [report["total_count"]]
        manual = [args.manual]
    try:
        accuracy = evaluation.counting_accuracy(counted, manual)
    except ValueError as e:
        raise InputError(str(e)) from None

    if args.out:
        payload = {
            "schema_version": ingest.SCHEMA_VERSION,
            "accuracy": accuracy,
            "pairs": [[c, m] for c, m in zip(counted, manual)],
        }
        Path(args.out).write_bytes(ingest.canonical_json(payload))
    print(repr(float(f"{accuracy:.6g}")))
    return EXIT_OK


def cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    if not spec_path.is_file():
        raise InputError(f"scene spec not found: {spec_path}")
    try:
        doc = json.loads(spec_path.read_text())
        spec = synth.spec_from_dict(doc)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise InputError(f"bad scene spec: {e}") from None
    try:
        scene = synth.generate(spec)
    except synth.PlacementError as e:
        raise InputError(str(e)) from None
    synth.write_scene(scene, args.out)
    print(scene.true_count)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="benthic-count",
        description="Count static objects in moving-camera video from "
                    "per-frame detections, and evaluate the results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="track detections across frames and count")
    p.add_argument("--frames", required=True, help="directory of frame images")
    p.add_argument("--detections", required=True, help="detections JSON file")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--iou-thresh", type=float, default=None,
                   help="association IoU threshold (default 0.2)")
    p.add_argument("--max-misses", type=int, default=None,
                   help="consecutive misses before removal (default 10)")
    p.add_argument("--score-thresh", type=float, default=None,
                   help="detector confidence cutoff (default 0.5)")
    p.add_argument("--min-hits", type=int, default=None,
                   help="matched frames needed to count a track (default 1)")
    p.add_argument("--out", required=True, help="report JSON output path")
    p.add_argument("--plots", help="directory for figures and CSV tables")
    p.set_defaults(fn=cmd_count)

    p = sub.add_parser("eval-ap", help="average precision of detections vs ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--geometry", choices=("box", "mask"), required=True)
    p.add_argument("--iou-rule", choices=("gt", "gte"), default="gt",
                   help="match on IoU strictly greater (default) or >= threshold")
    p.add_argument("--out", required=True)
    p.add_argument("--plots", help="directory for PR-curve figure and CSV")
    p.set_defaults(fn=cmd_eval_ap)

    p = sub.add_parser("eval-count", help="counting accuracy vs manual counts")
    p.add_argument("--report", help="count report JSON")
    p.add_argument("--manual", type=int, help="manual count for the report")
    p.add_argument("--manual-file", help="JSON list of [counted, manual] pairs")
    p.add_argument("--out", help="optional accuracy JSON output")
    p.set_defaults(fn=cmd_eval_count)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--spec", required=True, help="scene spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, ingest.ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # internal
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
