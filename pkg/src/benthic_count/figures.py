"""Figure and table rendering for count reports and AP results."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import ApResult
from .tracking import CountReport


def save_count_outputs(report: CountReport, out_dir: str | Path) -> list[Path]:
    """Write active-track and track-span figures plus CSV tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.step(range(len(report.per_frame_active)), report.per_frame_active,
            where="post", lw=1.2)
    ax.set_xlabel("frame")
    ax.set_ylabel("active tracks")
    ax.set_title(f"active tracks per frame (total counted: {report.total_count})")
    fig.tight_layout()
    path = out / "active_tracks.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    if report.tracks:
        fig, ax = plt.subplots(figsize=(7, 0.18 * len(report.tracks) + 1.5))
        for t in report.tracks:
            ax.hlines(t.id, t.birth_frame, t.last_frame, lw=2)
        ax.set_xlabel("frame")
        ax.set_ylabel("track id")
        ax.set_title("track lifespans (birth to last match)")
        fig.tight_layout()
        path = out / "track_spans.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    path = out / "tracks.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "birth_frame", "last_frame", "hits"])
        for t in report.tracks:
            writer.writerow([t.id, t.birth_frame, t.last_frame, t.hits])
    written.append(path)

    path = out / "per_frame_active.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "active_tracks"])
        for i, n in enumerate(report.per_frame_active):
            writer.writerow([i, n])
    written.append(path)
    return written


def save_ap_outputs(result: ApResult, out_dir: str | Path) -> list[Path]:
    """Write the precision-recall curves figure plus a CSV of curve points."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(5.2, 5))
    for t in sorted(result.curves):
        curve = result.curves[t]
        if not curve:
            continue
        ax.plot([p.recall for p in curve], [p.precision for p in curve],
                lw=1.2, label=f"IoU {t:.2f} (AP {result.per_threshold[t]:.3f})")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_title(f"precision-recall (AP {result.ap:.3f})")
    ax.legend(fontsize=7, loc="lower left")
    fig.tight_layout()
    path = out / "pr_curves.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    path = out / "pr_points.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iou_threshold", "recall", "precision", "score_threshold"])
        for t in sorted(result.curves):
            for p in result.curves[t]:
                writer.writerow([f"{t:.2f}", p.recall, p.precision, p.score_threshold])
    written.append(path)
    return written
