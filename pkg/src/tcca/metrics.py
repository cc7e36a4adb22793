"""Evaluation metrics: MoC, frame accuracy, segmental Edit and F1, mAP,
plus the duration-to-frames expansion used before frame-wise scoring.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def decode_to_frames(actions, durations, horizon: int, fill_label: int | None = None) -> np.ndarray:
    """Expand (action, normalized duration) pairs into exactly ``horizon`` frames.

    Boundaries come from cumulative rounding so the lengths always sum to the
    horizon. An empty action list falls back to ``fill_label`` (the last
    observed label at call sites).
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if len(actions) == 0:
        if fill_label is None:
            raise ValueError("empty action list needs a fill label")
        return np.full(horizon, fill_label, dtype=np.int64)
    durations = np.asarray(durations, dtype=np.float64)
    if len(durations) != len(actions) or durations.sum() <= 0:
        raise ValueError("invalid durations")
    cum = np.cumsum(durations / durations.sum())
    boundaries = np.floor(horizon * cum + 0.5).astype(np.int64)
    track = np.empty(horizon, dtype=np.int64)
    prev = 0
    for action, bound in zip(actions, boundaries):
        track[prev:bound] = action
        prev = bound
    return track


def frame_acc(pred_track, gt_track) -> float:
    pred, gt = np.asarray(pred_track), np.asarray(gt_track)
    if pred.shape != gt.shape:
        raise ValueError("track length mismatch")
    return float((pred == gt).mean())


def moc(pred_track, gt_track, num_classes: int) -> float:
    """Mean over classes (present in the ground truth) of per-class accuracy."""
    pred, gt = np.asarray(pred_track), np.asarray(gt_track)
    if pred.shape != gt.shape:
        raise ValueError("track length mismatch")
    accs = []
    for c in range(num_classes):
        mask = gt == c
        if mask.any():
            accs.append(float((pred[mask] == c).mean()))
    return float(np.mean(accs)) if accs else 0.0


def edit_score(pred_labels, gt_labels) -> float:
    """Normalized Levenshtein similarity between segment label lists."""
    p, g = list(pred_labels), list(gt_labels)
    n, m = len(p), len(g)
    if n == 0 and m == 0:
        return 1.0
    if n == 0 or m == 0:
        return 0.0
    dist = np.arange(m + 1)
    for i in range(1, n + 1):
        prev_diag = dist[0]
        dist[0] = i
        for j in range(1, m + 1):
            cur = dist[j]
            cost = 0 if p[i - 1] == g[j - 1] else 1
            dist[j] = min(dist[j] + 1, dist[j - 1] + 1, prev_diag + cost)
            prev_diag = cur
    return 1.0 - dist[m] / max(n, m)


def segments_with_spans(track) -> list[tuple[int, int, int]]:
    """(label, start, end) triples with end exclusive."""
    track = np.asarray(track)
    if track.size == 0:
        return []
    bounds = np.flatnonzero(track[1:] != track[:-1]) + 1
    starts = np.concatenate(([0], bounds))
    ends = np.concatenate((bounds, [track.size]))
    return [(int(track[s]), int(s), int(e)) for s, e in zip(starts, ends)]


def span_iou(a: tuple[int, int], b: tuple[int, int]) -> float:
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = max(a[1], b[1]) - min(a[0], b[0])
    return inter / union if union > 0 else 0.0


def f1_counts(pred_segments, gt_segments, tau: float) -> tuple[int, int, int]:
    """Greedy TP/FP/FN: each prediction claims its best unmatched same-label
    ground-truth segment when the overlap reaches ``tau``."""
    used = [False] * len(gt_segments)
    tp = fp = 0
    for label, ps, pe in pred_segments:
        best_iou, best_j = 0.0, -1
        for j, (gl, gs, ge) in enumerate(gt_segments):
            if used[j] or gl != label:
                continue
            iou = span_iou((ps, pe), (gs, ge))
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= tau:
            tp += 1
            used[best_j] = True
        else:
            fp += 1
    fn = used.count(False)
    return tp, fp, fn


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def f1_at(pred_segments, gt_segments, tau: float) -> float:
    return f1_from_counts(*f1_counts(pred_segments, gt_segments, tau))


def average_precision(scores, positives) -> float:
    """AP over one class: precision averaged at every positive, descending
    scores, ties broken toward the lower video index."""
    scores = np.asarray(scores, dtype=np.float64)
    order = sorted(range(len(scores)), key=lambda v: (-scores[v], v))
    hits = 0
    precisions = []
    for rank, v in enumerate(order, start=1):
        if positives[v]:
            hits += 1
            precisions.append(hits / rank)
    if not precisions:
        raise ValueError("class without positives")
    return float(np.mean(precisions))


def map_multilabel(scores, gt_sets, class_partition) -> tuple[float, float, float]:
    """Per-class AP averaged over all / frequent / rare classes.

    Classes with no positive video are excluded from every mean.
    """
    scores = np.asarray(scores, dtype=np.float64)
    num_classes = scores.shape[1]
    aps = {}
    for c in range(num_classes):
        positives = [c in s for s in gt_sets]
        if any(positives):
            aps[c] = average_precision(scores[:, c], positives)
    if not aps:
        raise ValueError("no class has a positive example")

    def mean_over(class_ids) -> float:
        vals = [aps[c] for c in class_ids if c in aps]
        return float(np.mean(vals)) if vals else 0.0

    return (
        float(np.mean(list(aps.values()))),
        mean_over(class_partition.get("freq", [])),
        mean_over(class_partition.get("rare", [])),
    )


@dataclass
class MetricsReport:
    """Anticipation MoC per (alpha, beta) plus encoder segmentation scores.

    The mAP fields are populated only in set-prediction mode.
    """

    moc: dict[tuple[float, float], float] = field(default_factory=dict)
    seg_acc: float = 0.0
    edit: float = 0.0
    f1_10: float = 0.0
    f1_25: float = 0.0
    f1_50: float = 0.0
    seg_by_alpha: dict[float, dict[str, float]] = field(default_factory=dict)
    map_all: float | None = None
    map_freq: float | None = None
    map_rare: float | None = None

    @property
    def mmoc(self) -> float:
        return float(np.mean(list(self.moc.values()))) if self.moc else 0.0

    def csv_rows(self) -> list[tuple[str, str, str, str]]:
        rows = [
            ("moc", f"{a:g}", f"{b:g}", f"{v:.10f}")
            for (a, b), v in sorted(self.moc.items())
        ]
        for alpha in sorted(self.seg_by_alpha):
            for name, value in sorted(self.seg_by_alpha[alpha].items()):
                rows.append((name, f"{alpha:g}", "", f"{value:.10f}"))
        for name in ("map_all", "map_freq", "map_rare"):
            value = getattr(self, name)
            if value is not None:
                rows.append((name, "", "", f"{value:.10f}"))
        return rows

    def to_json_dict(self) -> dict:
        return {
            "moc": [
                {"alpha": a, "beta": b, "value": v} for (a, b), v in sorted(self.moc.items())
            ],
            "mmoc": self.mmoc,
            "seg_acc": self.seg_acc,
            "edit": self.edit,
            "f1_10": self.f1_10,
            "f1_25": self.f1_25,
            "f1_50": self.f1_50,
            "map_all": self.map_all,
            "map_freq": self.map_freq,
            "map_rare": self.map_rare,
        }


def write_report(report: MetricsReport, csv_path: Path, json_path: Path) -> None:
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("metric", "alpha", "beta", "value"))
        writer.writerows(report.csv_rows())
    Path(json_path).write_text(json.dumps(report.to_json_dict(), indent=1, sort_keys=True) + "\n")
