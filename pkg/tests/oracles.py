"""Independent reference implementations used to cross-check the library.

Everything here recomputes results from first principles (enumeration,
full-matrix DP, exhaustive matching, quadratic ranking) and never calls the
code under test.
"""

from __future__ import annotations

import itertools

import numpy as np


def path_score(emissions, full_matrix, path, omega):
    """Direct formula: emission sum plus omega-weighted transition chain."""
    n_labels = emissions.shape[1]
    start, end = n_labels, n_labels + 1
    total = 0.0
    for i, label in enumerate(path):
        total += emissions[i, label]
    trans = full_matrix[start, path[0]] + full_matrix[path[-1], end]
    for a, b in zip(path, path[1:]):
        trans += full_matrix[a, b]
    return total + omega * trans


def all_path_scores(emissions, full_matrix, omega):
    """Vectorized score of every label sequence; returns (paths, scores)."""
    k, n_labels = emissions.shape
    start, end = n_labels, n_labels + 1
    grids = np.meshgrid(*[np.arange(n_labels)] * k, indexing="ij")
    paths = np.stack([g.reshape(-1) for g in grids], axis=1)  # (L^K, K)
    scores = emissions[np.arange(k)[None, :], paths].sum(axis=1)
    trans = full_matrix[start, paths[:, 0]] + full_matrix[paths[:, -1], end]
    for i in range(k - 1):
        trans = trans + full_matrix[paths[:, i], paths[:, i + 1]]
    return paths, scores + omega * trans


def log_partition(emissions, full_matrix, omega):
    _, scores = all_path_scores(emissions, full_matrix, omega)
    peak = scores.max()
    return float(peak + np.log(np.exp(scores - peak).sum()))


def best_path(emissions, full_matrix, omega):
    paths, scores = all_path_scores(emissions, full_matrix, omega)
    idx = int(scores.argmax())
    ordered = np.sort(scores)
    unique = ordered.size < 2 or ordered[-1] - ordered[-2] > 1e-9
    return paths[idx], float(scores[idx]), unique


def levenshtein(a, b) -> int:
    """Classic full-matrix edit distance."""
    n, m = len(a), len(b)
    table = np.zeros((n + 1, m + 1), dtype=np.int64)
    table[:, 0] = np.arange(n + 1)
    table[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i, j] = min(table[i - 1, j] + 1, table[i, j - 1] + 1, table[i - 1, j - 1] + cost)
    return int(table[n, m])


def _iou(a, b) -> float:
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = max(a[1], b[1]) - min(a[0], b[0])
    return inter / union if union else 0.0


def exhaustive_f1(pred_segments, gt_segments, tau: float) -> float:
    """Best-possible F1 over all injective prediction-to-truth matchings."""
    edges = [
        [
            j
            for j, (gl, gs, ge) in enumerate(gt_segments)
            if gl == pl and _iou((ps, pe), (gs, ge)) >= tau
        ]
        for pl, ps, pe in pred_segments
    ]

    def search(i: int, used: frozenset) -> int:
        if i == len(edges):
            return 0
        best = search(i + 1, used)  # prediction i unmatched
        for j in edges[i]:
            if j not in used:
                best = max(best, 1 + search(i + 1, used | {j}))
        return best

    tp = search(0, frozenset())
    fp = len(pred_segments) - tp
    fn = len(gt_segments) - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def quadratic_ap(scores, positives) -> float:
    """AP via pairwise rank counting; ties ordered by lower index first."""
    n = len(scores)
    precisions = []
    for v in range(n):
        if not positives[v]:
            continue
        rank = 1
        hits = 1
        for u in range(n):
            if u == v:
                continue
            ahead = scores[u] > scores[v] or (scores[u] == scores[v] and u < v)
            if ahead:
                rank += 1
                if positives[u]:
                    hits += 1
        precisions.append(hits / rank)
    return float(np.mean(precisions))


def enumerate_label_tracks(rng: np.random.Generator, length: int, num_classes: int) -> np.ndarray:
    return rng.integers(0, num_classes, size=length)
