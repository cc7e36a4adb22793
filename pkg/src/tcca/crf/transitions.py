"""Transition matrix over the augmented label set and its initializers.

Indices for ``C`` action classes: actions ``0..C-1``, EOS ``C``, START
``C+1``, END ``C+2``. Transitions into START and out of END are pinned to a
large negative score and excluded from learning.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORBIDDEN_SCORE = -1e4
LAPLACE_EPS = 1.0


def label_names(num_classes: int) -> list[str]:
    return [f"a{i}" for i in range(num_classes)] + ["EOS", "START", "END"]


@dataclass(frozen=True)
class TransitionMatrix:
    m: np.ndarray  # (C+3, C+3) log-scores
    num_classes: int

    def __post_init__(self):
        side = self.num_classes + 3
        if self.m.shape != (side, side):
            raise ValueError("transition matrix must be (C+3) x (C+3)")

    @property
    def eos(self) -> int:
        return self.num_classes

    @property
    def start(self) -> int:
        return self.num_classes + 1

    @property
    def end(self) -> int:
        return self.num_classes + 2


def forbidden_mask(num_classes: int) -> np.ndarray:
    """True where entries are pinned: into START, out of END."""
    side = num_classes + 3
    mask = np.zeros((side, side), dtype=bool)
    mask[:, num_classes + 1] = True
    mask[num_classes + 2, :] = True
    return mask


def _apply_boundary(m: np.ndarray, num_classes: int) -> np.ndarray:
    m[forbidden_mask(num_classes)] = FORBIDDEN_SCORE
    return m


def init_transitions_random(seed: int, num_classes: int, scale: float = 0.1) -> TransitionMatrix:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    side = num_classes + 3
    m = rng.uniform(-scale, scale, size=(side, side))
    return TransitionMatrix(_apply_boundary(m, num_classes), num_classes)


def init_transitions_precomputed(corpora, num_classes: int) -> TransitionMatrix:
    """Laplace-smoothed empirical transition log-probabilities.

    ``corpora`` is an iterable of action-id sequences (future segment labels,
    no EOS); each contributes its consecutive pairs plus a terminal
    transition into EOS, and its first action to the START row.
    """
    c = num_classes
    eos = c
    pair_counts = np.zeros((c + 1, c + 1))
    first_counts = np.zeros(c + 1)
    n_seq = 0
    for seq in corpora:
        seq = list(seq)
        if not seq:
            continue
        n_seq += 1
        first_counts[seq[0]] += 1
        for a, b in zip(seq, seq[1:]):
            pair_counts[a, b] += 1
        pair_counts[seq[-1], eos] += 1
    if n_seq == 0 or pair_counts.sum() == 0:
        raise ValueError("empty transition corpus")

    side = c + 3
    m = np.zeros((side, side))
    row_totals = pair_counts.sum(axis=1, keepdims=True)
    m[: c + 1, : c + 1] = np.log(
        (pair_counts + LAPLACE_EPS) / (row_totals + LAPLACE_EPS * (c + 1))
    )
    m[c + 1, : c + 1] = np.log(
        (first_counts + LAPLACE_EPS) / (n_seq + LAPLACE_EPS * (c + 1))
    )
    return TransitionMatrix(_apply_boundary(m, c), c)


def transition_counts(corpora, num_classes: int) -> np.ndarray:
    """Observed outgoing transitions per action class (terminal EOS included)."""
    counts = np.zeros(num_classes, dtype=np.int64)
    for seq in corpora:
        for a in seq:
            counts[a] += 1  # every segment has exactly one outgoing transition
    return counts


def exp_normalized(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a transition log-score matrix."""
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def row_argmax_agreement(
    m_learned: np.ndarray,
    reference: np.ndarray,
    counts: np.ndarray,
    min_count: int,
) -> tuple[float, int]:
    """Fraction of well-observed action rows whose most likely successor
    (over action columns) matches the reference matrix.

    ``reference`` may be a C x C generator matrix or another learned
    (C+3) x (C+3) matrix.
    """
    c = counts.shape[0]
    rows = np.flatnonzero(counts >= min_count)
    if rows.size == 0:
        return 0.0, 0
    learned_arg = m_learned[rows, :c].argmax(axis=1)
    ref_arg = reference[rows, :c].argmax(axis=1)
    return float((learned_arg == ref_arg).mean()), int(rows.size)


def export_csv(matrix: np.ndarray, num_classes: int, path: Path) -> None:
    """Row-major CSV with a label-name header; rows follow the header order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(label_names(num_classes))
        for row in matrix:
            writer.writerow([f"{v:.12g}" for v in row])


def read_csv(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in row] for row in rows[1:]])
