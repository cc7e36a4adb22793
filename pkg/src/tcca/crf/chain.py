"""Linear-chain CRF scoring, log-partition, NLL and Viterbi decoding.

Emissions are a (K, C+1) matrix of per-query label scores (actions + EOS);
paths are length-K label sequences over the same space. Boundary terms come
from the START row / END column of the augmented transition matrix.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .transitions import TransitionMatrix


def _as_matrix(m) -> np.ndarray:
    return m.m if isinstance(m, TransitionMatrix) else np.asarray(m)


def _parts(emissions: np.ndarray, m) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    em = np.ascontiguousarray(np.asarray(emissions, dtype=np.float64))
    if em.ndim != 2 or em.shape[0] < 1:
        raise ValueError("emissions must be a K x (C+1) matrix")
    if not np.isfinite(em).all():
        raise ValueError("non-finite emissions")
    full = np.asarray(_as_matrix(m), dtype=np.float64)
    n_labels = em.shape[1]
    if full.shape != (n_labels + 2, n_labels + 2):
        raise ValueError("transition matrix does not match emission width")
    # full-matrix indices: path labels 0..C, START = C+1, END = C+2
    inner = np.ascontiguousarray(full[:n_labels, :n_labels])
    start = np.ascontiguousarray(full[n_labels, :n_labels])
    end = np.ascontiguousarray(full[:n_labels, n_labels + 1])
    return em, inner, start, end


def _check_path(path, n_labels: int) -> np.ndarray:
    path = np.asarray(path, dtype=np.int64)
    if path.ndim != 1 or np.any(path < 0) or np.any(path >= n_labels):
        raise ValueError("invalid label in path")
    return path


def crf_score(emissions, path, m, omega: float) -> float:
    """Emission sum along the path plus omega-weighted boundary transitions."""
    em, inner, start, end = _parts(emissions, m)
    path = _check_path(path, em.shape[1])
    if path.shape[0] != em.shape[0]:
        raise ValueError("path length must match emissions")
    emit = float(em[np.arange(len(path)), path].sum())
    trans = float(start[path[0]] + inner[path[:-1], path[1:]].sum() + end[path[-1]])
    return emit + omega * trans


def crf_log_partition(emissions, m, omega: float) -> float:
    em, inner, start, end = _parts(emissions, m)
    return kernels.log_partition(em, inner, start, end, omega)


def crf_nll(emissions, gt_path, m, omega: float) -> float:
    return crf_log_partition(emissions, m, omega) - crf_score(emissions, gt_path, m, omega)


def crf_marginals(emissions, m, omega: float):
    """(log Z, per-position marginals, summed pairwise marginals)."""
    em, inner, start, end = _parts(emissions, m)
    return kernels.forward_backward(em, inner, start, end, omega)


def viterbi_decode(emissions, m, omega: float) -> tuple[np.ndarray, float]:
    """Highest-scoring path (ties toward the lower label id) and its score."""
    em, inner, start, end = _parts(emissions, m)
    path, score = kernels.viterbi(em, inner, start, end, omega)
    return path, score


def truncate_at_eos(path, num_classes: int) -> list[int]:
    """Labels strictly before the first EOS; the full path if EOS is absent."""
    out = []
    for label in path:
        if int(label) == num_classes:
            break
        out.append(int(label))
    return out
