"""NumPy fallback for the linear-chain DP kernels.

Same contract as the compiled extension in ``_chain_cy.pyx``: emissions are
(K, L) log-scores over the L = C+1 path labels, ``trans`` is the (L, L)
inner transition block, ``start``/``end`` are the boundary score vectors and
``omega`` scales every transition term. All inputs are float64.
"""

from __future__ import annotations

import numpy as np


def _logsumexp(values: np.ndarray, axis: int) -> np.ndarray:
    peak = values.max(axis=axis, keepdims=True)
    return (peak + np.log(np.exp(values - peak).sum(axis=axis, keepdims=True))).squeeze(axis)


def log_partition(emissions, trans, start, end, omega):
    alpha = emissions[0] + omega * start
    for i in range(1, emissions.shape[0]):
        alpha = emissions[i] + _logsumexp(alpha[:, None] + omega * trans, axis=0)
    return float(_logsumexp(alpha + omega * end, axis=0))


def forward_backward(emissions, trans, start, end, omega):
    """Log-partition plus position and summed pairwise marginals."""
    k, n_labels = emissions.shape
    scaled = omega * trans
    alphas = np.empty((k, n_labels))
    alphas[0] = emissions[0] + omega * start
    for i in range(1, k):
        alphas[i] = emissions[i] + _logsumexp(alphas[i - 1][:, None] + scaled, axis=0)
    log_z = float(_logsumexp(alphas[-1] + omega * end, axis=0))

    betas = np.empty((k, n_labels))
    betas[-1] = omega * end
    for i in range(k - 2, -1, -1):
        betas[i] = _logsumexp(scaled + (emissions[i + 1] + betas[i + 1])[None, :], axis=1)

    pos_marg = np.exp(alphas + betas - log_z)
    pair_marg = np.zeros((n_labels, n_labels))
    for i in range(k - 1):
        pair_marg += np.exp(
            alphas[i][:, None] + scaled + (emissions[i + 1] + betas[i + 1])[None, :] - log_z
        )
    return log_z, pos_marg, pair_marg


def viterbi(emissions, trans, start, end, omega):
    """Best path and its score; ties resolved toward the lower label id."""
    k, n_labels = emissions.shape
    # transposed so each reduction runs over a contiguous row
    scaled_t = np.ascontiguousarray(omega * trans.T)
    candidates = np.empty_like(scaled_t)
    backptr = np.zeros((k, n_labels), dtype=np.int64)
    score = emissions[0] + omega * start
    for i in range(1, k):
        np.add(scaled_t, score[None, :], out=candidates)  # [dest, source]
        backptr[i] = candidates.argmax(axis=1)  # first maximum: lowest label wins
        best = np.take_along_axis(candidates, backptr[i][:, None], axis=1)[:, 0]
        score = emissions[i] + best
    score = score + omega * end
    path = np.empty(k, dtype=np.int64)
    path[-1] = int(score.argmax())
    for i in range(k - 1, 0, -1):
        path[i - 1] = backptr[i, path[i]]
    return path, float(score.max())
