"""Torch module wrapping the CRF kernels with an analytic backward pass.

The NLL gradient of a linear-chain CRF is expected feature counts minus
observed counts, so the backward pass reuses the forward-backward marginals
instead of differentiating through the DP recursion.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from . import kernels
from .transitions import FORBIDDEN_SCORE, TransitionMatrix, forbidden_mask


class _CrfNll(torch.autograd.Function):
    @staticmethod
    def forward(ctx, emissions: torch.Tensor, matrix: torch.Tensor, gt_path: torch.Tensor, omega: float):
        k, n_labels = emissions.shape
        em = np.ascontiguousarray(emissions.detach().cpu().numpy(), dtype=np.float64)
        full = np.ascontiguousarray(matrix.detach().cpu().numpy(), dtype=np.float64)
        inner = np.ascontiguousarray(full[:n_labels, :n_labels])
        start = np.ascontiguousarray(full[n_labels, :n_labels])
        end = np.ascontiguousarray(full[:n_labels, n_labels + 1])
        path = gt_path.detach().cpu().numpy().astype(np.int64)

        log_z, pos_marg, pair_marg = kernels.forward_backward(em, inner, start, end, omega)
        score = em[np.arange(k), path].sum() + omega * (
            start[path[0]] + inner[path[:-1], path[1:]].sum() + end[path[-1]]
        )

        grad_em = pos_marg.copy()
        grad_em[np.arange(k), path] -= 1.0
        grad_full = np.zeros_like(full)
        grad_full[:n_labels, :n_labels] = pair_marg
        np.add.at(grad_full, (path[:-1], path[1:]), -1.0)
        grad_full[n_labels, :n_labels] = pos_marg[0]
        grad_full[n_labels, path[0]] -= 1.0
        grad_full[:n_labels, n_labels + 1] += pos_marg[-1]
        grad_full[path[-1], n_labels + 1] -= 1.0
        grad_full *= omega

        ctx.save_for_backward(
            torch.from_numpy(grad_em).to(emissions.dtype),
            torch.from_numpy(grad_full).to(matrix.dtype),
        )
        return emissions.new_tensor(log_z - score)

    @staticmethod
    def backward(ctx, grad_out):
        grad_em, grad_full = ctx.saved_tensors
        return grad_out * grad_em, grad_out * grad_full, None, None


class CrfHead(nn.Module):
    """Learnable transition matrix plus NLL / Viterbi over query emissions."""

    def __init__(self, num_classes: int, omega: float, init: TransitionMatrix):
        super().__init__()
        if init.num_classes != num_classes:
            raise ValueError("transition init does not match class count")
        self.num_classes = num_classes
        self.omega = float(omega)
        self.weight = nn.Parameter(torch.as_tensor(init.m, dtype=torch.float64))
        self.register_buffer("_forbidden", torch.as_tensor(forbidden_mask(num_classes)))

    def matrix(self) -> torch.Tensor:
        """Effective transitions: pinned boundary entries never receive gradient."""
        fixed = torch.full_like(self.weight, FORBIDDEN_SCORE)
        return torch.where(self._forbidden, fixed, self.weight)

    def nll(self, emissions: torch.Tensor, gt_path: torch.Tensor) -> torch.Tensor:
        return _CrfNll.apply(emissions, self.matrix(), gt_path, self.omega)

    def decode(self, emissions: torch.Tensor) -> tuple[np.ndarray, float]:
        from .chain import viterbi_decode

        return viterbi_decode(
            emissions.detach().cpu().numpy(), self.matrix().detach().cpu().numpy(), self.omega
        )
