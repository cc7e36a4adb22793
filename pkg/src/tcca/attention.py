"""Scaled dot-product multi-head attention over unbatched sequences.

Operating on (T, D) tensors keeps the per-video training loop free of
padding logic; masks are boolean (True = attend) of shape (Tq, Tk).
"""

from __future__ import annotations

import math

import torch
from torch import nn


class MultiHeadAttention(nn.Module):
    def __init__(self, dim: int, num_heads: int, dropout: float = 0.0):
        super().__init__()
        if dim % num_heads != 0:
            raise ValueError("dim must be divisible by num_heads")
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.dropout = nn.Dropout(dropout)

    def forward(
        self,
        query: torch.Tensor,
        key_value: torch.Tensor | None = None,
        mask: torch.Tensor | None = None,
        need_weights: bool = False,
    ):
        if key_value is None:
            key_value = query
        tq, tk = query.shape[0], key_value.shape[0]

        def split(x: torch.Tensor) -> torch.Tensor:
            return x.view(x.shape[0], self.num_heads, self.head_dim).transpose(0, 1)

        q = split(self.q_proj(query))
        k = split(self.k_proj(key_value))
        v = split(self.v_proj(key_value))
        scores = q @ k.transpose(1, 2) / math.sqrt(self.head_dim)  # (H, Tq, Tk)
        if mask is not None:
            scores = scores.masked_fill(~mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        out = self.dropout(weights) @ v
        out = self.out_proj(out.transpose(0, 1).reshape(tq, -1))
        if need_weights:
            return out, weights
        return out


def window_mask(length: int, window: int) -> torch.Tensor:
    """Attend within non-overlapping windows of ``window`` frames."""
    group = torch.arange(length) // window
    return group[:, None] == group[None, :]


def stride_mask(length: int, stride: int) -> torch.Tensor:
    """Attend among frames sharing the same index modulo ``stride``."""
    group = torch.arange(length) % stride
    return group[:, None] == group[None, :]


class FeedForward(nn.Module):
    def __init__(self, dim: int, dropout: float = 0.0, expansion: int = 4):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(dim, expansion * dim),
            nn.GELU(),
            nn.Dropout(dropout),
            nn.Linear(expansion * dim, dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)
