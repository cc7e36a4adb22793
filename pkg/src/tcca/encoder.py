"""Multi-stage segmentation encoder over the observed window.

Each stage mixes frames with windowed attention (local context) and
strided-global attention (long range) and emits frame-wise action logits;
stage s > 1 refines the softmax of the previous stage. The per-frame
concatenation of all stage logits is the feature map handed to the decoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .attention import FeedForward, MultiHeadAttention, stride_mask, window_mask

SMOOTH_CLAMP = 4.0  # truncation threshold on |log-prob| frame differences


@dataclass(frozen=True)
class EncoderConfig:
    stages: int = 2
    layers_per_stage: int = 2
    attention_heads: int = 2
    hidden_dim: int = 32
    local_window: int = 16
    global_stride: int = 8
    dropout: float = 0.1

    def __post_init__(self):
        if self.stages < 1 or self.local_window < 2 or self.global_stride < 1:
            raise ValueError("invalid encoder config")
        if self.hidden_dim % self.attention_heads != 0:
            raise ValueError("hidden_dim must be divisible by attention_heads")


class EncoderLayer(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.local_window = cfg.local_window
        self.global_stride = cfg.global_stride
        self.norm_local = nn.LayerNorm(cfg.hidden_dim)
        self.norm_global = nn.LayerNorm(cfg.hidden_dim)
        self.norm_ffn = nn.LayerNorm(cfg.hidden_dim)
        self.attn_local = MultiHeadAttention(cfg.hidden_dim, cfg.attention_heads, cfg.dropout)
        self.attn_global = MultiHeadAttention(cfg.hidden_dim, cfg.attention_heads, cfg.dropout)
        self.ffn = FeedForward(cfg.hidden_dim, cfg.dropout)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        t = x.shape[0]
        local = window_mask(t, self.local_window).to(x.device)
        x = x + self.dropout(self.attn_local(self.norm_local(x), mask=local))
        far = stride_mask(t, self.global_stride).to(x.device)
        x = x + self.dropout(self.attn_global(self.norm_global(x), mask=far))
        return x + self.dropout(self.ffn(self.norm_ffn(x)))


class EncoderStage(nn.Module):
    def __init__(self, in_dim: int, num_classes: int, cfg: EncoderConfig):
        super().__init__()
        self.in_proj = nn.Linear(in_dim, cfg.hidden_dim)
        self.layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.layers_per_stage))
        self.head = nn.Linear(cfg.hidden_dim, num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.in_proj(x)
        for layer in self.layers:
            x = layer(x)
        return self.head(x)


class SegmentationEncoder(nn.Module):
    """Stack of refinement stages; returns (S, T, C) pre-softmax logits."""

    def __init__(self, feature_dim: int, num_classes: int, cfg: EncoderConfig):
        super().__init__()
        self.num_classes = num_classes
        self.stages = nn.ModuleList(
            EncoderStage(feature_dim if s == 0 else num_classes, num_classes, cfg)
            for s in range(cfg.stages)
        )

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        if not torch.isfinite(features).all():
            raise ValueError("non-finite features")
        outputs = []
        x = features
        for stage in self.stages:
            logits = stage(x)
            outputs.append(logits)
            x = torch.softmax(logits, dim=-1)
        return torch.stack(outputs)


def seg_loss(stage_logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Frame-wise cross-entropy averaged over stages and frames."""
    s, t, c = stage_logits.shape
    if labels.shape[0] != t:
        raise ValueError("label track length does not match logits")
    if labels.numel() and int(labels.max()) >= c:
        raise ValueError("label out of range")
    return F.cross_entropy(stage_logits.reshape(s * t, c), labels.repeat(s))


def smooth_loss(stage_logits: torch.Tensor) -> torch.Tensor:
    """Truncated squared log-prob difference between consecutive frames.

    The previous-frame term is detached, so the loss pulls each frame toward
    its predecessor rather than flattening both.
    """
    if stage_logits.shape[1] < 2:
        return stage_logits.new_zeros(())
    logp = F.log_softmax(stage_logits, dim=-1)
    delta = logp[:, 1:, :] - logp[:, :-1, :].detach()
    return torch.clamp(delta**2, max=SMOOTH_CLAMP**2).mean()


def build_seg_features(stage_logits: torch.Tensor) -> torch.Tensor:
    """Per-frame concatenation of stage logits, stage order first: (T, S*C)."""
    s, t, c = stage_logits.shape
    return stage_logits.permute(1, 0, 2).reshape(t, s * c)
