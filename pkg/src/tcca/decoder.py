"""Query-based parallel decoder with auxiliary context heads.

K learnable queries cross-attend to the projected encoder features and are
read out by four heads: present action (C+1 logits, EOS included), next and
previous action (context regularization targets), and an exp-normalized
duration that is conditioned on the present-action distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .attention import FeedForward, MultiHeadAttention

KL_EPS = 1e-12


@dataclass(frozen=True)
class DecoderConfig:
    num_queries: int = 8
    layers: int = 2
    attention_heads: int = 2
    hidden_dim: int = 64
    dropout: float = 0.1
    duration_mode: str = "dependent"  # "dependent" | "independent"

    def __post_init__(self):
        if self.num_queries < 2:
            raise ValueError("need at least two queries")
        if self.hidden_dim % self.attention_heads != 0:
            raise ValueError("hidden_dim must be divisible by attention_heads")
        if self.duration_mode not in ("dependent", "independent"):
            raise ValueError("unknown duration_mode")


@dataclass
class DecoderOutputs:
    q_prime: torch.Tensor  # (K, D_dec)
    a_pres: torch.Tensor  # (K, C+1)
    a_fut: torch.Tensor  # (K, C+1)
    a_past: torch.Tensor  # (K, C+1)
    d_hat: torch.Tensor  # (K,) nonneg, sums to 1


class DecoderLayer(nn.Module):
    def __init__(self, cfg: DecoderConfig):
        super().__init__()
        self.norm_self = nn.LayerNorm(cfg.hidden_dim)
        self.norm_cross = nn.LayerNorm(cfg.hidden_dim)
        self.norm_ffn = nn.LayerNorm(cfg.hidden_dim)
        self.self_attn = MultiHeadAttention(cfg.hidden_dim, cfg.attention_heads, cfg.dropout)
        self.cross_attn = MultiHeadAttention(cfg.hidden_dim, cfg.attention_heads, cfg.dropout)
        self.ffn = FeedForward(cfg.hidden_dim, cfg.dropout)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, queries: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        queries = queries + self.dropout(self.self_attn(self.norm_self(queries)))
        queries = queries + self.dropout(self.cross_attn(self.norm_cross(queries), memory))
        return queries + self.dropout(self.ffn(self.norm_ffn(queries)))


class AnticipationDecoder(nn.Module):
    def __init__(self, seg_dim: int, num_classes: int, cfg: DecoderConfig, max_positions: int = 512):
        super().__init__()
        self.cfg = cfg
        self.num_classes = num_classes
        self.max_positions = max_positions
        self.positions = nn.Parameter(torch.zeros(max_positions, seg_dim))
        nn.init.normal_(self.positions, std=0.5)  # salient against logit-scale features
        self.enc2dec = nn.Linear(seg_dim, cfg.hidden_dim)
        self.queries = nn.Parameter(torch.zeros(cfg.num_queries, cfg.hidden_dim))
        nn.init.normal_(self.queries, std=0.02)
        self.layers = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.layers))
        self.norm_out = nn.LayerNorm(cfg.hidden_dim)
        self.head_present = nn.Linear(cfg.hidden_dim, num_classes + 1)
        self.head_future = nn.Linear(cfg.hidden_dim, num_classes + 1)
        self.head_past = nn.Linear(cfg.hidden_dim, num_classes + 1)
        dur_in = cfg.hidden_dim if cfg.duration_mode == "independent" else cfg.hidden_dim + num_classes + 1
        self.head_dur = nn.Linear(dur_in, 1)

    def project_encoder(self, f_seg: torch.Tensor) -> torch.Tensor:
        """Add learned positions (indices clamp at the table edge), map to D_dec."""
        if f_seg.shape[1] != self.positions.shape[1]:
            raise ValueError("segmentation feature width does not match positional table")
        idx = torch.arange(f_seg.shape[0], device=f_seg.device).clamp(max=self.max_positions - 1)
        return self.enc2dec(f_seg + self.positions[idx])

    def decode_queries(self, f_prime: torch.Tensor) -> torch.Tensor:
        q = self.queries
        for layer in self.layers:
            q = layer(q, f_prime)
        return self.norm_out(q)

    def durations(self, q_prime: torch.Tensor, a_pres: torch.Tensor) -> torch.Tensor:
        if self.cfg.duration_mode == "independent":
            raw = self.head_dur(q_prime).squeeze(-1)
        else:
            raw = self.head_dur(torch.cat([q_prime, torch.softmax(a_pres, dim=-1)], dim=-1)).squeeze(-1)
        return torch.softmax(raw, dim=0)  # exp transform + normalization in one step

    def forward(self, f_seg: torch.Tensor) -> DecoderOutputs:
        f_prime = self.project_encoder(f_seg)
        q_prime = self.decode_queries(f_prime)
        a_pres = self.head_present(q_prime)
        return DecoderOutputs(
            q_prime=q_prime,
            a_pres=a_pres,
            a_fut=self.head_future(q_prime),
            a_past=self.head_past(q_prime),
            d_hat=self.durations(q_prime, a_pres),
        )


def extend_with_eos(logits: torch.Tensor) -> torch.Tensor:
    """Append an impossible EOS entry to a C-way logit vector."""
    return torch.cat([logits, logits.new_full((1,), float("-inf"))])


def kl_divergence(p_logits: torch.Tensor, q_logits: torch.Tensor) -> torch.Tensor:
    """KL(softmax(p) || softmax(q)) in nats, eps-floored inside the logs."""
    p = torch.softmax(p_logits, dim=-1)
    q = torch.softmax(q_logits, dim=-1)
    return (p * (torch.log(p + KL_EPS) - torch.log(q + KL_EPS))).sum()


def loss_duration(d_hat: torch.Tensor, d_gt: torch.Tensor) -> torch.Tensor:
    if d_hat.shape != d_gt.shape:
        raise ValueError("duration target length mismatch")
    return ((d_gt - d_hat) ** 2).mean()


def loss_bacr(
    a_fut: torch.Tensor,
    a_past: torch.Tensor,
    a_pres: torch.Tensor,
    last_frame_logits: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Bi-directional context alignment losses.

    Each auxiliary prediction is pulled toward the detached present-action
    distribution of its neighbouring query; the first past prediction is
    anchored to the encoder's last observed frame (already EOS-extended).
    """
    k = a_pres.shape[0]
    targets = a_pres.detach()
    l_fut = a_fut.new_zeros(())
    for i in range(k - 1):
        l_fut = l_fut + kl_divergence(a_fut[i], targets[i + 1])
    l_past = kl_divergence(a_past[0], last_frame_logits.detach())
    for i in range(1, k):
        l_past = l_past + kl_divergence(a_past[i], targets[i - 1])
    return l_fut, l_past


def loss_per_query_ce(a_pres: torch.Tensor, target_labels: torch.Tensor) -> torch.Tensor:
    """Independent per-query cross-entropy; the no-CRF training objective."""
    return F.cross_entropy(a_pres, target_labels)
