"""Full anticipation network and the per-sample training objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .core import FrameSequence, SegmentSequence, WindowSpec, split_windows
from .crf.layer import CrfHead
from .crf.transitions import TransitionMatrix
from .decoder import (
    AnticipationDecoder,
    DecoderConfig,
    DecoderOutputs,
    extend_with_eos,
    loss_bacr,
    loss_duration,
    loss_per_query_ce,
)
from .encoder import EncoderConfig, SegmentationEncoder, build_seg_features, seg_loss, smooth_loss


@dataclass
class ModelOutputs:
    stage_logits: torch.Tensor  # (S, T_obs, C)
    f_seg: torch.Tensor  # (T_obs, S*C)
    decoder: DecoderOutputs


class AnticipationModel(nn.Module):
    def __init__(
        self,
        num_classes: int,
        feature_dim: int,
        enc_cfg: EncoderConfig,
        dec_cfg: DecoderConfig,
        crf_init: TransitionMatrix,
        omega: float,
        max_positions: int = 512,
    ):
        super().__init__()
        self.num_classes = num_classes
        self.encoder = SegmentationEncoder(feature_dim, num_classes, enc_cfg)
        self.decoder = AnticipationDecoder(
            seg_dim=enc_cfg.stages * num_classes,
            num_classes=num_classes,
            cfg=dec_cfg,
            max_positions=max_positions,
        )
        self.crf = CrfHead(num_classes, omega, crf_init)

    def forward(self, features: torch.Tensor) -> ModelOutputs:
        stage_logits = self.encoder(features)
        f_seg = build_seg_features(stage_logits)
        return ModelOutputs(stage_logits=stage_logits, f_seg=f_seg, decoder=self.decoder(f_seg))


@dataclass
class SampleTargets:
    """Supervision for one (observed window, future) split."""

    observed_labels: torch.Tensor  # (T_obs,)
    gt_path: torch.Tensor  # (K,) future actions truncated to K-1, EOS padded
    gt_durations: torch.Tensor  # (K,) fractions over the kept segments, then zeros
    future_actions: tuple[int, ...]  # untruncated segment labels


def build_targets(
    observed_labels: np.ndarray,
    future: SegmentSequence,
    num_queries: int,
    num_classes: int,
    dtype: torch.dtype = torch.float64,
) -> SampleTargets:
    kept = min(future.num_segments, num_queries - 1)
    actions = list(future.actions[:kept])
    durations = np.asarray(future.durations[:kept], dtype=np.float64)
    fractions = durations / durations.sum()
    path = actions + [num_classes] * (num_queries - kept)
    gt_dur = np.zeros(num_queries)
    gt_dur[:kept] = fractions
    return SampleTargets(
        observed_labels=torch.as_tensor(observed_labels, dtype=torch.long),
        gt_path=torch.as_tensor(path, dtype=torch.long),
        gt_durations=torch.as_tensor(gt_dur, dtype=dtype),
        future_actions=future.actions,
    )


def split_training_sample(
    video: FrameSequence, alpha: float, num_queries: int, num_classes: int, dtype: torch.dtype
) -> tuple[torch.Tensor, SampleTargets]:
    """Observed features plus targets covering the whole remaining future."""
    t = video.num_frames
    spec = WindowSpec(alpha=alpha, beta=1.0 - alpha, total_frames=t)
    observed, future, _ = split_windows(video, spec)
    features = torch.as_tensor(observed.features, dtype=dtype)
    return features, build_targets(observed.labels, future, num_queries, num_classes, dtype)


LOSS_TERMS = ("seg", "smooth", "dur", "fut", "past", "crf", "query_ce")


def total_loss(
    model: AnticipationModel,
    features: torch.Tensor,
    targets: SampleTargets,
    lambda_smooth: float,
    use_crf: bool = True,
    use_bacr_fut: bool = True,
    use_bacr_past: bool = True,
    use_smooth: bool = True,
) -> tuple[torch.Tensor, dict[str, float], ModelOutputs]:
    """Sum of the enabled loss terms; disabled terms contribute neither value
    nor gradient. Returns (total, per-term values, model outputs)."""
    out = model(features)
    dec = out.decoder
    terms: dict[str, torch.Tensor] = {}
    terms["seg"] = seg_loss(out.stage_logits, targets.observed_labels)
    if use_smooth and lambda_smooth > 0:
        terms["smooth"] = lambda_smooth * smooth_loss(out.stage_logits)
    terms["dur"] = loss_duration(dec.d_hat, targets.gt_durations)
    if use_bacr_fut or use_bacr_past:
        anchor = extend_with_eos(out.stage_logits[-1, -1, :])
        l_fut, l_past = loss_bacr(dec.a_fut, dec.a_past, dec.a_pres, anchor)
        if use_bacr_fut:
            terms["fut"] = l_fut
        if use_bacr_past:
            terms["past"] = l_past
    if use_crf:
        terms["crf"] = model.crf.nll(dec.a_pres, targets.gt_path)
    else:
        terms["query_ce"] = loss_per_query_ce(dec.a_pres, targets.gt_path)

    total = sum(terms.values())
    breakdown = {name: float(value.detach()) for name, value in terms.items()}
    return total, breakdown, out
