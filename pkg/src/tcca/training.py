"""Optimization loop, evaluation protocol and gradient verification."""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .config import RunConfig
from .core import FrameSequence, frames_to_segments
from .crf.chain import truncate_at_eos, viterbi_decode
from .crf.transitions import (
    TransitionMatrix,
    init_transitions_precomputed,
    init_transitions_random,
)
from .metrics import (
    MetricsReport,
    decode_to_frames,
    edit_score,
    f1_counts,
    f1_from_counts,
    frame_acc,
    moc,
    segments_with_spans,
)
from .model import AnticipationModel, split_training_sample, total_loss


class NonFiniteLossError(RuntimeError):
    def __init__(self, term: str):
        super().__init__(f"non-finite loss term: {term}")
        self.term = term


def resolve_threads() -> int:
    value = os.environ.get("TCCA_THREADS", "")
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


def torch_dtype(name: str) -> torch.dtype:
    return torch.float64 if name == "float64" else torch.float32


def subsample(video: FrameSequence, rate: int, phase: int) -> FrameSequence:
    if rate <= 1:
        return video
    return FrameSequence(features=video.features[phase::rate], labels=video.labels[phase::rate])


def initial_transitions(cfg: RunConfig, train_videos: list[FrameSequence]) -> TransitionMatrix:
    c = cfg.generator.num_classes
    if cfg.crf.init_mode == "precomputed":
        corpus = [frames_to_segments(v.labels).actions for v in train_videos]
        return init_transitions_precomputed(corpus, c)
    return init_transitions_random(cfg.train.seed, c)


def build_model(cfg: RunConfig, init: TransitionMatrix) -> AnticipationModel:
    model = AnticipationModel(
        num_classes=cfg.generator.num_classes,
        feature_dim=cfg.generator.feature_dim,
        enc_cfg=cfg.encoder,
        dec_cfg=cfg.decoder,
        crf_init=init,
        omega=cfg.crf.omega,
    )
    return model.to(torch_dtype(cfg.train.dtype))


def lr_factor(step: int, warmup_steps: int, total_steps: int) -> float:
    """Linear warmup from zero, then cosine annealing to zero."""
    if warmup_steps > 0 and step < warmup_steps:
        return step / warmup_steps
    span = max(1, total_steps - warmup_steps)
    progress = min(1.0, (step - warmup_steps) / span)
    return 0.5 * (1.0 + math.cos(math.pi * progress))


def train_model(
    cfg: RunConfig, train_videos: list[FrameSequence]
) -> tuple[AnticipationModel, torch.optim.Optimizer, list[tuple[int, str, float]]]:
    """Runs the full optimization; returns (model, optimizer, epoch log rows)."""
    tc = cfg.train
    torch.set_num_threads(resolve_threads())
    torch.manual_seed(tc.seed)
    dtype = torch_dtype(tc.dtype)

    model = build_model(cfg, initial_transitions(cfg, train_videos))
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=tc.learning_rate, weight_decay=tc.weight_decay
    )
    n = len(train_videos)
    steps_per_epoch = math.ceil(n / tc.batch_size)
    total_steps = tc.epochs * steps_per_epoch
    warmup_steps = tc.warmup_epochs * steps_per_epoch
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: lr_factor(step, warmup_steps, total_steps)
    )

    log_rows: list[tuple[int, str, float]] = []
    alphas = list(tc.alpha_set)
    for epoch in range(tc.epochs):
        model.train()
        perm = torch.randperm(n).tolist()
        sums: dict[str, float] = {}
        count = 0
        for batch_start in range(0, n, tc.batch_size):
            batch = perm[batch_start : batch_start + tc.batch_size]
            optimizer.zero_grad()
            for vid_idx in batch:
                video = train_videos[vid_idx]
                phase = int(torch.randint(tc.sample_rate, (1,))) if tc.sample_rate > 1 else 0
                alpha = alphas[int(torch.randint(len(alphas), (1,)))]
                sub = subsample(video, tc.sample_rate, phase)
                features, targets = split_training_sample(
                    sub, alpha, cfg.decoder.num_queries, cfg.generator.num_classes, dtype
                )
                loss, breakdown, _ = total_loss(
                    model,
                    features,
                    targets,
                    lambda_smooth=tc.lambda_smooth,
                    use_crf=tc.use_crf,
                    use_bacr_fut=tc.use_bacr_fut,
                    use_bacr_past=tc.use_bacr_past,
                    use_smooth=tc.use_smooth,
                )
                breakdown["total"] = float(loss.detach())
                for term, value in breakdown.items():
                    if not math.isfinite(value):
                        raise NonFiniteLossError(term)
                    sums[term] = sums.get(term, 0.0) + value
                count += 1
                (loss / len(batch)).backward()
            nn.utils.clip_grad_norm_(model.parameters(), tc.grad_clip)
            optimizer.step()
            scheduler.step()
        for term in sorted(sums):
            log_rows.append((epoch, term, sums[term] / count))
        log_rows.append((epoch, "lr", scheduler.get_last_lr()[0]))
    return model, optimizer, log_rows


def write_epoch_log(rows: list[tuple[int, str, float]], path: Path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,term,value\n")
        for epoch, term, value in rows:
            fh.write(f"{epoch},{term},{value:.10g}\n")


def predict_future(
    model: AnticipationModel,
    observed: FrameSequence,
    use_crf: bool,
    dtype: torch.dtype,
) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Decode one observed window: (pre-EOS actions, their renormalized
    durations, encoder frame predictions over the observed window)."""
    with torch.no_grad():
        out = model(torch.as_tensor(observed.features, dtype=dtype))
        seg_pred = out.stage_logits[-1].argmax(dim=-1).cpu().numpy()
        emissions = out.decoder.a_pres.cpu().numpy()
        d_hat = out.decoder.d_hat.cpu().numpy()
    matrix = model.crf.matrix().detach().cpu().numpy()
    omega = model.crf.omega if use_crf else 0.0
    path, _ = viterbi_decode(emissions, matrix, omega)
    actions = truncate_at_eos(path, model.num_classes)
    durations = d_hat[: len(actions)]
    if len(actions) and durations.sum() > 0:
        durations = durations / durations.sum()
    return actions, durations, seg_pred


def evaluate_model(
    model: AnticipationModel,
    cfg: RunConfig,
    videos: list[FrameSequence],
    alpha_set=None,
    beta_set=None,
) -> MetricsReport:
    """Per (alpha, beta): decode the anticipated sequence over the whole
    remaining video, score its first ceil(beta*T) frames; per alpha: score
    the encoder segmentation of the observed window."""
    torch.set_num_threads(resolve_threads())
    model.eval()
    dtype = next(model.parameters()).dtype
    alphas = list(alpha_set if alpha_set is not None else cfg.eval.alpha_set)
    betas = list(beta_set if beta_set is not None else cfg.eval.beta_set)
    rate = cfg.train.sample_rate

    report = MetricsReport()
    moc_pred: dict[tuple[float, float], list[np.ndarray]] = {}
    moc_gt: dict[tuple[float, float], list[np.ndarray]] = {}
    for alpha in alphas:
        seg_pred_all, seg_gt_all, edits = [], [], []
        counts = {0.10: [0, 0, 0], 0.25: [0, 0, 0], 0.50: [0, 0, 0]}
        for video in videos:
            t = video.num_frames
            t_obs = int(np.floor(alpha * t))
            observed = subsample(
                FrameSequence(features=video.features[:t_obs], labels=video.labels[:t_obs]),
                rate,
                0,
            )
            actions, durations, seg_pred = predict_future(
                model, observed, cfg.train.use_crf, dtype
            )
            seg_pred_all.append(seg_pred)
            seg_gt_all.append(observed.labels)
            edits.append(
                edit_score(
                    frames_to_segments(seg_pred).actions,
                    frames_to_segments(observed.labels).actions,
                )
            )
            for tau in counts:
                tp, fp, fn = f1_counts(
                    segments_with_spans(seg_pred), segments_with_spans(observed.labels), tau
                )
                counts[tau][0] += tp
                counts[tau][1] += fp
                counts[tau][2] += fn

            full_track = decode_to_frames(
                actions, durations, t - t_obs, fill_label=int(video.labels[t_obs - 1])
            )
            for beta in betas:
                horizon = int(np.ceil(beta * t))
                key = (alpha, beta)
                moc_pred.setdefault(key, []).append(full_track[:horizon])
                moc_gt.setdefault(key, []).append(video.labels[t_obs : t_obs + horizon])

        report.seg_by_alpha[alpha] = {
            "seg_acc": frame_acc(np.concatenate(seg_pred_all), np.concatenate(seg_gt_all)),
            "edit": float(np.mean(edits)),
            "f1_10": f1_from_counts(*counts[0.10]),
            "f1_25": f1_from_counts(*counts[0.25]),
            "f1_50": f1_from_counts(*counts[0.50]),
        }
    for key in moc_pred:
        report.moc[key] = moc(
            np.concatenate(moc_pred[key]), np.concatenate(moc_gt[key]), model.num_classes
        )
    per_alpha = report.seg_by_alpha.values()
    for name in ("seg_acc", "edit", "f1_10", "f1_25", "f1_50"):
        setattr(report, name, float(np.mean([stats[name] for stats in per_alpha])))
    return report


def gradient_check(loss_fn, params: dict[str, torch.Tensor], eps: float = 1e-4) -> float:
    """Max relative error between autograd and central finite differences.

    ``loss_fn`` must be a deterministic closure over the given parameter
    tensors (run modules in eval mode to freeze dropout).
    """
    for p in params.values():
        if p.grad is not None:
            p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = {
        name: (p.grad.clone() if p.grad is not None else torch.zeros_like(p))
        for name, p in params.items()
    }
    worst = 0.0
    for name, p in params.items():
        flat = p.data.view(-1)
        for i in range(flat.numel()):
            original = flat[i].item()
            with torch.no_grad():
                flat[i] = original + eps
                f_plus = float(loss_fn())
                flat[i] = original - eps
                f_minus = float(loss_fn())
                flat[i] = original
            numeric = (f_plus - f_minus) / (2 * eps)
            ga = float(analytic[name].view(-1)[i])
            rel = abs(ga - numeric) / max(1.0, abs(ga) + abs(numeric))
            worst = max(worst, rel)
    return worst
