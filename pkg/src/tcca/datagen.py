"""Synthetic Markov-grammar video generator with known transition structure.

Videos are chains of action segments: the first action is uniform, each
following action is drawn from a row-stochastic transition matrix with zero
diagonal, segment durations are per-class Gaussians (floored at 2 frames)
and every frame feature is its class embedding plus isotropic noise. The
generating matrix is stored in the dataset manifest so that transition
recovery can be checked after training.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FrameSequence, load_frame_sequence, save_frame_sequence

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class GeneratorSpec:
    num_classes: int
    gt_transitions: np.ndarray  # (C, C) row-stochastic, zero diagonal
    duration_params: tuple[tuple[float, float], ...]  # per-class (mean, std) frames
    feature_dim: int
    noise_sigma: float
    class_embeddings: np.ndarray  # (C, D)
    min_segments: int
    max_segments: int
    seed: int

    def __post_init__(self):
        c, d = self.num_classes, self.feature_dim
        if self.gt_transitions.shape != (c, c):
            raise ValueError("gt_transitions must be C x C")
        if not np.allclose(self.gt_transitions.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("gt_transitions rows must sum to 1")
        if np.any(np.abs(np.diag(self.gt_transitions)) > 0):
            raise ValueError("gt_transitions diagonal must be 0")
        if len(self.duration_params) != c:
            raise ValueError("duration_params must have one (mean, std) per class")
        if any(mean < 2 for mean, _ in self.duration_params):
            raise ValueError("duration means must be >= 2 frames")
        if self.class_embeddings.shape != (c, d):
            raise ValueError("class_embeddings must be C x D")
        if not (1 <= self.min_segments <= self.max_segments):
            raise ValueError("invalid segment count range")


def orthogonalish_embeddings(num_classes: int, feature_dim: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """Deterministic near-orthogonal class embeddings (QR of a Gaussian draw)."""
    if feature_dim < num_classes:
        raise ValueError("feature_dim must be >= num_classes for orthogonal rows")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    q, _ = np.linalg.qr(rng.standard_normal((feature_dim, num_classes)))
    return scale * q.T.copy()


def sample_video(spec: GeneratorSpec, rng: np.random.Generator) -> FrameSequence:
    n_seg = int(rng.integers(spec.min_segments, spec.max_segments + 1))
    actions = np.empty(n_seg, dtype=np.int64)
    actions[0] = rng.integers(spec.num_classes)
    for i in range(1, n_seg):
        actions[i] = rng.choice(spec.num_classes, p=spec.gt_transitions[actions[i - 1]])
    means = np.array([spec.duration_params[a][0] for a in actions])
    stds = np.array([spec.duration_params[a][1] for a in actions])
    durations = np.maximum(2, np.rint(rng.normal(means, stds)).astype(np.int64))
    labels = np.repeat(actions, durations)
    features = spec.class_embeddings[labels] + rng.normal(
        0.0, spec.noise_sigma, size=(labels.size, spec.feature_dim)
    )
    return FrameSequence(features=features.astype(np.float32), labels=labels)


def sample_dataset(
    spec: GeneratorSpec, n_train: int, n_test: int
) -> tuple[list[FrameSequence], list[FrameSequence]]:
    """Deterministic (spec, seed) -> dataset; one child RNG stream per video."""
    if n_train < 1 or n_test < 1:
        raise ValueError("need at least one video per split")
    train_ss, test_ss = np.random.SeedSequence(spec.seed).spawn(2)
    train = [sample_video(spec, np.random.default_rng(ss)) for ss in train_ss.spawn(n_train)]
    test = [sample_video(spec, np.random.default_rng(ss)) for ss in test_ss.spawn(n_test)]
    return train, test


def write_dataset(
    out_dir: Path,
    spec: GeneratorSpec,
    train: list[FrameSequence],
    test: list[FrameSequence],
) -> str:
    """Write per-video files plus the JSON manifest; returns the manifest hash."""
    out_dir = Path(out_dir)
    (out_dir / "videos").mkdir(parents=True, exist_ok=True)
    splits = {}
    for split_name, videos in (("train", train), ("test", test)):
        entries = []
        for i, video in enumerate(videos):
            stem = f"videos/{split_name}_{i:04d}"
            save_frame_sequence(video, out_dir / f"{stem}.feat.bin", out_dir / f"{stem}.labels.txt")
            entries.append({"features": f"{stem}.feat.bin", "labels": f"{stem}.labels.txt"})
        splits[split_name] = entries
    manifest = {
        "class_count": spec.num_classes,
        "feature_dim": spec.feature_dim,
        "gt_transitions": [float(v) for v in spec.gt_transitions.reshape(-1)],
        "seed": spec.seed,
        "splits": splits,
    }
    payload = json.dumps(manifest, sort_keys=True, indent=1) + "\n"
    (out_dir / MANIFEST_NAME).write_text(payload)
    return hashlib.sha256(payload.encode()).hexdigest()


def manifest_hash(data_dir: Path) -> str:
    return hashlib.sha256((Path(data_dir) / MANIFEST_NAME).read_bytes()).hexdigest()


def load_manifest(data_dir: Path) -> dict:
    return json.loads((Path(data_dir) / MANIFEST_NAME).read_text())


def load_split(data_dir: Path, split: str) -> list[FrameSequence]:
    data_dir = Path(data_dir)
    manifest = load_manifest(data_dir)
    return [
        load_frame_sequence(data_dir / entry["features"], data_dir / entry["labels"])
        for entry in manifest["splits"][split]
    ]


def gt_transitions_from_manifest(manifest: dict) -> np.ndarray:
    c = manifest["class_count"]
    return np.asarray(manifest["gt_transitions"], dtype=np.float64).reshape(c, c)
