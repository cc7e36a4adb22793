"""Shared domain types, label-track conversions and window arithmetic.

Label conventions used across the package:

* frame tracks hold action ids in ``[0, C)``; the end-of-sequence marker
  never appears in a frame track,
* the decoder/CRF label space has ``C + 1`` entries, with id ``C``
  reserved for end-of-sequence.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FEATURE_MAGIC_BYTES = 8  # u32 frame count + u32 feature dim, little endian


def eos_id(num_classes: int) -> int:
    """Id of the end-of-sequence label for a ``num_classes``-way label set."""
    return num_classes


@dataclass(frozen=True)
class FrameSequence:
    """Per-frame feature vectors plus per-frame action labels for one video."""

    features: np.ndarray  # (T, D) float
    labels: np.ndarray  # (T,) int

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a T x D matrix")
        if self.labels.ndim != 1 or len(self.labels) != self.features.shape[0]:
            raise ValueError("labels length must match feature rows")
        if len(self.labels) and self.labels.min() < 0:
            raise ValueError("negative action label")

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SegmentSequence:
    """Ordered (action, duration) pairs: the segment-level view of a track."""

    actions: tuple[int, ...]
    durations: tuple[int, ...]

    def __post_init__(self):
        if len(self.actions) != len(self.durations):
            raise ValueError("actions and durations must have equal length")
        if len(self.actions) == 0:
            raise ValueError("empty segment sequence")
        if any(d <= 0 for d in self.durations):
            raise ValueError("zero-length segment")
        if any(a == b for a, b in zip(self.actions, self.actions[1:])):
            raise ValueError("consecutive segments share a label")

    @property
    def num_segments(self) -> int:
        return len(self.actions)

    @property
    def total_frames(self) -> int:
        return int(sum(self.durations))


@dataclass(frozen=True)
class WindowSpec:
    """Observation/prediction split ratios for a video of ``total_frames``."""

    alpha: float
    beta: float
    total_frames: int

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0) or not (0.0 < self.beta <= 1.0 - self.alpha):
            raise ValueError("invalid window")
        if self.observed_frames < 1 or self.observed_frames + self.future_frames > self.total_frames:
            raise ValueError("invalid window")

    @property
    def observed_frames(self) -> int:
        # floor for observation, ceil for prediction: guarantees at least
        # one future frame whenever beta > 0.
        return int(np.floor(self.alpha * self.total_frames))

    @property
    def future_frames(self) -> int:
        return int(np.ceil(self.beta * self.total_frames))


def frames_to_segments(labels: np.ndarray) -> SegmentSequence:
    """Run-length encode a frame label track."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty label track")
    boundaries = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [labels.size]))
    return SegmentSequence(
        actions=tuple(int(labels[s]) for s in starts),
        durations=tuple(int(e - s) for s, e in zip(starts, ends)),
    )


def segments_to_frames(seq: SegmentSequence) -> np.ndarray:
    """Expand (action, duration) pairs back into a frame label track."""
    return np.repeat(np.asarray(seq.actions, dtype=np.int64), np.asarray(seq.durations))


def split_windows(
    sample: FrameSequence, spec: WindowSpec
) -> tuple[FrameSequence, SegmentSequence, np.ndarray]:
    """Split a video into observed frames and the future prediction window.

    Returns the observed ``FrameSequence``, the future ``SegmentSequence``
    (a segment straddling either boundary is truncated at the boundary) and
    the raw future frame track.
    """
    if spec.total_frames != sample.num_frames:
        raise ValueError("invalid window")
    t_obs = spec.observed_frames
    t_fut = spec.future_frames
    observed = FrameSequence(
        features=sample.features[:t_obs], labels=sample.labels[:t_obs]
    )
    future_track = sample.labels[t_obs : t_obs + t_fut]
    return observed, frames_to_segments(future_track), future_track


def save_frame_sequence(sample: FrameSequence, features_path: Path, labels_path: Path) -> None:
    """Write one video: f32-LE feature binary with (T, D) header + label sidecar."""
    t, d = sample.features.shape
    with open(features_path, "wb") as fh:
        fh.write(struct.pack("<II", t, d))
        fh.write(np.ascontiguousarray(sample.features, dtype="<f4").tobytes())
    with open(labels_path, "w") as fh:
        fh.write("\n".join(str(int(v)) for v in sample.labels))
        fh.write("\n")


def load_frame_sequence(features_path: Path, labels_path: Path) -> FrameSequence:
    with open(features_path, "rb") as fh:
        header = fh.read(FEATURE_MAGIC_BYTES)
        t, d = struct.unpack("<II", header)
        features = np.frombuffer(fh.read(), dtype="<f4").reshape(t, d).copy()
    labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
    return FrameSequence(features=features, labels=labels)
