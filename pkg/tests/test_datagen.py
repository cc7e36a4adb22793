import numpy as np
import pytest

from tcca.config import GeneratorConfig
from tcca.core import frames_to_segments
from tcca.datagen import (
    GeneratorSpec,
    load_split,
    manifest_hash,
    orthogonalish_embeddings,
    sample_dataset,
    sample_video,
    write_dataset,
)


def small_spec(**overrides) -> GeneratorSpec:
    base = dict(
        num_classes=2,
        gt_transitions=np.array([[0.0, 1.0], [1.0, 0.0]]),
        duration_params=((3.0, 0.5), (4.0, 0.5)),
        feature_dim=4,
        noise_sigma=0.1,
        class_embeddings=orthogonalish_embeddings(2, 4, seed=0),
        min_segments=4,
        max_segments=6,
        seed=5,
    )
    base.update(overrides)
    return GeneratorSpec(**base)


class TestSampleVideo:
    def test_forced_chain_alternates(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            video = sample_video(small_spec(), rng)
            actions = frames_to_segments(video.labels).actions
            assert all(a != b for a, b in zip(actions, actions[1:]))
            assert set(np.diff(actions) % 2) == {1}  # strict 0/1 alternation

    def test_zero_noise_gives_exact_embeddings(self):
        spec = small_spec(noise_sigma=0.0)
        video = sample_video(spec, np.random.default_rng(1))
        expected = spec.class_embeddings[video.labels].astype(np.float32)
        assert np.array_equal(video.features, expected)

    def test_empirical_transitions_match_generator(self):
        cfg = GeneratorConfig(min_segments=35, max_segments=40, duration_params=[[2.0, 0.1]] * 8)
        spec = cfg.to_spec()
        rng = np.random.default_rng(2)
        counts = np.zeros((8, 8))
        total = 0
        while total < 10000:
            actions = frames_to_segments(sample_video(spec, rng).labels).actions
            for a, b in zip(actions, actions[1:]):
                counts[a, b] += 1
                total += 1
        rows = counts / counts.sum(axis=1, keepdims=True)
        l1 = np.abs(rows - spec.gt_transitions).sum(axis=1)
        assert l1.max() < 0.05

    def test_duration_means_within_ten_percent(self):
        spec = GeneratorConfig().to_spec()
        rng = np.random.default_rng(3)
        sums = np.zeros(8)
        counts = np.zeros(8)
        while counts.sum() < 2000:
            seq = frames_to_segments(sample_video(spec, rng).labels)
            for a, d in zip(seq.actions, seq.durations):
                sums[a] += d
                counts[a] += 1
        means = np.array([m for m, _ in spec.duration_params])
        assert (counts > 0).all()
        assert (np.abs(sums / counts - means) / means < 0.10).all()

    def test_spec_validation(self):
        with pytest.raises(ValueError, match="diagonal"):
            small_spec(gt_transitions=np.array([[0.5, 0.5], [1.0, 0.0]]))
        with pytest.raises(ValueError, match="sum to 1"):
            small_spec(gt_transitions=np.array([[0.0, 0.9], [1.0, 0.0]]))
        with pytest.raises(ValueError, match=">= 2 frames"):
            small_spec(duration_params=((1.0, 0.5), (4.0, 0.5)))


class TestSampleDataset:
    def test_determinism(self):
        spec = small_spec()
        a_train, a_test = sample_dataset(spec, 3, 2)
        b_train, b_test = sample_dataset(spec, 3, 2)
        for a, b in zip(a_train + a_test, b_train + b_test):
            assert np.array_equal(a.features, b.features)
            assert np.array_equal(a.labels, b.labels)

    def test_seeds_differ(self):
        a, _ = sample_dataset(small_spec(seed=1), 2, 1)
        b, _ = sample_dataset(small_spec(seed=2), 2, 1)
        assert any(
            x.labels.shape != y.labels.shape or not np.array_equal(x.labels, y.labels)
            for x, y in zip(a, b)
        )

    def test_splits_use_disjoint_streams(self):
        train, test = sample_dataset(small_spec(), 2, 2)
        assert not np.array_equal(train[0].features[:4], test[0].features[:4])


class TestDatasetFiles:
    def test_write_and_reload(self, tmp_path):
        spec = small_spec()
        train, test = sample_dataset(spec, 3, 2)
        digest = write_dataset(tmp_path, spec, train, test)
        assert digest == manifest_hash(tmp_path)
        reloaded = load_split(tmp_path, "train")
        assert len(reloaded) == 3
        assert np.array_equal(reloaded[1].labels, train[1].labels)
        assert np.allclose(reloaded[1].features, train[1].features)

    def test_manifest_hash_deterministic(self, tmp_path):
        spec = small_spec()
        train, test = sample_dataset(spec, 2, 1)
        d1 = write_dataset(tmp_path / "a", spec, train, test)
        d2 = write_dataset(tmp_path / "b", spec, train, test)
        assert d1 == d2


# Frozen fingerprint of the default acceptance dataset (regenerate with
# tests/freeze_fixture.py if the generator defaults ever change).
DEFAULT_FIXTURE_HASH = "__FIXTURE_HASH__"


def test_default_fixture_hash(tmp_path):
    cfg = GeneratorConfig()
    spec = cfg.to_spec()
    train, test = sample_dataset(spec, cfg.n_train, cfg.n_test)
    assert len(train) == 300 and len(test) == 60
    mean_frames = np.mean([v.num_frames for v in train])
    assert 150 <= mean_frames <= 260  # T around 200
    digest = write_dataset(tmp_path, spec, train, test)
    assert digest == DEFAULT_FIXTURE_HASH
