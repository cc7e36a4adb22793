import dataclasses
import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from tcca.config import (
    CrfConfig,
    EvalConfig,
    GeneratorConfig,
    RunConfig,
    TrainConfig,
)
from tcca.decoder import DecoderConfig
from tcca.encoder import EncoderConfig


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture
def tiny_config() -> RunConfig:
    """Small everything: seconds-scale training for CLI and loop tests."""
    return RunConfig(
        generator=GeneratorConfig(
            num_classes=4,
            feature_dim=6,
            noise_sigma=0.2,
            min_segments=3,
            max_segments=4,
            seed=11,
            n_train=6,
            n_test=3,
            duration_params=[[6.0, 1.0]] * 4,
        ),
        encoder=EncoderConfig(stages=2, layers_per_stage=1, attention_heads=2, hidden_dim=8, local_window=4, global_stride=2, dropout=0.0),
        decoder=DecoderConfig(num_queries=4, layers=1, attention_heads=2, hidden_dim=16, dropout=0.0),
        crf=CrfConfig(omega=1.0, init_mode="random"),
        train=TrainConfig(
            epochs=2,
            batch_size=3,
            warmup_epochs=1,
            sample_rate=2,
            alpha_set=(0.3, 0.5),
            seed=3,
        ),
        eval=EvalConfig(alpha_set=(0.3,), beta_set=(0.2,)),
    )


def grad_check_model_config() -> RunConfig:
    """Gradient-check scale: D=3, C=3, tiny encoder/decoder, no dropout."""
    return RunConfig(
        generator=GeneratorConfig(num_classes=3, feature_dim=3),
        encoder=EncoderConfig(stages=2, layers_per_stage=1, attention_heads=2, hidden_dim=4, local_window=4, global_stride=2, dropout=0.0),
        decoder=DecoderConfig(num_queries=4, layers=1, attention_heads=2, hidden_dim=8, dropout=0.0),
        crf=CrfConfig(omega=0.8),
        train=TrainConfig(),
    )


def replace(cfg, **kwargs):
    return dataclasses.replace(cfg, **kwargs)
