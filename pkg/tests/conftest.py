"""Fixtures compartilhadas pelos testes do QV-Spoof."""

import numpy as np
import pytest
from loguru import logger

from audio.protocol import Split
from audio.synth import synth_dataset, write_dataset
from core.config import ModelConfig, QVConfig
from engine.tensor import default_dtype
from features.cache import FeatureCache


@pytest.fixture(autouse=True)
def quiet_logs():
    logger.remove()
    yield


@pytest.fixture
def float64():
    with default_dtype(np.float64):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_model_config(arch: str, in_channels: int = 1, input_size: int = 32, seed: int = 0,
                      **values) -> ModelConfig:
    """Configuração reduzida das quatro arquiteturas (mesma topologia, larguras pequenas)."""
    defaults = dict(
        cnn_channels=(4, 4, 8, 8, 8, 8),
        vit_layers=2,
        vit_heads=2,
        vit_embed_dim=16,
        vit_mlp_dim=32,
    )
    defaults.update(values)
    if arch.startswith("qv_") and "qv" not in defaults:
        defaults["qv"] = QVConfig(filters=4, in_channels=in_channels)
    return ModelConfig(arch=arch, in_channels=in_channels, input_size=input_size, seed=seed, **defaults)


@pytest.fixture
def separable_cache():
    """Cache 32x32x1 onde bonafide tem uma faixa horizontal brilhante."""
    gen = np.random.default_rng(7)
    n = 24
    images = gen.normal(0.0, 0.3, size=(n, 32, 32, 1)).astype(np.float32)
    labels = np.array([1, 0] * (n // 2), dtype=np.uint8)
    images[labels == 1, 12:20, :, 0] += 2.0
    return FeatureCache(images=images, labels=labels, ids=[f"utt_{i:03d}" for i in range(n)])


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """Corpus sintético pequeno gravado em disco (train + eval)."""
    root = tmp_path_factory.mktemp("synth")
    train_protocol = write_dataset(synth_dataset(4, 11, Split.TRAIN), root / "train", "protocol.txt")
    eval_protocol = write_dataset(synth_dataset(3, 11, Split.EVAL), root / "eval", "protocol.txt")
    return {"root": root, "train": train_protocol, "eval": eval_protocol}
