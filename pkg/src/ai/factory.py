"""
Construção dos classificadores a partir de um ModelConfig.
"""

import numpy as np
from loguru import logger

from ai.cnn import ConvClassifier
from ai.vit import VisionTransformer
from core.config import ModelConfig
from engine.module import Module

ARCH_LABELS = {"cnn": "CNN", "qv_cnn": "QV-CNN", "vit": "ViT", "qv_vit": "QV-ViT"}


def build_model(cfg: ModelConfig) -> Module:
    """Modelo com inicialização determinística a partir de `cfg.seed`."""
    rng = np.random.default_rng(cfg.seed)
    if cfg.arch in ("cnn", "qv_cnn"):
        model: Module = ConvClassifier(cfg, rng)
    else:
        model = VisionTransformer(cfg, rng)
    model.bind_names()
    logger.debug(f"🧠 {ARCH_LABELS[cfg.arch]} construído: {model.num_parameters():,} parâmetros")
    return model
