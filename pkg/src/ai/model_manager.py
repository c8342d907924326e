"""
Model Manager - Checkpoints e Pontuação
=======================================

Carrega modelos a partir de checkpoints QVCK e produz uma pontuação
por utterance: score = logit(bonafide) - logit(spoof).
"""

from pathlib import Path
from typing import Optional, Union

import numpy as np
from loguru import logger

from ai.factory import ARCH_LABELS, build_model
from core.config import ModelConfig
from core.errors import CheckpointFormatError, NumericError, ShapeError
from engine.checkpoint import load_checkpoint
from engine.module import Module
from engine.tensor import Tensor, get_default_dtype, no_grad

SCORE_BATCH = 256


def logits_of(model: Module, images: np.ndarray, batch_size: int = SCORE_BATCH) -> np.ndarray:
    """Logits (N, 2) em modo avaliação para imagens (N, C, H, W)."""
    model.eval()
    chunks = []
    with no_grad():
        for start in range(0, len(images), batch_size):
            batch = images[start:start + batch_size].astype(get_default_dtype())
            chunks.append(model(Tensor(batch)).data)
    logits = np.concatenate(chunks) if chunks else np.zeros((0, 2))
    if not np.all(np.isfinite(logits)):
        raise NumericError("logits não finitos")
    return logits


def score(model: Module, images: np.ndarray, batch_size: int = SCORE_BATCH) -> np.ndarray:
    """Um real por utterance; maior ⇒ mais bonafide."""
    logits = logits_of(model, images, batch_size)
    scores = (logits[:, 1] - logits[:, 0]).astype(np.float64)
    if not np.all(np.isfinite(scores)):
        raise NumericError("pontuações não finitas")
    return scores


class ModelManager:
    """Gerenciador de um modelo treinado (leitura concorrente segura em eval)."""

    def __init__(self):
        self.model: Optional[Module] = None
        self.model_config: Optional[ModelConfig] = None

    @property
    def is_loaded(self) -> bool:
        return self.model is not None

    def load(self, path: Union[str, Path]) -> Module:
        """Reconstruir o modelo do checkpoint e carregar os pesos."""
        config, state = load_checkpoint(path)
        if "model" not in config:
            raise CheckpointFormatError(f"{path}: config sem a seção 'model'")
        self.model_config = ModelConfig.model_validate(config["model"])
        model = build_model(self.model_config)
        model.load_state_dict(state)
        self.model = model.eval()
        logger.info(f"✅ {ARCH_LABELS[self.model_config.arch]} carregado de {Path(path).name}")
        return self.model

    def expected_shape(self):
        cfg = self.model_config
        return (cfg.in_channels, cfg.input_size, cfg.input_size)

    def check_input(self, images: np.ndarray):
        if not self.is_loaded:
            raise CheckpointFormatError("nenhum modelo carregado")
        if images.shape[1:] != self.expected_shape():
            raise ShapeError(
                f"features {images.shape[1:]} incompatíveis com o checkpoint "
                f"({self.model_config.arch}, espera {self.expected_shape()})"
            )

    def score(self, images: np.ndarray) -> np.ndarray:
        self.check_input(images)
        return score(self.model, images)

    def logits(self, images: np.ndarray) -> np.ndarray:
        self.check_input(images)
        return logits_of(self.model, images)

    def cleanup(self):
        self.model = None
        self.model_config = None
