"""
Treino - Cross-Entropy + Adam
=============================

Mini-batches embaralhados por época com semente fixa, histórico por
época (CSV `epoch,loss,acc,seconds[,val_loss,val_acc]`) e checkpoint
QVCK ao final.
"""

import csv
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from tqdm import tqdm

from core.config import TrainConfig
from core.errors import DataError, NumericError
from engine import functional as F
from engine.checkpoint import save_checkpoint
from engine.module import Module
from engine.optim import Adam
from engine.tensor import Tensor, get_default_dtype, no_grad
from features.cache import FeatureCache

EVAL_BATCH = 256


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    acc: float
    seconds: float
    val_loss: Optional[float] = None
    val_acc: Optional[float] = None


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.records]

    def has_validation(self) -> bool:
        return any(r.val_loss is not None for r in self.records)

    def to_csv(self, path: Union[str, Path]):
        columns = ["epoch", "loss", "acc", "seconds"]
        if self.has_validation():
            columns += ["val_loss", "val_acc"]
        with Path(path).open("w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for record in self.records:
                writer.writerow({k: _fmt(v) for k, v in asdict(record).items()})

    def __len__(self):
        return len(self.records)


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.8g}"
    return value


def batch_indices(n: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Permutação em lotes; um lote final de tamanho 1 é anexado ao anterior."""
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def _inputs(cache: FeatureCache) -> np.ndarray:
    return cache.to_nchw().astype(get_default_dtype())


def _check_classes(labels: np.ndarray):
    present = set(np.unique(labels).tolist())
    if present != {0, 1}:
        raise DataError(
            f"treino exige bonafide e spoof; classes presentes: {sorted(present)} "
            f"(contagens {np.bincount(labels, minlength=2).tolist()})"
        )


def evaluate_loss(model: Module, cache: FeatureCache) -> Tuple[float, float]:
    """(loss médio, acurácia argmax) em modo avaliação, sem gravar grafo."""
    x_all, labels = _inputs(cache), cache.labels.astype(np.int64)
    total, correct = 0.0, 0
    model.eval()
    with no_grad():
        for start in range(0, len(labels), EVAL_BATCH):
            sl = slice(start, start + EVAL_BATCH)
            logits = model(Tensor(x_all[sl]))
            total += F.cross_entropy(logits, labels[sl]).item() * len(labels[sl])
            correct += int((logits.data.argmax(axis=1) == labels[sl]).sum())
    return total / len(labels), correct / len(labels)


def train(model: Module, cache: FeatureCache, tcfg: TrainConfig,
          checkpoint_path: Optional[Union[str, Path]] = None,
          config: Optional[Dict[str, Any]] = None,
          val_cache: Optional[FeatureCache] = None,
          progress: bool = False) -> Tuple[Optional[Path], TrainHistory]:
    """Treinar `model` sobre o cache; grava o checkpoint se `checkpoint_path` for dado."""
    if len(cache) == 0:
        raise DataError("cache de treino vazio")
    labels = cache.labels.astype(np.int64)
    _check_classes(labels)

    x_all = _inputs(cache)
    weights = F.class_balance_weights(labels) if tcfg.class_weighting else None
    optimizer = Adam(model.parameters(), lr=tcfg.lr)
    rng = np.random.default_rng(tcfg.seed)
    history = TrainHistory()

    logger.info(
        f"🚀 treino: {len(cache)} exemplos, batch {tcfg.batch_size}, {tcfg.epochs} épocas, lr {tcfg.lr:g}"
    )
    epochs = tqdm(range(1, tcfg.epochs + 1), desc="treino", unit="época", disable=not progress)
    for epoch in epochs:
        model.train()
        start = time.perf_counter()
        total_loss, correct = 0.0, 0

        for idx in batch_indices(len(labels), tcfg.batch_size, rng):
            logits = model(Tensor(x_all[idx]))
            loss = F.cross_entropy(logits, labels[idx], weights)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"loss não finito na época {epoch}: {value}")
            loss.backward()
            optimizer.step()
            total_loss += value * len(idx)
            correct += int((logits.data.argmax(axis=1) == labels[idx]).sum())

        record = EpochRecord(
            epoch=epoch,
            loss=total_loss / len(labels),
            acc=correct / len(labels),
            seconds=time.perf_counter() - start,
        )
        if val_cache is not None:
            record.val_loss, record.val_acc = evaluate_loss(model, val_cache)
        history.records.append(record)
        epochs.set_postfix(loss=f"{record.loss:.4f}", acc=f"{record.acc:.3f}")
        logger.debug(f"época {epoch}: loss {record.loss:.4f} acc {record.acc:.3f} ({record.seconds:.1f}s)")

    model.eval()
    saved = None
    if checkpoint_path is not None:
        saved = Path(checkpoint_path)
        save_checkpoint(saved, model.state_dict(), config or {})
    logger.info(f"✅ treino concluído: loss final {history.losses[-1]:.4f}")
    return saved, history
