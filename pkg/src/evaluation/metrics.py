"""
Métricas - Acurácia, EER e Confusão
===================================

Convenções:
- classe positiva = bonafide; aceita-se quando score >= limiar
- FAR(t) = spoof aceitos / spoof, FRR(t) = bonafide rejeitados / bonafide
- EER no cruzamento FAR = FRR, interpolado linearmente entre os dois
  limiares vizinhos quando não há empate exato
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from core.errors import ContractError

BONAFIDE, SPOOF = 1, 0


@dataclass
class ScoreSet:
    scores: np.ndarray
    labels: np.ndarray           # 1 = bonafide, 0 = spoof
    ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.scores.shape != self.labels.shape:
            raise ContractError(f"{self.scores.size} pontuações para {self.labels.size} rótulos")
        if self.ids and len(self.ids) != self.scores.size:
            raise ContractError(f"{len(self.ids)} ids para {self.scores.size} pontuações")
        if not np.all(np.isin(self.labels, (SPOOF, BONAFIDE))):
            raise ContractError("rótulos devem ser 0 (spoof) ou 1 (bonafide)")

    @classmethod
    def from_classes(cls, bonafide: Sequence[float], spoof: Sequence[float]) -> "ScoreSet":
        scores = np.concatenate([np.asarray(bonafide, float), np.asarray(spoof, float)])
        labels = np.concatenate([np.ones(len(bonafide), int), np.zeros(len(spoof), int)])
        return cls(scores=scores, labels=labels)

    @property
    def bonafide(self) -> np.ndarray:
        return self.scores[self.labels == BONAFIDE]

    @property
    def spoof(self) -> np.ndarray:
        return self.scores[self.labels == SPOOF]

    def __len__(self):
        return self.scores.size


def error_rates(scores: ScoreSet, thresholds: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(FAR, FRR) em cada limiar."""
    bona = np.sort(scores.bonafide)
    spoof = np.sort(scores.spoof)
    rejected = np.searchsorted(bona, thresholds, side="left")          # bonafide < t
    accepted = spoof.size - np.searchsorted(spoof, thresholds, side="left")  # spoof >= t
    return accepted / spoof.size, rejected / bona.size


def eer(scores: ScoreSet) -> Tuple[float, float]:
    """(EER, limiar) varrendo todos os scores distintos."""
    if scores.bonafide.size == 0 or scores.spoof.size == 0:
        raise ContractError("EER exige ao menos um bonafide e um spoof")

    distinct = np.unique(scores.scores)
    # sentinela acima do maior score: tudo rejeitado
    thresholds = np.append(distinct, np.nextafter(distinct[-1], np.inf))
    far, frr = error_rates(scores, thresholds)
    diff = far - frr

    i = int(np.argmax(diff <= 0))
    if diff[i] == 0 or i == 0:
        return float(far[i]), float(thresholds[i])

    alpha = diff[i - 1] / (diff[i - 1] - diff[i])
    rate = far[i - 1] + alpha * (far[i] - far[i - 1])
    threshold = thresholds[i - 1] + alpha * (thresholds[i] - thresholds[i - 1])
    return float(rate), float(threshold)


def confusion(scores: ScoreSet, threshold: float) -> np.ndarray:
    """Contagens 2x2: linhas = real (bonafide, spoof), colunas = previsto."""
    predicted_bona = scores.scores >= threshold
    is_bona = scores.labels == BONAFIDE
    return np.array([
        [int(np.sum(is_bona & predicted_bona)), int(np.sum(is_bona & ~predicted_bona))],
        [int(np.sum(~is_bona & predicted_bona)), int(np.sum(~is_bona & ~predicted_bona))],
    ], dtype=np.int64)


def accuracy(scores: ScoreSet, threshold: float) -> float:
    if len(scores) == 0:
        return 0.0
    matrix = confusion(scores, threshold)
    return float((matrix[0, 0] + matrix[1, 1]) / matrix.sum())


def accuracy_argmax(logits: np.ndarray, labels: np.ndarray) -> float:
    """Acurácia da classe de maior logit (coluna 1 = bonafide; empate → spoof)."""
    logits = np.asarray(logits)
    labels = np.asarray(labels).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.size:
        raise ContractError(f"logits {logits.shape} incompatíveis com {labels.size} rótulos")
    if labels.size == 0:
        return 0.0
    return float(np.mean(logits.argmax(axis=1) == labels))
