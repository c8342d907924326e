"""
Relatório de Avaliação
======================

EvalReport em JSON (chaves estáveis), confusão em CSV
`actual,predicted,count` e figura PNG da matriz de confusão.
"""

import csv
import json
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from loguru import logger
from PIL import Image, ImageDraw
from pydantic import BaseModel, Field, model_validator

from core.errors import DataError
from evaluation.metrics import ScoreSet, accuracy, accuracy_argmax, confusion, eer

CLASS_NAMES = ("bonafide", "spoof")
PathLike = Union[str, Path]


class EvalReport(BaseModel):
    accuracy_argmax: float = Field(ge=0, le=1)
    accuracy_at_eer: float = Field(ge=0, le=1)
    eer: float = Field(ge=0, le=1)
    eer_threshold: float
    confusion: List[List[int]]
    n_bonafide: int
    n_spoof: int

    @model_validator(mode="after")
    def _check(self):
        if sum(map(sum, self.confusion)) != self.n_bonafide + self.n_spoof:
            raise ValueError("confusão não soma o número de trials")
        return self

    def to_json(self) -> str:
        return json.dumps(self.model_dump(), indent=2)


def build_report(scores: ScoreSet, logits: Optional[np.ndarray] = None) -> EvalReport:
    """Preencher todos os campos; sem logits, acurácia argmax usa score >= 0."""
    rate, threshold = eer(scores)
    matrix = confusion(scores, threshold)
    if logits is not None:
        argmax_acc = accuracy_argmax(logits, scores.labels)
    else:
        argmax_acc = accuracy(scores, 0.0)
    return EvalReport(
        accuracy_argmax=argmax_acc,
        accuracy_at_eer=accuracy(scores, threshold),
        eer=rate,
        eer_threshold=threshold,
        confusion=matrix.tolist(),
        n_bonafide=int(scores.bonafide.size),
        n_spoof=int(scores.spoof.size),
    )


def write_report(report: EvalReport, path: PathLike):
    path = Path(path)
    try:
        path.write_text(report.to_json() + "\n", encoding="utf-8")
    except OSError as e:
        raise DataError(f"falha ao gravar relatório {path}: {e}") from e


def read_report(path: PathLike) -> EvalReport:
    return EvalReport.model_validate_json(Path(path).read_text(encoding="utf-8"))


def write_confusion_csv(matrix: Union[np.ndarray, List[List[int]]], path: PathLike):
    matrix = np.asarray(matrix)
    try:
        with Path(path).open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["actual", "predicted", "count"])
            for i, actual in enumerate(CLASS_NAMES):
                for j, predicted in enumerate(CLASS_NAMES):
                    writer.writerow([actual, predicted, int(matrix[i, j])])
    except OSError as e:
        raise DataError(f"falha ao gravar {path}: {e}") from e


def render_confusion(matrix: Union[np.ndarray, List[List[int]]], path: PathLike, cell: int = 120):
    """Matriz de confusão em PNG: linhas normalizadas, tom azul por fração."""
    matrix = np.asarray(matrix, dtype=np.float64)
    margin = cell // 2
    size = margin + 2 * cell
    image = Image.new("RGB", (size, size), "white")
    draw = ImageDraw.Draw(image)

    row_totals = matrix.sum(axis=1, keepdims=True)
    fractions = np.divide(matrix, row_totals, out=np.zeros_like(matrix), where=row_totals > 0)
    for i in range(2):
        for j in range(2):
            shade = int(round(255 * (1.0 - fractions[i, j])))
            x0, y0 = margin + j * cell, margin + i * cell
            draw.rectangle([x0, y0, x0 + cell - 1, y0 + cell - 1], fill=(shade, shade, 255), outline="black")
            ink = "white" if fractions[i, j] > 0.5 else "black"
            draw.text((x0 + cell // 3, y0 + cell // 2 - 6), f"{int(matrix[i, j])}", fill=ink)
        draw.text((4, margin + i * cell + cell // 2 - 6), CLASS_NAMES[i][:5], fill="black")
        draw.text((margin + i * cell + cell // 3, 4), CLASS_NAMES[i][:5], fill="black")

    try:
        image.save(path, format="PNG")
    except OSError as e:
        raise DataError(f"falha ao gravar {path}: {e}") from e
    logger.debug(f"🖼️ matriz de confusão gravada em {path}")
