"""
FeatureImage - Grade Tempo-Frequência
=====================================

Imagem I(y, x, C) produzida pelo front-end e consumida pelos modelos.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from core.errors import ContractError


class FeatureKind(str, Enum):
    STFT = "stft"
    MEL = "mel"
    MFCC = "mfcc"
    GENERIC = "generic"


@dataclass(frozen=True)
class FeatureImage:
    """Grade (linha y, coluna x, canal C) de valores finitos."""
    data: np.ndarray
    kind: FeatureKind = FeatureKind.GENERIC

    def __post_init__(self):
        data = self.data
        if data.ndim == 2:
            data = data[:, :, np.newaxis]
            object.__setattr__(self, "data", data)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ContractError(f"FeatureImage exige forma (H, W, C) não vazia, recebeu {self.data.shape}")
        if not np.all(np.isfinite(data)):
            raise ContractError("FeatureImage com valores não finitos")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def to_chw(self) -> np.ndarray:
        """Layout (C, H, W) esperado pelos modelos."""
        return np.ascontiguousarray(self.data.transpose(2, 0, 1))


def resize_bilinear(img: FeatureImage, out_h: int, out_w: int) -> FeatureImage:
    """Interpolação bilinear com cantos alinhados, canal a canal."""
    if out_h < 1 or out_w < 1:
        raise ContractError(f"dimensões de saída inválidas: {out_h}x{out_w}")
    rows = np.linspace(0.0, img.height - 1, out_h)
    cols = np.linspace(0.0, img.width - 1, out_w)
    grid = np.meshgrid(rows, cols, indexing="ij")

    channels = [
        ndimage.map_coordinates(img.data[:, :, c].astype(np.float64), grid, order=1, mode="nearest")
        for c in range(img.channels)
    ]
    return FeatureImage(data=np.stack(channels, axis=-1), kind=img.kind)
