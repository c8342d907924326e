"""
Cache de Features - Formato QVFC
================================

Layout binário little-endian:

    "QVFC" | versão u32 | registros u64
    por registro: rótulo u8 (0 spoof, 1 bonafide) | altura u32 | largura u32 |
                  canais u32 | altura·largura·canais float32 em ordem (y, x, C)

Os ids de utterance ficam no arquivo irmão `<cache>.ids.txt`.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from loguru import logger

from core.errors import CacheFormatError, ContractError
from features.image import FeatureImage

MAGIC = b"QVFC"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")
_RECORD = struct.Struct("<BIII")

PathLike = Union[str, Path]


def ids_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".ids.txt")


def missing_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".missing.txt")


@dataclass
class FeatureCache:
    """Imagens (N, H, W, C), rótulos (1 = bonafide) e ids em memória."""
    images: np.ndarray
    labels: np.ndarray
    ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ContractError(f"cache exige imagens (N, H, W, C), recebeu {self.images.shape}")
        if len(self.labels) != len(self.images):
            raise ContractError("número de rótulos difere do número de imagens")
        if not self.ids:
            self.ids = [f"rec_{i:07d}" for i in range(len(self.images))]

    @classmethod
    def from_images(cls, images: Sequence[FeatureImage], labels: Sequence[int],
                    ids: Optional[Sequence[str]] = None) -> "FeatureCache":
        if not images:
            raise ContractError("cache vazio")
        shapes = {img.shape for img in images}
        if len(shapes) != 1:
            raise ContractError(f"imagens com formas distintas: {sorted(shapes)}")
        return cls(
            images=np.stack([img.data for img in images]).astype(np.float32),
            labels=np.asarray(labels, dtype=np.uint8),
            ids=list(ids) if ids else [],
        )

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def to_nchw(self) -> np.ndarray:
        return np.ascontiguousarray(self.images.transpose(0, 3, 1, 2))

    def __len__(self) -> int:
        return len(self.images)


def write_cache(path: PathLike, cache: FeatureCache):
    """Gravar cache QVFC + ids."""
    path = Path(path)
    with path.open("wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, len(cache)))
        for image, label in zip(cache.images, cache.labels):
            h, w, c = image.shape
            f.write(_RECORD.pack(int(label), h, w, c))
            f.write(np.ascontiguousarray(image, dtype="<f4").tobytes())
    ids_path(path).write_text("".join(f"{i}\n" for i in cache.ids), encoding="utf-8")
    logger.info(f"💾 cache {path.name}: {len(cache)} registros {cache.image_shape}")


def read_cache(path: PathLike) -> FeatureCache:
    """Ler cache QVFC (ids do arquivo irmão, se existir)."""
    path = Path(path)
    if not path.exists():
        raise CacheFormatError(f"cache não encontrado: {path}")

    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise CacheFormatError(f"{path}: cabeçalho truncado")
    magic, version, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise CacheFormatError(f"{path}: assinatura {magic!r} != {MAGIC!r}")
    if version != VERSION:
        raise CacheFormatError(f"{path}: versão {version} não suportada")

    offset = _HEADER.size
    images, labels = [], []
    for index in range(count):
        if offset + _RECORD.size > len(blob):
            raise CacheFormatError(f"{path}: registro {index} truncado")
        label, h, w, c = _RECORD.unpack_from(blob, offset)
        offset += _RECORD.size
        n_values = h * w * c
        end = offset + 4 * n_values
        if end > len(blob):
            raise CacheFormatError(f"{path}: valores do registro {index} truncados")
        if label not in (0, 1):
            raise CacheFormatError(f"{path}: rótulo {label} inválido no registro {index}")
        images.append(np.frombuffer(blob, dtype="<f4", count=n_values, offset=offset).reshape(h, w, c))
        labels.append(label)
        offset = end

    if not images:
        raise CacheFormatError(f"{path}: cache sem registros")
    if len({img.shape for img in images}) != 1:
        raise CacheFormatError(f"{path}: registros com formas distintas")

    ids: List[str] = []
    if ids_path(path).exists():
        ids = ids_path(path).read_text(encoding="utf-8").split()
        if len(ids) != count:
            logger.warning(f"⚠️ {ids_path(path).name}: {len(ids)} ids para {count} registros, ignorando")
            ids = []

    return FeatureCache(images=np.stack(images).astype(np.float32), labels=np.asarray(labels, dtype=np.uint8), ids=ids)
