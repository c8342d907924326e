"""
Checkpoint - Formato QVCK
=========================

Layout little-endian:

    "QVCK" | versão u32 | tamanho u32 + config JSON UTF-8 | entradas u32
    por entrada: tamanho u32 + nome UTF-8 | rank u32 | dims u32... | float32

Entradas cobrem parâmetros e buffers (estatísticas do batch_norm).
"""

import json
import math
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np
from loguru import logger

from core.errors import CheckpointFormatError

MAGIC = b"QVCK"
VERSION = 1
_U32 = struct.Struct("<I")

PathLike = Union[str, Path]


def save_checkpoint(path: PathLike, state: Mapping[str, np.ndarray], config: Dict[str, Any]):
    path = Path(path)
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(_U32.pack(VERSION))
        f.write(_U32.pack(len(blob)))
        f.write(blob)
        f.write(_U32.pack(len(state)))
        for name, values in state.items():
            encoded = name.encode("utf-8")
            values = np.asarray(values)
            f.write(_U32.pack(len(encoded)))
            f.write(encoded)
            f.write(_U32.pack(values.ndim))
            for dim in values.shape:
                f.write(_U32.pack(dim))
            f.write(np.ascontiguousarray(values, dtype="<f4").tobytes())
    logger.info(f"💾 checkpoint {path.name}: {len(state)} tensores")


class _Reader:
    def __init__(self, blob: bytes, path: Path):
        self.blob, self.path, self.offset = blob, path, 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.blob):
            raise CheckpointFormatError(f"{self.path}: {what} truncado")
        chunk = self.blob[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def load_checkpoint(path: PathLike) -> Tuple[Dict[str, Any], "OrderedDict[str, np.ndarray]"]:
    """Ler (config, estado) de um arquivo QVCK."""
    path = Path(path)
    if not path.exists():
        raise CheckpointFormatError(f"checkpoint não encontrado: {path}")
    reader = _Reader(path.read_bytes(), path)

    magic = reader.take(4, "assinatura")
    if magic != MAGIC:
        raise CheckpointFormatError(f"{path}: assinatura {magic!r} != {MAGIC!r}")
    version = reader.u32("versão")
    if version != VERSION:
        raise CheckpointFormatError(f"{path}: versão {version} não suportada")

    try:
        config = json.loads(reader.take(reader.u32("config"), "config").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"{path}: config ilegível ({e})") from e

    state: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for index in range(reader.u32("contagem")):
        try:
            name = reader.take(reader.u32("nome"), f"nome da entrada {index}").decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointFormatError(f"{path}: nome da entrada {index} ilegível") from e
        rank = reader.u32(f"rank de {name}")
        shape = tuple(reader.u32(f"dims de {name}") for _ in range(rank))
        count = math.prod(shape)
        raw = reader.take(4 * count, f"valores de {name}")
        state[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)

    if reader.offset != len(reader.blob):
        raise CheckpointFormatError(f"{path}: {len(reader.blob) - reader.offset} bytes sobrando")
    return config, state
