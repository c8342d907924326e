"""
Renderização das Ondas de Informação
====================================

Cada mapa é normalizado min-max para [0, 255] e gravado como PGM
binário (P5) de 8 bits. Mapas constantes viram cinza médio (128).
"""

from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from loguru import logger
from PIL import Image

from ai.qv_block import Provenance, WaveStack
from core.errors import ContractError, DataError

MID_GRAY = 128


def normalize_map(values: np.ndarray) -> np.ndarray:
    """Mapa real → uint8 com mínimo em 0 e máximo em 255."""
    values = np.asarray(values, dtype=np.float64)
    low, high = values.min(), values.max()
    if high == low:
        return np.full(values.shape, MID_GRAY, dtype=np.uint8)
    return np.round((values - low) / (high - low) * 255.0).astype(np.uint8)


def wave_filename(stack: WaveStack, k: int) -> str:
    if stack.provenance is Provenance.BASIS:
        return f"wave_{stack.tags[k].label(with_channel=stack.in_channels > 1)}.pgm"
    return f"wave_out_{k}.pgm"


def render_waves(stack: WaveStack, out_dir: Union[str, Path], item: int = 0,
                 limit: Optional[int] = None) -> List[Path]:
    """Gravar os mapas do exemplo `item` do batch; devolve os caminhos."""
    if stack.num_maps == 0 or stack.maps.shape[0] == 0:
        raise ContractError("WaveStack vazio")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"diretório não gravável: {out_dir} ({e})") from e

    count = stack.num_maps if limit is None else min(limit, stack.num_maps)
    written = []
    for k in range(count):
        path = out_dir / wave_filename(stack, k)
        try:
            Image.fromarray(normalize_map(stack.maps.data[item, k])).save(path, format="PPM")
        except OSError as e:
            raise DataError(f"falha ao gravar {path}: {e}") from e
        written.append(path)

    logger.info(f"🌊 {len(written)} mapas de onda gravados em {out_dir}")
    return written
