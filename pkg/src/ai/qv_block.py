"""
Bloco Quantum Vision
====================

Converte uma imagem tempo-frequência em "ondas de informação":

1. ψ_{x,m}(x, y) = I(x - m, y) - I(x, y) e ψ_{y,m} análogo, para
   m em ±1, ±2 (bordas replicadas, m = 0 excluído)
2. cada mapa base passa pelo seu próprio ramo de `depth` estágios
   conv + ReLU (ramos H para o eixo x, V para o eixo y)
3. as saídas dos oito ramos são somadas em `filters` mapas

Ordem dos mapas base (contrato de checkpoint): canal a canal, eixo x
com m = -1, +1, -2, +2 e depois eixo y na mesma ordem; índice
k = c·8 + b.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence

import numpy as np

from core.config import QVConfig
from core.errors import ContractError, ShapeError
from engine import functional as F
from engine.module import Conv2d, Module
from engine.tensor import Tensor, stack

AXES = ("x", "y")
BRANCH_PREFIX = {"x": "h", "y": "v"}


class Provenance(str, Enum):
    BASIS = "basis"
    SUPERPOSED = "superposed"


@dataclass(frozen=True)
class WaveTag:
    """Origem de um mapa base: eixo, deslocamento m e canal de entrada."""
    axis: str
    m: int
    channel: int = 0

    def label(self, with_channel: bool = False) -> str:
        text = f"{self.axis}_{self.m:+d}"
        return f"{text}_c{self.channel}" if with_channel else text


@dataclass
class WaveStack:
    maps: Tensor
    provenance: Provenance
    tags: List[WaveTag] = field(default_factory=list)
    squared: bool = False

    def __post_init__(self):
        if self.maps.ndim != 4:
            raise ShapeError(f"WaveStack exige (N, K, H, W), recebeu {self.maps.shape}")
        if self.provenance is Provenance.BASIS and len(self.tags) != self.maps.shape[1]:
            raise ContractError(f"{len(self.tags)} tags para {self.maps.shape[1]} mapas base")

    @property
    def num_maps(self) -> int:
        return self.maps.shape[1]

    @property
    def in_channels(self) -> int:
        return len({t.channel for t in self.tags}) if self.tags else 0


def basis_order(shifts: Sequence[int]):
    """Pares (eixo, m) na ordem dos ramos."""
    return [(axis, m) for axis in AXES for m in shifts]


def _clamped_index(size: int, m: int) -> np.ndarray:
    return np.clip(np.arange(size) - m, 0, size - 1)


def basis_waves(img: Tensor, cfg: QVConfig) -> WaveStack:
    """Oito mapas de diferença deslocada por canal de entrada."""
    if img.ndim != 4:
        raise ShapeError(f"basis_waves exige (N, C, H, W), recebeu {img.shape}")
    n, c, h, w = img.shape
    if h <= 2 * cfg.reach or w <= 2 * cfg.reach:
        raise ContractError(f"imagem {h}x{w} menor que o alcance dos deslocamentos (±{cfg.reach})")

    waves = []
    for axis, m in basis_order(cfg.shifts):
        if axis == "x":
            shifted = img.take(_clamped_index(w, m), axis=3)
        else:
            shifted = img.take(_clamped_index(h, m), axis=2)
        waves.append(shifted - img)

    # (N, C, 8, H, W) → (N, 8C, H, W), canal a canal
    branches = len(waves)
    maps = stack(waves, axis=2).reshape(n, c * branches, h, w)
    tags = [WaveTag(axis, m, channel) for channel in range(c) for axis, m in basis_order(cfg.shifts)]
    return WaveStack(maps=maps, provenance=Provenance.BASIS, tags=tags)


def _branch_inputs(basis: WaveStack) -> Tensor:
    """Reorganizar para (N, C, ramos, H, W)."""
    if basis.provenance is not Provenance.BASIS:
        raise ContractError(f"operação exige mapas base, recebeu {basis.provenance.value}")
    n, k, h, w = basis.maps.shape
    c = basis.in_channels
    return basis.maps.reshape(n, c, k // c, h, w)


def superpose_linear(basis: WaveStack, a: Sequence[float], b: Sequence[float]) -> Tensor:
    """ψ = Σ_m a_m·ψ_{x,m} + b_m·ψ_{y,m}, canal a canal → (N, C, H, W)."""
    grouped = _branch_inputs(basis)
    per_axis = grouped.shape[2] // 2
    if len(a) != per_axis or len(b) != per_axis:
        raise ContractError(f"esperados {per_axis} coeficientes por eixo, recebeu {len(a)} e {len(b)}")
    coeffs = np.concatenate([np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)])
    weights = Tensor(coeffs.reshape(1, 1, -1, 1, 1).astype(grouped.dtype))
    return (grouped * weights).sum(axis=2)


def magnitude_square(basis: WaveStack) -> WaveStack:
    """|ψ|² elemento a elemento (visualização; fora do caminho treinado)."""
    if basis.provenance is not Provenance.BASIS:
        raise ContractError("magnitude_square exige mapas base")
    return WaveStack(maps=basis.maps * basis.maps, provenance=basis.provenance,
                     tags=list(basis.tags), squared=True)


class QVBlock(Module):
    """Ramos conv+ReLU: `h_m<m>_l<l>` para o eixo x, `v_m<m>_l<l>` para o eixo y."""

    def __init__(self, cfg: QVConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        for axis, m in basis_order(cfg.shifts):
            for layer in range(1, cfg.depth + 1):
                in_ch = cfg.in_channels if layer == 1 else cfg.filters
                setattr(self, self.branch_name(axis, m, layer), Conv2d(in_ch, cfg.filters, cfg.kernel, rng))

    @staticmethod
    def branch_name(axis: str, m: int, layer: int) -> str:
        return f"{BRANCH_PREFIX[axis]}_m{m:+d}_l{layer}"

    def branch(self, axis: str, m: int) -> List[Conv2d]:
        return [getattr(self, self.branch_name(axis, m, layer)) for layer in range(1, self.cfg.depth + 1)]

    def forward(self, img: Tensor) -> Tensor:
        return qv_forward(img, self, self.cfg)


def superpose_conv(basis: WaveStack, params: QVBlock, cfg: QVConfig) -> Tensor:
    """Soma dos oito ramos conv+ReLU → (N, filters, H, W)."""
    grouped = _branch_inputs(basis)
    if grouped.shape[1] != cfg.in_channels:
        raise ShapeError(f"{grouped.shape[1]} canais de entrada, QVConfig espera {cfg.in_channels}")

    out = None
    for b, (axis, m) in enumerate(basis_order(cfg.shifts)):
        x = grouped[:, :, b]
        for conv in params.branch(axis, m):
            x = F.relu(conv(x))
        out = x if out is None else out + x
    return out


def qv_forward(img: Tensor, params: QVBlock, cfg: QVConfig) -> Tensor:
    return superpose_conv(basis_waves(img, cfg), params, cfg)


def superposed_stack(maps: Tensor) -> WaveStack:
    return WaveStack(maps=maps, provenance=Provenance.SUPERPOSED)
