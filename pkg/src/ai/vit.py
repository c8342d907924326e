"""
ViT e QV-ViT
============

[bloco QV opcional] → tokens → embedding linear → token de classe +
posições aprendidas → 8 blocos pre-LN (atenção 4 cabeças, MLP com
ReLU) → layer_norm → cabeça linear sobre o token de classe.

Tokens:
- patch: patches 8x8 não sobrepostos em ordem de linha, cada um
  achatado em (C, py, px) → C·64 valores
- channel: um token por mapa (H·W valores)
"""

import numpy as np

from ai.qv_block import QVBlock
from core.config import ModelConfig
from core.errors import ShapeError
from engine import functional as F
from engine.module import LayerNorm, Linear, Module, ModuleList, MultiHeadAttention
from engine.tensor import Parameter, Tensor, concatenate, get_default_dtype

TOKEN_INIT_STD = 0.02


def patchify(x: Tensor, patch: int) -> Tensor:
    """(N, C, H, W) → (N, (H/p)·(W/p), C·p·p)."""
    n, c, h, w = x.shape
    gh, gw = F.patch_shape((h, w), patch)
    return (x.reshape(n, c, gh, patch, gw, patch)
             .transpose(0, 2, 4, 1, 3, 5)
             .reshape(n, gh * gw, c * patch * patch))


def unpatchify(tokens: Tensor, channels: int, height: int, width: int, patch: int) -> Tensor:
    """Inverso exato de `patchify`."""
    n = tokens.shape[0]
    gh, gw = F.patch_shape((height, width), patch)
    return (tokens.reshape(n, gh, gw, channels, patch, patch)
                  .transpose(0, 3, 1, 4, 2, 5)
                  .reshape(n, channels, height, width))


def channel_tokens(x: Tensor) -> Tensor:
    """(N, C, H, W) → (N, C, H·W)."""
    n, c, h, w = x.shape
    return x.reshape(n, c, h * w)


class EncoderBlock(Module):
    def __init__(self, dim: int, heads: int, mlp_dim: int, rng: np.random.Generator):
        super().__init__()
        self.norm1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.norm2 = LayerNorm(dim)
        self.fc1 = Linear(dim, mlp_dim, rng)
        self.fc2 = Linear(mlp_dim, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.fc2(F.relu(self.fc1(self.norm2(x))))


class VisionTransformer(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.qv = QVBlock(cfg.qv, rng) if cfg.qv is not None else None
        channels = cfg.qv.filters if cfg.qv is not None else cfg.in_channels
        size, patch, dim = cfg.input_size, cfg.vit_patch, cfg.vit_embed_dim

        if cfg.token_mode == "patch":
            self.num_tokens = (size // patch) ** 2
            token_dim = channels * patch * patch
        else:
            self.num_tokens = channels
            token_dim = size * size
        self.channels = channels

        self.embed = Linear(token_dim, dim, rng)
        dtype = get_default_dtype()
        self.cls_token = Parameter(rng.normal(0.0, TOKEN_INIT_STD, (1, 1, dim)).astype(dtype))
        self.pos_embed = Parameter(rng.normal(0.0, TOKEN_INIT_STD, (1, self.num_tokens + 1, dim)).astype(dtype))
        self.blocks = ModuleList(
            EncoderBlock(dim, cfg.vit_heads, cfg.vit_mlp_dim, rng) for _ in range(cfg.vit_layers)
        )
        self.norm = LayerNorm(dim)
        self.head = Linear(dim, cfg.classes, rng)

    def tokenize(self, x: Tensor) -> Tensor:
        if x.shape[1:] != (self.channels, self.cfg.input_size, self.cfg.input_size):
            raise ShapeError(
                f"entrada {x.shape[1:]} != ({self.channels}, {self.cfg.input_size}, {self.cfg.input_size})"
            )
        if self.cfg.token_mode == "patch":
            return patchify(x, self.cfg.vit_patch)
        return channel_tokens(x)

    def forward(self, x: Tensor) -> Tensor:
        if self.qv is not None:
            x = self.qv(x)
        z = self.embed(self.tokenize(x))
        n, _, dim = z.shape
        cls = self.cls_token.broadcast_to((n, 1, dim))
        z = concatenate([cls, z], axis=1) + self.pos_embed
        for block in self.blocks:
            z = block(z)
        z = self.norm(z)
        return self.head(z[:, 0, :])
