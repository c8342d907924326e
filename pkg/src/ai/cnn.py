"""
CNN e QV-CNN
============

[bloco QV opcional] → 6 × (conv 3x3 → batch_norm → max_pool 2x2 → ReLU)
→ flatten → linear → 2 logits.

O pool é aplicado nas camadas 1-5 apenas: 32 → 16 → 8 → 4 → 2 → 1.
"""

import numpy as np

from ai.qv_block import QVBlock
from core.config import ModelConfig
from engine import functional as F
from engine.module import BatchNorm2d, Conv2d, Linear, Module, ModuleList
from engine.tensor import Tensor


def pooled_size(size: int, pools: int) -> int:
    for _ in range(pools):
        size = -(-size // 2)
    return size


class ConvClassifier(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.qv = QVBlock(cfg.qv, rng) if cfg.qv is not None else None
        channels = cfg.qv.filters if cfg.qv is not None else cfg.in_channels

        self.convs = ModuleList()
        self.norms = ModuleList()
        for out_channels in cfg.cnn_channels:
            # batch_norm logo após a conv: o viés seria absorvido pela média
            self.convs.append(Conv2d(channels, out_channels, cfg.cnn_kernel, rng, bias=False))
            self.norms.append(BatchNorm2d(out_channels))
            channels = out_channels

        self.pools = len(cfg.cnn_channels) - 1
        side = pooled_size(cfg.input_size, self.pools)
        self.head = Linear(channels * side * side, cfg.classes, rng)

    def forward(self, x: Tensor) -> Tensor:
        if self.qv is not None:
            x = self.qv(x)
        for i, (conv, norm) in enumerate(zip(self.convs, self.norms)):
            x = norm(conv(x))
            if i < self.pools:
                x = F.max_pool2d(x, 2)
            x = F.relu(x)
        return self.head(x.reshape(x.shape[0], -1))
