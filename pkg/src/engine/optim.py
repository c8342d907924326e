"""
Otimizador Adam
===============
"""

from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from engine.tensor import Parameter


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Parameter], state: AdamState):
    """Atualização Adam com correção de viés; zera os gradientes no fim."""
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step

    for param in params:
        grad = param.grad
        if grad is None:
            continue
        key = param.name or str(id(param))
        m = state.m.setdefault(key, np.zeros_like(param.data))
        v = state.v.setdefault(key, np.zeros_like(param.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        param.data -= update.astype(param.dtype)
        param.grad = None


class Adam:
    def __init__(self, params: Sequence[Parameter], lr: float = 1e-4, betas=(0.9, 0.999),
                 eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def step(self):
        adam_step(self.params, self.state)
