"""
Módulos e Camadas
=================

Contêineres de parâmetros no estilo "Module": nomes hierárquicos
estáveis (usados nos checkpoints), modos treino/avaliação e buffers
não treináveis (estatísticas do batch_norm).
"""

import math
from collections import OrderedDict
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from core.errors import CheckpointFormatError, ContractError
from engine import functional as F
from engine.tensor import Parameter, Tensor, get_default_dtype


def kaiming_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(get_default_dtype())


def zeros(*shape) -> np.ndarray:
    return np.zeros(shape, dtype=get_default_dtype())


def ones(*shape) -> np.ndarray:
    return np.ones(shape, dtype=get_default_dtype())


class Module:
    """Base: descobre parâmetros, buffers e submódulos pelos atributos."""

    def __init__(self):
        self.training = True
        self._buffers: Dict[str, np.ndarray] = OrderedDict()

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def register_buffer(self, name: str, value: np.ndarray):
        self._buffers[name] = value

    def children(self) -> Iterator[Tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, value in self._buffers.items():
            yield prefix + name, value
        for name, child in self.children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def bind_names(self) -> "Module":
        """Gravar o caminho hierárquico em `Parameter.name` (nomes únicos)."""
        seen = {}
        for name, param in self.named_parameters():
            if id(param) in seen:
                raise ContractError(f"parâmetro compartilhado: {seen[id(param)]} e {name}")
            seen[id(param)] = name
            param.name = name
        return self

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        """Parâmetros e buffers por nome, na ordem de criação."""
        state = OrderedDict((name, p.data) for name, p in self.named_parameters())
        state.update(self.named_buffers())
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray]):
        own = self.state_dict()
        missing = [name for name in own if name not in state]
        unexpected = [name for name in state if name not in own]
        if missing or unexpected:
            raise CheckpointFormatError(
                f"estado incompatível: faltando {missing[:5]}, inesperados {unexpected[:5]}"
            )
        for name, param in self.named_parameters():
            param.data = self._checked(name, param.data, state[name]).astype(param.dtype)
        for name, buffer in self.named_buffers():
            buffer[...] = self._checked(name, buffer, state[name])

    @staticmethod
    def _checked(name: str, current: np.ndarray, incoming: np.ndarray) -> np.ndarray:
        incoming = np.asarray(incoming)
        if incoming.shape != current.shape:
            raise CheckpointFormatError(f"{name}: forma {incoming.shape} != {current.shape}")
        return incoming


class ModuleList(Module):
    """Lista indexável de submódulos (nomes `<lista>.<i>.`)."""

    def __init__(self, modules=()):
        super().__init__()
        self._items: List[Module] = list(modules)

    def children(self):
        for i, module in enumerate(self._items):
            yield str(i), module

    def named_parameters(self, prefix: str = ""):
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def append(self, module: Module):
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, index):
        return self._items[index]


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel: int, rng: np.random.Generator,
                 bias: bool = True):
        super().__init__()
        fan_in = in_channels * kernel * kernel
        self.weight = Parameter(kaiming_uniform(rng, (out_channels, in_channels, kernel, kernel), fan_in))
        self.bias = Parameter(zeros(out_channels)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias)


class BatchNorm2d(Module):
    def __init__(self, channels: int):
        super().__init__()
        self.weight = Parameter(ones(channels))
        self.bias = Parameter(zeros(channels))
        self.register_buffer("running_mean", zeros(channels))
        self.register_buffer("running_var", ones(channels))

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm(
            x, self.weight, self.bias,
            self._buffers["running_mean"], self._buffers["running_var"],
            training=self.training,
        )


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 bias: bool = True):
        super().__init__()
        self.weight = Parameter(kaiming_uniform(rng, (in_features, out_features), in_features))
        self.bias = Parameter(zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int):
        super().__init__()
        self.weight = Parameter(ones(dim))
        self.bias = Parameter(zeros(dim))

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.weight, self.bias)


class MultiHeadAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        super().__init__()
        if dim % heads:
            raise ContractError(f"dimensão {dim} não divisível por {heads} cabeças")
        self.heads = heads
        self.q = Linear(dim, dim, rng)
        # viés de chave soma uma constante por linha do softmax
        self.k = Linear(dim, dim, rng, bias=False)
        self.v = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)

    def projections(self) -> Dict[str, Optional[Parameter]]:
        return {
            "wq": self.q.weight, "bq": self.q.bias,
            "wk": self.k.weight, "bk": self.k.bias,
            "wv": self.v.weight, "bv": self.v.bias,
            "wo": self.out.weight, "bo": self.out.bias,
        }

    def forward(self, x: Tensor, return_weights: bool = False):
        return F.multi_head_attention(x, self.projections(), self.heads, return_weights)
