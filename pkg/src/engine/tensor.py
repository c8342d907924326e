"""
Tensor - Autodiff Reverso
=========================

Array denso numpy + grafo de operações gravado no forward.
`backward()` percorre o grafo em ordem topológica reversa e acumula
gradientes exatos nos tensores folha.
"""

import threading
from contextlib import contextmanager
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from core.errors import ContractError, ShapeError

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_state = threading.local()
_default_dtype = np.float32


def get_default_dtype():
    return _default_dtype


def set_default_dtype(dtype):
    """Precisão de armazenamento: float32 (treino) ou float64 (verificação)."""
    global _default_dtype
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ContractError(f"dtype não suportado: {dtype}")
    _default_dtype = dtype


@contextmanager
def default_dtype(dtype):
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Desabilita a gravação do grafo (inferência)."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Somar o gradiente sobre os eixos expandidos por broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Array n-dimensional com slot opcional de gradiente."""

    def __init__(self, data, requires_grad: bool = False, dtype=None,
                 _parents: Tuple["Tensor", ...] = (), _backward: Optional[BackwardFn] = None):
        array = np.asarray(data)
        target = dtype or (array.dtype.type if array.dtype.kind == "f" and _parents else _default_dtype)
        self.data: np.ndarray = array if array.dtype == target else array.astype(target)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    # ----- construção de nós -----

    @staticmethod
    def _result(data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn) -> "Tensor":
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            return Tensor(data, requires_grad=True, dtype=data.dtype.type,
                          _parents=tuple(parents), _backward=backward)
        return Tensor(data, dtype=data.dtype.type)

    @staticmethod
    def ensure(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    # ----- propriedades -----

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() exige um escalar, recebeu forma {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # ----- autodiff -----

    def backward(self, grad: Optional[np.ndarray] = None):
        """Propagar gradientes a partir deste escalar.

        Gradientes de folhas acumulam entre chamadas: duas chamadas sem
        zerar dobram `grad`.
        """
        if self.size != 1:
            raise ContractError(f"backward exige um escalar, recebeu forma {self.shape}")
        if not self.requires_grad:
            raise ContractError("backward em tensor sem grafo gravado")

        order, visited = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        seed = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=self.dtype)
        grads = {id(self): seed}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, parent_grad in zip(node._parents, node._backward(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    # ----- aritmética -----

    def __add__(self, other):
        other = Tensor.ensure(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor._result(
            self.data + other.data, (self, other),
            lambda g: (unbroadcast(g, a_shape), unbroadcast(g, b_shape)),
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor._result(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-Tensor.ensure(other))

    def __rsub__(self, other):
        return Tensor.ensure(other) + (-self)

    def __mul__(self, other):
        other = Tensor.ensure(other)
        a, b = self.data, other.data
        return Tensor._result(
            a * b, (self, other),
            lambda g: (unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor.ensure(other)
        a, b = self.data, other.data
        return Tensor._result(
            a / b, (self, other),
            lambda g: (unbroadcast(g / b, a.shape), unbroadcast(-g * a / (b * b), b.shape)),
        )

    def __matmul__(self, other):
        other = Tensor.ensure(other)
        a, b = self.data, other.data
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul incompatível: {a.shape} @ {b.shape}")

        def backward(g):
            ga = g @ np.swapaxes(b, -1, -2)
            gb = np.swapaxes(a, -1, -2) @ g
            return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

        return Tensor._result(a @ b, (self, other), backward)

    # ----- forma -----

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor._result(self.data.reshape(shape), (self,), lambda g: (g.reshape(original),))

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        axes = axes or tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor._result(self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),))

    def broadcast_to(self, shape) -> "Tensor":
        original = self.shape
        return Tensor._result(np.broadcast_to(self.data, shape), (self,),
                              lambda g: (unbroadcast(g, original),))

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        original = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, original).copy(),)

        return Tensor._result(np.asarray(self.data.sum(axis=axis, keepdims=keepdims)), (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def __getitem__(self, index) -> "Tensor":
        original, dtype = self.shape, self.dtype

        def backward(g):
            full = np.zeros(original, dtype=dtype)
            np.add.at(full, index, g)
            return (full,)

        return Tensor._result(np.asarray(self.data[index]), (self,), backward)

    def take(self, indices: np.ndarray, axis: int) -> "Tensor":
        """Gather ao longo de um eixo (índices podem repetir)."""
        axis = axis % self.ndim
        original, dtype = self.shape, self.dtype
        selector = (slice(None),) * axis + (indices,)

        def backward(g):
            full = np.zeros(original, dtype=dtype)
            np.add.at(full, selector, g)
            return (full,)

        return Tensor._result(np.take(self.data, indices, axis=axis), (self,), backward)


class Parameter(Tensor):
    """Tensor treinável com nome estável (usado nos checkpoints)."""

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def concatenate(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [Tensor.ensure(t) for t in tensors]
    axis = axis % tensors[0].ndim
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(
            g[(slice(None),) * axis + (slice(bounds[i], bounds[i + 1]),)]
            for i in range(len(tensors))
        )

    return Tensor._result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [Tensor.ensure(t) for t in tensors]
    axis = axis % (tensors[0].ndim + 1)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor._result(np.stack([t.data for t in tensors], axis=axis), tensors, backward)

