"""
Verificação de gradientes por diferenças finitas centrais.
"""

from typing import Callable, Sequence

import numpy as np

from engine.tensor import Tensor

FD_STEP = 1e-3


def numerical_gradient(fn: Callable[[], Tensor], target: Tensor, step: float = FD_STEP) -> np.ndarray:
    """(f(x+h) - f(x-h)) / 2h elemento a elemento, perturbando `target.data` in place."""
    grad = np.zeros_like(target.data, dtype=np.float64)
    flat = target.data.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        upper = float(fn().data)
        flat[i] = original - step
        lower = float(fn().data)
        flat[i] = original
        grad.reshape(-1)[i] = (upper - lower) / (2 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| / max(max|a|, max|n|, floor), na escala do tensor inteiro.

    Entradas individuais perto de zero não inflam o erro; o piso só age
    quando o gradiente todo é nulo.
    """
    if not analytic.size:
        return 0.0
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), floor)
    return float(np.max(np.abs(analytic - numeric))) / scale


def check_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor], step: float = FD_STEP) -> float:
    """Maior erro relativo entre backward() e diferenças finitas sobre `inputs`.

    `fn` deve reconstruir o grafo a cada chamada e devolver um escalar.
    Use em float64.
    """
    for t in inputs:
        t.zero_grad()
    fn().backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    worst = 0.0
    for t, a in zip(inputs, analytic):
        worst = max(worst, relative_error(a, numerical_gradient(fn, t, step)))
    return worst
