"""
Engine - Tensores com Autodiff
==============================

Motor denso em numpy usado pelos quatro classificadores:
- Tensor com gradiente reverso e modo no_grad
- Operações com gradiente analítico (conv, batch_norm, atenção, ...)
- Módulos com nomes estáveis, Adam e checkpoints QVCK
"""

from engine.tensor import (
    Parameter,
    Tensor,
    concatenate,
    default_dtype,
    get_default_dtype,
    no_grad,
    set_default_dtype,
    stack,
)

__all__ = [
    "Parameter",
    "Tensor",
    "concatenate",
    "default_dtype",
    "get_default_dtype",
    "no_grad",
    "set_default_dtype",
    "stack",
]
