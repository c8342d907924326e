"""
Operações Diferenciáveis
========================

Camadas usadas pelos quatro classificadores, cada uma com gradiente
analítico: conv2d, batch_norm, max_pool2d, relu, linear, layer_norm,
softmax, multi_head_attention e cross_entropy.
"""

import math
from typing import Mapping, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import ContractError, DegenerateBatchError, ShapeError
from engine.tensor import Tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
LN_EPS = 1e-5


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor._result(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def conv2d(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """Correlação cruzada stride 1 com zero-padding "same".

    x: (N, Cin, H, W), w: (Cout, Cin, kh, kw), b: (Cout,)
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d exige x 4D e w 4D, recebeu {x.shape} e {w.shape}")
    n, c_in, h, wd = x.shape
    c_out, w_in, kh, kw = w.shape
    if c_in != w_in:
        raise ShapeError(f"conv2d: Cin da entrada ({c_in}) != Cin do kernel ({w_in})")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ContractError(f"padding same exige kernel ímpar, recebeu {kh}x{kw}")
    if b is not None and b.shape != (c_out,):
        raise ShapeError(f"conv2d: bias {b.shape} != ({c_out},)")

    ph, pw = kh // 2, kw // 2
    padded = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = sliding_window_view(padded, (kh, kw), axis=(2, 3))  # N, Cin, H, W, kh, kw
    kernel = w.data
    out = np.tensordot(cols, kernel, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b.data[None, :, None, None]
    out = np.ascontiguousarray(out)

    def backward(g):
        gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        gcols = np.tensordot(g, kernel, axes=([1], [0]))  # N, H, W, Cin, kh, kw
        gpad = np.zeros(padded.shape, dtype=g.dtype)
        for i in range(kh):
            for j in range(kw):
                gpad[:, :, i:i + h, j:j + wd] += gcols[..., i, j].transpose(0, 3, 1, 2)
        gx = gpad[:, :, ph:ph + h, pw:pw + wd]
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return Tensor._result(out, parents, backward)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
               running_var: np.ndarray, training: bool, momentum: float = BN_MOMENTUM,
               eps: float = BN_EPS) -> Tensor:
    """Normalização por canal sobre (N, H, W).

    Em treino usa estatísticas do batch e atualiza `running_mean` /
    `running_var` in place (variância não enviesada); em avaliação usa
    as estatísticas acumuladas.
    """
    if x.ndim != 4 or gamma.shape != (x.shape[1],):
        raise ShapeError(f"batch_norm: entrada {x.shape} incompatível com gamma {gamma.shape}")
    axes = (0, 2, 3)
    n_per_channel = x.shape[0] * x.shape[2] * x.shape[3]
    g_gamma = gamma.data[None, :, None, None]

    if training:
        if n_per_channel < 2:
            raise DegenerateBatchError(
                f"batch_norm em treino exige N·H·W >= 2 por canal, recebeu forma {x.shape}"
            )
        mean = x.data.mean(axis=axes, keepdims=True)
        var = x.data.var(axis=axes, keepdims=True)
        unbiased = var.reshape(-1) * n_per_channel / (n_per_channel - 1)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean.reshape(-1)
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mean = running_mean.reshape(1, -1, 1, 1).astype(x.dtype)
        var = running_var.reshape(1, -1, 1, 1).astype(x.dtype)

    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean) * inv_std
    out = g_gamma * x_hat + beta.data[None, :, None, None]

    def backward(g):
        g_beta = g.sum(axis=axes)
        g_gamma_out = (g * x_hat).sum(axis=axes)
        g_hat = g * g_gamma
        if training:
            gx = inv_std / n_per_channel * (
                n_per_channel * g_hat
                - g_hat.sum(axis=axes, keepdims=True)
                - x_hat * (g_hat * x_hat).sum(axis=axes, keepdims=True)
            )
        else:
            gx = g_hat * inv_std
        return gx, g_gamma_out, g_beta

    return Tensor._result(out, (x, gamma, beta), backward)


def max_pool2d(x: Tensor, k: int = 2) -> Tensor:
    """Max-pool k×k, stride k, modo ceil (bordas preenchidas com -inf).

    O gradiente vai para o primeiro máximo na varredura linha a linha.
    """
    if x.ndim != 4:
        raise ShapeError(f"max_pool2d exige entrada 4D, recebeu {x.shape}")
    n, c, h, w = x.shape
    ho, wo = -(-h // k), -(-w // k)
    padded = np.pad(x.data, ((0, 0), (0, 0), (0, ho * k - h), (0, wo * k - w)),
                    constant_values=-np.inf)
    windows = padded.reshape(n, c, ho, k, wo, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, k * k)
    argmax = windows.argmax(axis=-1)[..., None]
    out = np.take_along_axis(windows, argmax, axis=-1)[..., 0]

    def backward(g):
        routed = np.zeros((n, c, ho, wo, k * k), dtype=g.dtype)
        np.put_along_axis(routed, argmax, g[..., None], axis=-1)
        full = routed.reshape(n, c, ho, wo, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * k, wo * k)
        return (full[:, :, :h, :w],)

    return Tensor._result(out, (x,), backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x @ W + b com W em layout (d_in, d_out)."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"linear: entrada {x.shape} incompatível com W {weight.shape}")
    out = x @ weight
    return out + bias if bias is not None else out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LN_EPS) -> Tensor:
    """Normalização sobre o último eixo."""
    d = x.shape[-1]
    if gamma.shape != (d,):
        raise ShapeError(f"layer_norm: gamma {gamma.shape} != ({d},)")
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean) * inv_std
    out = gamma.data * x_hat + beta.data
    lead = tuple(range(x.ndim - 1))

    def backward(g):
        g_hat = g * gamma.data
        gx = inv_std / d * (
            d * g_hat
            - g_hat.sum(axis=-1, keepdims=True)
            - x_hat * (g_hat * x_hat).sum(axis=-1, keepdims=True)
        )
        return gx, (g * x_hat).sum(axis=lead), g.sum(axis=lead)

    return Tensor._result(out, (x, gamma, beta), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return Tensor._result(s, (x,), backward)


def multi_head_attention(x: Tensor, params: Mapping[str, Tensor], heads: int,
                         return_weights: bool = False):
    """Auto-atenção multi-cabeça com escala 1/sqrt(d/heads).

    params: wq, bq, wk, bk, wv, bv, wo, bo (pesos em layout (d, d); vieses opcionais).
    """
    if x.ndim != 3:
        raise ShapeError(f"atenção exige (N, T, d), recebeu {x.shape}")
    n, t, d = x.shape
    if heads < 1 or d % heads:
        raise ContractError(f"dimensão {d} não divisível por {heads} cabeças")
    hd = d // heads

    def split(z: Tensor) -> Tensor:
        return z.reshape(n, t, heads, hd).transpose(0, 2, 1, 3)

    q = split(linear(x, params["wq"], params.get("bq")))
    k = split(linear(x, params["wk"], params.get("bk")))
    v = split(linear(x, params["wv"], params.get("bv")))

    scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(hd))
    weights = softmax(scores, axis=-1)
    context = (weights @ v).transpose(0, 2, 1, 3).reshape(n, t, d)
    out = linear(context, params["wo"], params.get("bo"))
    return (out, weights) if return_weights else out


def cross_entropy(logits: Tensor, labels: np.ndarray,
                  class_weights: Optional[np.ndarray] = None) -> Tensor:
    """Média de −log softmax[rótulo] (ponderada por classe, se pedido)."""
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy exige logits (N, K), recebeu {logits.shape}")
    n, k = logits.shape
    labels = np.asarray(labels).astype(np.int64).reshape(-1)
    if labels.shape != (n,):
        raise ShapeError(f"{labels.size} rótulos para {n} logits")
    if labels.min() < 0 or labels.max() >= k:
        raise ContractError(f"rótulo fora de [0, {k})")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    log_prob = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    picked = log_prob[np.arange(n), labels]

    if class_weights is None:
        sample_w = np.ones(n, dtype=logits.dtype)
    else:
        sample_w = np.asarray(class_weights, dtype=logits.dtype)[labels]
    total = sample_w.sum()
    loss = np.asarray(-(sample_w * picked).sum() / total, dtype=logits.dtype)

    def backward(g):
        grad = np.exp(log_prob)
        grad[np.arange(n), labels] -= 1.0
        return (grad * (sample_w / total)[:, None] * g,)

    return Tensor._result(loss, (logits,), backward)


def class_balance_weights(labels: np.ndarray, classes: int = 2) -> np.ndarray:
    """Pesos inversos à frequência: n / (K · n_c)."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=classes).astype(np.float64)
    if np.any(counts == 0):
        raise ContractError(f"classe ausente no conjunto de treino: contagens {counts.tolist()}")
    weights = counts.sum() / (classes * counts)
    return weights


def patch_shape(size: Tuple[int, int], patch: int) -> Tuple[int, int]:
    h, w = size
    if h % patch or w % patch:
        raise ContractError(f"dimensões {h}x{w} não divisíveis pelo patch {patch}")
    return h // patch, w // patch
