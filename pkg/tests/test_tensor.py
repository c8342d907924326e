"""Testes do motor de tensores: autodiff, camadas e otimizador."""

import math

import numpy as np
import pytest

from core.errors import ContractError, DegenerateBatchError, ShapeError
from engine import Parameter, Tensor, no_grad
from engine import functional as F
from engine.module import BatchNorm2d, Conv2d, Linear, MultiHeadAttention
from engine.optim import Adam, AdamState, adam_step


def naive_conv(x, w, b):
    n, c_in, h, wd = x.shape
    c_out, _, kh, kw = w.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    out = np.zeros((n, c_out, h, wd))
    for i in range(n):
        for o in range(c_out):
            for y in range(h):
                for xx in range(wd):
                    out[i, o, y, xx] = np.sum(padded[i, :, y:y + kh, xx:xx + kw] * w[o]) + b[o]
    return out


def test_product_rule(float64):
    x = Tensor(np.array(3.0), requires_grad=True)
    y = Tensor(np.array(4.0), requires_grad=True)

    (x * y).backward()

    assert float(x.grad) == pytest.approx(4.0)
    assert float(y.grad) == pytest.approx(3.0)


def test_gradients_accumulate(float64):
    x = Tensor(np.array(3.0), requires_grad=True)
    y = Tensor(np.array(4.0), requires_grad=True)

    (x * y).backward()
    (x * y).backward()

    assert float(x.grad) == pytest.approx(8.0)


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        (x * 2.0).backward()


def test_backward_requires_graph():
    with pytest.raises(ContractError):
        Tensor(np.array(1.0)).backward()


def test_shared_subexpression(float64):
    x = Tensor(np.array(2.0), requires_grad=True)
    y = x * x
    (y + y).backward()
    assert float(x.grad) == pytest.approx(8.0)


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_no_grad_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = x * 3.0
    assert not y.requires_grad


def test_conv_identity_kernel(float64, rng):
    x = rng.normal(size=(2, 1, 5, 6))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0

    out = F.conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(1)))

    np.testing.assert_allclose(out.data, x)


def test_conv_matches_naive_loop(float64, rng):
    x = rng.normal(size=(2, 3, 6, 5))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)

    out = F.conv2d(Tensor(x), Tensor(w), Tensor(b))

    np.testing.assert_allclose(out.data, naive_conv(x, w, b), atol=1e-12)


def test_conv_of_zeros_is_bias(float64):
    b = np.array([0.5, -1.0])
    out = F.conv2d(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.ones((2, 3, 3, 3))), Tensor(b))
    np.testing.assert_allclose(out.data, np.broadcast_to(b[None, :, None, None], (1, 2, 4, 4)))


def test_conv_channel_mismatch():
    with pytest.raises(ShapeError):
        F.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))


def test_max_pool_picks_maximum_and_routes_gradient(float64):
    x = Tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]), requires_grad=True)

    out = F.max_pool2d(x, 2)
    out.sum().backward()

    assert out.data.item() == 4.0
    np.testing.assert_array_equal(x.grad[0, 0], [[0.0, 0.0], [0.0, 1.0]])


def test_max_pool_ceil_mode():
    out = F.max_pool2d(Tensor(np.arange(9.0).reshape(1, 1, 3, 3)), 2)
    assert out.shape == (1, 1, 2, 2)
    np.testing.assert_array_equal(out.data[0, 0], [[4.0, 5.0], [7.0, 8.0]])


def test_relu():
    out = F.relu(Tensor(np.array([-1.0, 0.0, 2.0])))
    np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])


def test_softmax_rows_sum_to_one(rng):
    out = F.softmax(Tensor(rng.normal(size=(4, 7)) * 50), axis=-1)
    np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, rtol=1e-6)


def test_batch_norm_training_statistics(float64, rng):
    bn = BatchNorm2d(3)
    x = rng.normal(2.0, 3.0, size=(8, 3, 4, 4))

    out = bn(Tensor(x)).data

    np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-10)
    np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1.0, atol=1e-3)
    n = 8 * 4 * 4
    expected_var = 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * n / (n - 1)
    np.testing.assert_allclose(bn._buffers["running_var"], expected_var)
    np.testing.assert_allclose(bn._buffers["running_mean"], 0.1 * x.mean(axis=(0, 2, 3)))


def test_batch_norm_eval_with_fresh_stats_is_near_identity(float64, rng):
    bn = BatchNorm2d(2).eval()
    x = rng.normal(size=(1, 2, 3, 3))

    out = bn(Tensor(x)).data

    np.testing.assert_allclose(out, x / np.sqrt(1.0 + F.BN_EPS))


def test_batch_norm_degenerate_batch():
    bn = BatchNorm2d(1)
    with pytest.raises(DegenerateBatchError):
        bn(Tensor(np.ones((1, 1, 1, 1))))


def test_attention_single_token_is_value_path(float64, rng):
    attn = MultiHeadAttention(4, 2, rng)
    x = rng.normal(size=(2, 1, 4))

    out, weights = attn(Tensor(x), return_weights=True)

    np.testing.assert_allclose(weights.data, 1.0)
    expected = (x @ attn.v.weight.data + attn.v.bias.data) @ attn.out.weight.data + attn.out.bias.data
    np.testing.assert_allclose(out.data, expected, atol=1e-12)


def test_attention_is_permutation_equivariant(float64, rng):
    attn = MultiHeadAttention(8, 4, rng)
    x = rng.normal(size=(1, 5, 8))
    perm = np.array([3, 0, 4, 1, 2])

    out = attn(Tensor(x)).data
    permuted = attn(Tensor(x[:, perm])).data

    np.testing.assert_allclose(permuted, out[:, perm], atol=1e-12)


def test_attention_rejects_indivisible_heads(rng):
    with pytest.raises(ContractError):
        MultiHeadAttention(6, 4, rng)


def test_cross_entropy_uniform_logits(float64):
    loss = F.cross_entropy(Tensor(np.zeros((3, 2))), np.array([0, 1, 1]))
    assert loss.item() == pytest.approx(math.log(2.0))


def test_cross_entropy_confident_logits(float64):
    loss = F.cross_entropy(Tensor(np.array([[100.0, 0.0], [0.0, 100.0]])), np.array([0, 1]))
    assert loss.item() == pytest.approx(0.0, abs=1e-12)


def test_class_balance_weights():
    weights = F.class_balance_weights(np.array([1, 1, 1, 0]))
    np.testing.assert_allclose(weights, [2.0, 2.0 / 3.0])


def test_adam_first_step(float64):
    p = Parameter(np.array([1.0, -2.0]), name="p")
    p.grad = np.array([0.5, -0.25])
    state = AdamState(lr=0.1)

    adam_step([p], state)

    # após a correção de viés o primeiro passo é lr·g/(|g| + eps)
    np.testing.assert_allclose(p.data, [1.0 - 0.1, -2.0 + 0.1], atol=1e-6)
    assert p.grad is None
    assert state.step == 1


def test_adam_zero_lr_keeps_parameters(float64, rng):
    layer = Linear(3, 2, rng).bind_names()
    before = layer.weight.data.copy()
    optimizer = Adam(layer.parameters(), lr=0.0)

    F.cross_entropy(layer(Tensor(rng.normal(size=(4, 3)))), np.array([0, 1, 0, 1])).backward()
    optimizer.step()

    np.testing.assert_array_equal(layer.weight.data, before)


def test_module_names_and_state(rng):
    conv = Conv2d(1, 2, 3, rng).bind_names()
    names = [name for name, _ in conv.named_parameters()]

    assert names == ["weight", "bias"]
    assert set(conv.state_dict()) == {"weight", "bias"}


def test_matches_torch(float64, rng):
    torch = pytest.importorskip("torch")
    x = rng.normal(size=(2, 3, 6, 6))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)

    ours = F.conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    theirs = torch.nn.functional.conv2d(
        torch.from_numpy(x), torch.from_numpy(w), torch.from_numpy(b), padding=1
    ).numpy()

    np.testing.assert_allclose(ours, theirs, atol=1e-10)


def test_item_requires_a_scalar():
    assert Tensor(np.array([[2.5]])).item() == 2.5
    with pytest.raises(ContractError):
        Tensor(np.zeros(3)).item()


def test_bias_free_layers(float64, rng):
    conv = Conv2d(1, 2, 3, rng, bias=False).bind_names()
    linear = Linear(3, 2, rng, bias=False).bind_names()

    assert [n for n, _ in conv.named_parameters()] == ["weight"]
    np.testing.assert_array_equal(conv(Tensor(np.zeros((1, 1, 4, 4)))).data, 0.0)
    np.testing.assert_array_equal(linear(Tensor(np.ones((1, 3)))).data, np.ones((1, 3)) @ linear.weight.data)
