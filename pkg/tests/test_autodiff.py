import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pixelvq.autodiff import (
    Adam,
    BatchNorm2d,
    Conv2d,
    Linear,
    Sequential,
    Tensor,
    activation,
    backward,
    batchnorm2d,
    concat,
    conv2d,
    conv_transpose2d,
    cross_entropy,
    embedding,
    exp,
    gradcheck,
    log,
    mse_loss,
    no_grad,
    relu,
    sigmoid,
    split,
    straight_through,
    tanh,
    tensor_from_bytes,
    tensor_to_bytes,
)
from pixelvq.errors import DegenerateBatchError, DimensionError, StaleTapeError

import oracles


def leaf(arr):
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=True)


def rand(rng, *shape):
    return leaf(rng.standard_normal(shape))


# -- forward values ----------------------------------------------------


def test_conv2d_identity_kernel_copies_input():
    x = np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4)
    w = np.ones((1, 1, 1, 1), dtype=np.float32)
    out = conv2d(Tensor(x), Tensor(w))
    np.testing.assert_array_equal(out.data, x)


def test_stride2_conv_halves_side():
    rng = np.random.default_rng(0)
    x = Tensor(rng.random((1, 3, 64, 64)))
    w = Tensor(rng.random((8, 3, 2, 2)))
    assert conv2d(x, w, stride=2).shape == (1, 8, 32, 32)


@pytest.mark.parametrize("stride,padding,k", [(1, 0, 3), (2, 0, 2), (1, 1, 3), (2, 1, 3)])
def test_conv2d_matches_loop_oracle(stride, padding, k):
    rng = np.random.default_rng(stride * 10 + padding)
    x = rng.standard_normal((2, 3, 6, 6))
    w = rng.standard_normal((4, 3, k, k))
    b = rng.standard_normal(4)
    got = conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding).data
    np.testing.assert_allclose(got, oracles.conv2d_loop(x, w, b, stride, padding), atol=1e-6)


@pytest.mark.parametrize("stride,k", [(2, 2), (1, 1), (1, 3), (2, 3)])
def test_conv_transpose_matches_scatter_oracle(stride, k):
    rng = np.random.default_rng(k)
    x = rng.standard_normal((2, 3, 4, 4))
    w = rng.standard_normal((3, 5, k, k))
    b = rng.standard_normal(5)
    got = conv_transpose2d(Tensor(x), Tensor(w), Tensor(b), stride=stride).data
    np.testing.assert_allclose(got, oracles.conv_transpose2d_loop(x, w, b, stride), atol=1e-6)


def test_conv_transpose_block_upsample():
    x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
    w = np.ones((1, 1, 2, 2))
    out = conv_transpose2d(Tensor(x), Tensor(w), stride=2).data[0, 0]
    np.testing.assert_array_equal(out, np.kron([[1, 2], [3, 4]], np.ones((2, 2))))


def test_conv_shape_mismatch_raises():
    with pytest.raises(DimensionError):
        conv2d(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((2, 4, 1, 1))))


def test_batchnorm_constant_input_gives_zero():
    x = Tensor(np.full((4, 2, 3, 3), 7.0))
    out = batchnorm2d(x, Tensor(np.ones(2)), Tensor(np.zeros(2)), np.zeros(2), np.ones(2), True)
    np.testing.assert_allclose(out.data, 0.0, atol=1e-6)


def test_batchnorm_zero_gamma_gives_beta():
    rng = np.random.default_rng(1)
    x = Tensor(rng.standard_normal((4, 2, 3, 3)))
    beta = np.array([0.5, -2.0])
    out = batchnorm2d(x, Tensor(np.zeros(2)), Tensor(beta), np.zeros(2), np.ones(2), True)
    np.testing.assert_allclose(out.data, np.broadcast_to(beta[None, :, None, None], x.shape))


def test_batchnorm_needs_two_samples_when_training():
    bn = BatchNorm2d(2)
    with pytest.raises(DegenerateBatchError):
        bn(Tensor(np.zeros((1, 2, 3, 3))))
    bn.eval()
    assert bn(Tensor(np.zeros((1, 2, 3, 3)))).shape == (1, 2, 3, 3)


def test_batchnorm_running_stats_update():
    bn = BatchNorm2d(1, momentum=0.5)
    x = np.array([1.0, 3.0]).reshape(2, 1, 1, 1)
    bn(Tensor(x))
    assert bn.running_mean[0] == pytest.approx(1.0)
    # unbiased variance of {1, 3} is 2
    assert bn.running_var[0] == pytest.approx(0.5 * 1.0 + 0.5 * 2.0)


def test_activations():
    x = Tensor(np.array([-1.0, 0.0, 2.0]))
    np.testing.assert_array_equal(relu(x).data, [0, 0, 2])
    assert sigmoid(Tensor(np.array(0.0))).data == 0.5
    np.testing.assert_array_equal(activation(x, "identity").data, x.data)
    with pytest.raises(ValueError):
        activation(x, "swish")


def test_cross_entropy_uniform_logits():
    logits = Tensor(np.zeros((3, 4)))
    assert cross_entropy(logits, np.array([0, 1, 3])).item() == pytest.approx(math.log(4))


def test_cross_entropy_matches_loop_oracle():
    rng = np.random.default_rng(2)
    logits = rng.standard_normal((2, 5, 3, 3)) * 4
    target = rng.integers(0, 5, size=(2, 3, 3))
    got = cross_entropy(Tensor(logits), target).item()
    assert got == pytest.approx(oracles.cross_entropy_loop(logits, target), abs=1e-6)


def test_mse_matches_loop_oracle():
    rng = np.random.default_rng(3)
    a, b = rng.random((2, 3, 4)), rng.random((2, 3, 4))
    assert mse_loss(Tensor(a), Tensor(b)).item() == pytest.approx(oracles.mse_loop(a, b), abs=1e-12)


# -- gradients ---------------------------------------------------------


def test_sum_gives_unit_gradient():
    w = leaf(np.arange(6.0).reshape(2, 3))
    w.sum().backward()
    np.testing.assert_array_equal(w.grad, np.ones((2, 3)))


def test_mse_gradient_value():
    w = leaf(np.array([3.0]))
    mse_loss(w, Tensor(np.zeros(1, dtype=np.float64))).backward()
    np.testing.assert_allclose(w.grad, [6.0])


def test_gradient_accumulates_over_reuse():
    w = leaf(np.array([2.0]))
    (w * w + w).sum().backward()
    np.testing.assert_allclose(w.grad, [5.0])


def test_second_backward_is_stale():
    w = leaf(np.array([1.0]))
    loss = (w * 2.0).sum()
    loss.backward()
    with pytest.raises(StaleTapeError):
        loss.backward()


def test_backward_returns_tape():
    w = leaf(np.ones(3))
    tape = backward(relu(w * 2.0).sum())
    assert len(tape) >= 2


def test_no_grad_builds_no_graph():
    w = leaf(np.ones(3))
    with no_grad():
        y = w * 3.0
    assert y.is_leaf and not y.requires_grad


def test_straight_through_copies_gradient_bitwise():
    rng = np.random.default_rng(4)
    z_e = rand(rng, 2, 3, 2, 2)
    z_q = Tensor(rng.standard_normal((2, 3, 2, 2)))
    g = rng.standard_normal((2, 3, 2, 2))
    out = straight_through(z_e, z_q)
    np.testing.assert_array_equal(out.data, z_q.data)
    (out * Tensor(g)).sum().backward()
    np.testing.assert_array_equal(z_e.grad, g)


OPS = {
    "add_broadcast": lambda a, b: (a + b[0]).sum(),
    "mul": lambda a, b: (a * b).sum(),
    "div": lambda a, b: (a / (b * b + 1.0)).sum(),
    "pow": lambda a, b: ((a * a + 1.0) ** 1.5).sum(),
    "exp_log": lambda a, b: log(exp(a) + 1.0).sum(),
    "matmul": lambda a, b: (a @ b.transpose(1, 0)).sum(),
    "tanh_sigmoid": lambda a, b: (tanh(a) * sigmoid(b)).sum(),
    "getitem": lambda a, b: (a[1:, ::2] * 3.0).sum(),
    "concat_split": lambda a, b: split(concat([a, b], axis=1), 2, axis=1)[1].mean(),
    "mean_axis": lambda a, b: (a.mean(axis=0) * b.mean(axis=0)).sum(),
    "reshape": lambda a, b: (a.reshape(-1) * b.reshape(-1)).sum(),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_elementwise_gradients(name):
    rng = np.random.default_rng(5)
    a, b = rand(rng, 3, 4), rand(rng, 3, 4)
    report = gradcheck(lambda: OPS[name](a, b), [a, b], ["a", "b"])
    assert max(report.values()) < 1e-6, report


def test_conv_and_transpose_gradients():
    rng = np.random.default_rng(6)
    x, w, b = rand(rng, 2, 2, 5, 5), rand(rng, 3, 2, 3, 3), rand(rng, 3)
    wt, bt = rand(rng, 3, 2, 2, 2), rand(rng, 2)

    def fn():
        h = conv2d(x, w, b, stride=2, padding=1)
        return (conv_transpose2d(h, wt, bt, stride=2) ** 2).mean()

    report = gradcheck(fn, [x, w, b, wt, bt], ["x", "w", "b", "wt", "bt"])
    assert max(report.values()) < 1e-6, report


def test_batchnorm_gradients_train_mode():
    rng = np.random.default_rng(7)
    x, gamma, beta = rand(rng, 3, 2, 2, 2), rand(rng, 2), rand(rng, 2)
    target = Tensor(rng.standard_normal((3, 2, 2, 2)))

    def fn():
        out = batchnorm2d(x, gamma, beta, np.zeros(2), np.ones(2), True)
        return mse_loss(out, target)

    report = gradcheck(fn, [x, gamma, beta], ["x", "gamma", "beta"])
    assert max(report.values()) < 1e-6, report


def test_cross_entropy_and_embedding_gradients():
    rng = np.random.default_rng(8)
    table = rand(rng, 5, 4)
    idx = rng.integers(0, 5, size=(2, 3))
    target = rng.integers(0, 4, size=(2, 3))

    def fn():
        logits = embedding(table, idx).transpose(0, 2, 1)
        return cross_entropy(logits, target)

    assert gradcheck(fn, [table])["t0"] < 1e-6


def test_linear_and_module_gradients():
    rng = np.random.default_rng(9)
    net = Sequential(lin=Linear(4, 3, rng=rng)).astype(np.float64)
    x = Tensor(rng.standard_normal((5, 4)))
    params = net.parameters()
    report = gradcheck(lambda: (tanh(net(x)) ** 2).sum(), params)
    assert max(report.values()) < 1e-6


# -- optimiser ---------------------------------------------------------


def test_adam_zero_gradient_leaves_params():
    w = Tensor(np.array([1.5, -2.0]), requires_grad=True)
    opt = Adam([w], lr=0.1)
    w.grad = np.zeros(2)
    opt.step()
    np.testing.assert_array_equal(w.data, [1.5, -2.0])


def test_adam_first_step_is_lr_times_sign():
    w = Tensor(np.array([0.0, 0.0]), requires_grad=True)
    opt = Adam([w], lr=0.01)
    w.grad = np.array([3.0, -0.2])
    opt.step()
    np.testing.assert_allclose(w.data, [-0.01, 0.01], rtol=1e-6)


def test_adam_matches_scalar_recurrence_and_converges():
    w = Tensor(np.array([0.0]), requires_grad=True)
    opt = Adam([w], lr=0.1)
    for _ in range(100):
        opt.zero_grad()
        ((w - 5.0) ** 2).sum().backward()
        opt.step()
    expected = oracles.adam_scalar(lambda v: 2 * (v - 5.0), 0.0, 0.1, 100)
    assert w.data[0] == pytest.approx(expected, abs=1e-9)
    assert abs(w.data[0] - 5.0) < 0.5


# -- serialization -----------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(
    shape=st.lists(st.integers(0, 4), min_size=0, max_size=4),
    dtype=st.sampled_from([np.float32, np.float64, np.int64, np.uint8]),
)
def test_tensor_bytes_roundtrip(shape, dtype):
    # payloads are always little-endian f32; small integers survive exactly
    arr = (np.arange(int(np.prod(shape))) % 200).astype(dtype).reshape(shape)
    buf = tensor_to_bytes(arr)
    back, end = tensor_from_bytes(buf)
    assert end == len(buf)
    assert back.dtype == np.float32 and back.shape == arr.shape
    np.testing.assert_array_equal(back, arr)


def test_truncated_payload_raises():
    from pixelvq.errors import CheckpointFormatError

    buf = tensor_to_bytes(np.ones((2, 3), np.float32))
    with pytest.raises(CheckpointFormatError):
        tensor_from_bytes(buf[:-1])
    with pytest.raises(CheckpointFormatError):
        tensor_from_bytes(buf[:2])


def test_state_dict_roundtrip():
    rng = np.random.default_rng(10)
    a = Sequential(conv=Conv2d(3, 4, 2, 2, rng=rng), bn=BatchNorm2d(4))
    b = Sequential(conv=Conv2d(3, 4, 2, 2, rng=np.random.default_rng(99)), bn=BatchNorm2d(4))
    b.load_state_dict(a.state_dict())
    for (k1, v1), (k2, v2) in zip(a.state_dict().items(), b.state_dict().items()):
        assert k1 == k2
        np.testing.assert_array_equal(v1, v2)
