"""Layer-level differentiable operations (NCHW, row-major).

Convolutions go through an im2col view built with ``sliding_window_view``;
non-overlapping kernels (``kernel == stride``) and 1x1 kernels reduce to a
reshape, which covers every scaling block of the autoencoders.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from pixelvq.autodiff.tensor import Tensor, as_tensor, make_result
from pixelvq.errors import DegenerateBatchError, DimensionError, RangeError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


# ---------------------------------------------------------------------------
# convolution kernels (plain numpy)


def _out_size(n: int, k: int, stride: int) -> int:
    return (n - k) // stride + 1


def im2col(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Return a ``(N, C, Ho, Wo, kh, kw)`` view of the (already padded) input."""
    n, c, h, w = x.shape
    ho, wo = _out_size(h, kh, stride), _out_size(w, kw, stride)
    if kh == kw == stride and h == ho * kh and w == wo * kw:
        return x.reshape(n, c, ho, kh, wo, kw).transpose(0, 1, 2, 4, 3, 5)
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride][:, :, :ho, :wo]


def col2im(cols: np.ndarray, shape: tuple, stride: int) -> np.ndarray:
    """Scatter-add ``(N, Ho, Wo, C, kh, kw)`` patches back into an image of ``shape``."""
    n, ho, wo, c, kh, kw = cols.shape
    out = np.zeros(shape, dtype=cols.dtype)
    if kh == kw == stride:
        tiles = cols.transpose(0, 3, 1, 4, 2, 5).reshape(n, c, ho * kh, wo * kw)
        out[:, :, : ho * kh, : wo * kw] = tiles
        return out
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[
                :, :, :, :, i, j
            ].transpose(0, 3, 1, 2)
    return out


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _unpad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return x[:, :, p:-p, p:-p]


def _check_conv(x: Tensor, weight: Tensor, bias: Optional[Tensor], in_axis: int, name: str):
    if x.ndim != 4:
        raise DimensionError(f"{name}: input must be 4-D (N,C,H,W), got {x.shape}")
    if weight.ndim != 4:
        raise DimensionError(f"{name}: weight must be 4-D, got {weight.shape}")
    if x.shape[1] != weight.shape[in_axis]:
        raise DimensionError(
            f"{name}: channel axis mismatch, input has {x.shape[1]} channels "
            f"but weight expects {weight.shape[in_axis]}"
        )
    out_ch = weight.shape[1 - in_axis]
    if bias is not None and bias.shape != (out_ch,):
        raise DimensionError(f"{name}: bias axis must have {out_ch} entries, got {bias.shape}")


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of ``x[N,C,H,W]`` with ``weight[Cout,C,kh,kw]``."""
    x = as_tensor(x, weight)
    _check_conv(x, weight, bias, 1, "conv2d")
    if stride < 1:
        raise ValueError("conv2d: stride must be >= 1")
    _, _, kh, kw = weight.shape
    xp = _pad(x.data, padding)
    if kh > xp.shape[2]:
        raise DimensionError(f"conv2d: kernel height {kh} exceeds padded height axis {xp.shape[2]}")
    if kw > xp.shape[3]:
        raise DimensionError(f"conv2d: kernel width {kw} exceeds padded width axis {xp.shape[3]}")
    cols = im2col(xp, kh, kw, stride)
    out = np.tensordot(cols, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[:, None, None]
    out = np.ascontiguousarray(out)

    def bw(g):
        gx = gw = gb = None
        if x.requires_grad:
            gcols = np.tensordot(g, weight.data, axes=([1], [0]))
            gx = _unpad(col2im(gcols, xp.shape, stride), padding)
        if weight.requires_grad:
            gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, bw, "conv2d")


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution; ``weight`` is ``[Cin, Cout, kh, kw]``.

    The forward map is exactly the input-gradient of :func:`conv2d` with the
    same weight and stride, so the two form an adjoint pair.
    """
    x = as_tensor(x, weight)
    _check_conv(x, weight, bias, 0, "conv_transpose2d")
    if stride < 1:
        raise ValueError("conv_transpose2d: stride must be >= 1")
    n, _, h, w = x.shape
    _, cout, kh, kw = weight.shape
    full_shape = (n, cout, (h - 1) * stride + kh, (w - 1) * stride + kw)
    cols = np.tensordot(x.data, weight.data, axes=([1], [0]))
    out = _unpad(col2im(cols, full_shape, stride), padding)
    if bias is not None:
        out = out + bias.data[:, None, None]
    out = np.ascontiguousarray(out)

    def bw(g):
        gx = gw = gb = None
        gcols = im2col(_pad(g, padding), kh, kw, stride)
        if x.requires_grad:
            gx = np.ascontiguousarray(
                np.tensordot(gcols, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
            )
        if weight.requires_grad:
            gw = np.tensordot(x.data, gcols, axes=([0, 2, 3], [0, 2, 3]))
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, bw, "conv_transpose2d")


# ---------------------------------------------------------------------------
# normalisation and activations


def batchnorm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tensor:
    """Per-channel batch normalisation over (N, H, W).

    In training mode the running statistics are updated in place with the
    unbiased batch variance.
    """
    if x.ndim != 4:
        raise DimensionError(f"batchnorm2d: input must be 4-D, got {x.shape}")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(f"batchnorm2d: affine parameters must have {c} entries on the channel axis")
    shape = (1, c, 1, 1)
    if training:
        if x.shape[0] < 2:
            raise DegenerateBatchError("batchnorm2d: training mode needs a batch of at least 2")
        m = x.size // c
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * (m / max(m - 1, 1))
    else:
        mu, var = running_mean, running_var
    inv = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x.data - mu.reshape(shape).astype(x.dtype)) * inv.reshape(shape)
    out = gamma.data.reshape(shape) * xhat + beta.data.reshape(shape)

    def bw(g):
        gg = (g * xhat).sum(axis=(0, 2, 3))
        gb = g.sum(axis=(0, 2, 3))
        dxhat = g * gamma.data.reshape(shape)
        if training:
            m = x.size // c
            gx = (inv.reshape(shape) / m) * (
                m * dxhat
                - dxhat.sum(axis=(0, 2, 3), keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
            )
        else:
            gx = dxhat * inv.reshape(shape)
        return gx, gg, gb

    return make_result(out, (x, gamma, beta), bw, "batchnorm2d")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_result(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return make_result(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return make_result(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def identity(x: Tensor) -> Tensor:
    return x


ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh, "identity": identity}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation '{kind}'") from None
    return fn(x)


# ---------------------------------------------------------------------------
# losses


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of squared differences; both sides may carry gradients."""
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss: shapes differ, {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size
    out = np.asarray(np.mean(diff * diff), dtype=pred.dtype)

    def bw(g):
        d = (2.0 / n) * g * diff
        return d, -d

    return make_result(out, (pred, target), bw, "mse")


def cross_entropy(logits: Tensor, target: np.ndarray) -> Tensor:
    """Mean negative log-softmax of the target class; class axis is 1."""
    target = np.asarray(target)
    if logits.ndim < 2:
        raise DimensionError("cross_entropy: logits need a class axis at position 1")
    k = logits.shape[1]
    if target.shape != (logits.shape[0],) + logits.shape[2:]:
        raise DimensionError(
            f"cross_entropy: target shape {target.shape} does not match logits {logits.shape}"
        )
    if target.size and (target.min() < 0 or target.max() >= k):
        raise RangeError(f"cross_entropy: target index outside [0, {k})")
    z = np.moveaxis(logits.data, 1, -1).reshape(-1, k)
    t = target.reshape(-1)
    zmax = z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z - zmax).sum(axis=1, keepdims=True)) + zmax
    logp = z - logsum
    rows = np.arange(t.size)
    out = np.asarray(-logp[rows, t].mean(), dtype=logits.dtype)

    def bw(g):
        p = np.exp(logp)
        p[rows, t] -= 1.0
        p *= g / t.size
        moved = p.reshape(np.moveaxis(logits.data, 1, -1).shape)
        return (np.ascontiguousarray(np.moveaxis(moved, -1, 1)),)

    return make_result(out, (logits,), bw, "cross_entropy")


def loss(pred: Tensor, target, kind: str) -> Tensor:
    if kind == "mse":
        return mse_loss(pred, target if isinstance(target, Tensor) else Tensor(target, dtype=pred.dtype))
    if kind == "cross_entropy":
        return cross_entropy(pred, target)
    raise ValueError(f"unknown loss '{kind}'")


# ---------------------------------------------------------------------------
# lookup, gradient routing and filtering


def embedding(weight: Tensor, indices: np.ndarray) -> Tensor:
    """Gather rows of ``weight[K, D]``; output shape ``indices.shape + (D,)``."""
    indices = np.asarray(indices)
    k = weight.shape[0]
    if indices.size and (indices.min() < 0 or indices.max() >= k):
        raise RangeError(f"embedding index outside [0, {k})")

    def bw(g):
        full = np.zeros_like(weight.data)
        np.add.at(full, indices.reshape(-1), g.reshape(-1, weight.shape[1]))
        return (full,)

    return make_result(weight.data[indices], (weight,), bw, "embedding")


def detach(x: Tensor) -> Tensor:
    return Tensor(x.data)


def straight_through(z_e: Tensor, z_q: Tensor) -> Tensor:
    """Forward value is ``z_q``; the incoming gradient is copied to ``z_e`` unchanged."""
    if z_e.shape != z_q.shape:
        raise DimensionError(f"straight_through: shapes differ, {z_e.shape} vs {z_q.shape}")
    return make_result(z_q.data, (z_e,), lambda g: (g,), "straight_through")


def _corr_valid(x: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    win = sliding_window_view(x, kernel.size, axis=axis)
    return win @ kernel


def _corr_valid_adjoint(g: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    k = kernel.size
    pad = [(0, 0)] * g.ndim
    pad[axis] = (k - 1, k - 1)
    return _corr_valid(np.pad(g, pad), kernel[::-1], axis)


def separable_filter(x: Tensor, kernel: np.ndarray) -> Tensor:
    """Depthwise 'valid' filtering of the two trailing axes with a 1-D kernel."""
    kernel = np.asarray(kernel, dtype=x.dtype)
    k = kernel.size
    if x.shape[-1] < k or x.shape[-2] < k:
        raise DimensionError(f"separable_filter: spatial axes {x.shape[-2:]} smaller than window {k}")
    out = _corr_valid(_corr_valid(x.data, kernel, x.ndim - 2), kernel, x.ndim - 1)

    def bw(g):
        gx = _corr_valid_adjoint(g, kernel, g.ndim - 1)
        return (_corr_valid_adjoint(gx, kernel, g.ndim - 2),)

    return make_result(np.ascontiguousarray(out), (x,), bw, "separable_filter")
