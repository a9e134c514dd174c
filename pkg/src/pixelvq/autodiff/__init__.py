"""Minimal numpy tensor engine with reverse-mode autodiff."""

from pixelvq.autodiff.functional import (
    activation,
    batchnorm2d,
    conv2d,
    conv_transpose2d,
    cross_entropy,
    detach,
    embedding,
    loss,
    mse_loss,
    relu,
    separable_filter,
    sigmoid,
    straight_through,
    tanh,
)
from pixelvq.autodiff.gradcheck import gradcheck, numeric_grad, relative_error
from pixelvq.autodiff.layers import (
    Activation,
    BatchNorm2d,
    Conv2d,
    ConvTranspose2d,
    Embedding,
    Linear,
    Module,
    Sequential,
)
from pixelvq.autodiff.optim import Adam, AdamState, adam_step
from pixelvq.autodiff.serialize import tensor_from_bytes, tensor_to_bytes
from pixelvq.autodiff.tensor import (
    ComputationTape,
    Tensor,
    backward,
    concat,
    exp,
    log,
    no_grad,
    split,
)

__all__ = [
    "Activation", "Adam", "AdamState", "BatchNorm2d", "ComputationTape", "Conv2d",
    "ConvTranspose2d", "Embedding", "Linear", "Module", "Sequential", "Tensor", "activation",
    "adam_step", "backward", "batchnorm2d", "concat", "conv2d", "conv_transpose2d",
    "cross_entropy", "detach", "embedding", "exp", "gradcheck", "log", "loss", "mse_loss",
    "no_grad", "numeric_grad", "relative_error", "relu", "separable_filter", "sigmoid", "split",
    "straight_through", "tanh", "tensor_from_bytes", "tensor_to_bytes",
]
