"""Parameterised layers and a small module system.

Modules register parameters (trainable :class:`Tensor` leaves), buffers
(plain arrays such as batchnorm running statistics) and child modules in
insertion order, which fixes the order of ``state_dict`` entries and hence
the byte layout of checkpoints.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator, Optional

import numpy as np

from pixelvq.autodiff import functional as F
from pixelvq.autodiff.tensor import Tensor
from pixelvq.errors import DimensionError


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "_children", OrderedDict())
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    # -- traversal -----------------------------------------------------
    def children(self) -> Iterator[tuple]:
        return iter(self._children.items())

    def modules(self, prefix: str = "") -> Iterator[tuple]:
        yield prefix, self
        for name, child in self._children.items():
            yield from child.modules(f"{prefix}.{name}" if prefix else name)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple]:
        for name, p in self._params.items():
            yield (f"{prefix}.{name}" if prefix else name), p
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}.{name}" if prefix else name)

    def parameters(self) -> list:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[tuple]:
        for name, b in self._buffers.items():
            yield (f"{prefix}.{name}" if prefix else name), b
        for name, child in self._children.items():
            yield from child.named_buffers(f"{prefix}.{name}" if prefix else name)

    # -- state ---------------------------------------------------------
    def train(self, mode: bool = True) -> "Module":
        for _, m in self.modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict((n, p.data) for n, p in self.named_parameters())
        state.update(self.named_buffers())
        return state

    def load_state_dict(self, state: dict) -> None:
        expected = self.state_dict()
        missing = set(expected) - set(state)
        extra = set(state) - set(expected)
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, arr in state.items():
            dst = expected[name]
            if dst.shape != np.shape(arr):
                raise DimensionError(f"'{name}': expected shape {dst.shape}, got {np.shape(arr)}")
            dst[...] = arr

    def astype(self, dtype) -> "Module":
        """Cast every parameter and buffer (used for the float64 gradient-check shadow)."""
        for _, m in self.modules():
            for name, p in list(m._params.items()):
                p.data = p.data.astype(dtype)
                p.grad = None
            for name, b in list(m._buffers.items()):
                m.register_buffer(name, b.astype(dtype))
        return self

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def describe(self) -> list:
        """Flat list of ``(path, layer signature)`` for structural comparisons."""
        return [(path, m.signature()) for path, m in self.modules() if not m._children]

    def signature(self) -> str:
        return type(self).__name__


def _he_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> Tensor:
    bound = np.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(np.float32), requires_grad=True)


def _zeros(n: int) -> Tensor:
    return Tensor(np.zeros(n, dtype=np.float32), requires_grad=True)


class Conv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int = 1, padding: int = 0,
                 rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.stride, self.padding, self.kernel = stride, padding, kernel
        self.weight = _he_uniform(rng, (out_ch, in_ch, kernel, kernel), in_ch * kernel * kernel)
        self.bias = _zeros(out_ch)

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def signature(self) -> str:
        o, i, k, _ = self.weight.shape
        return f"Conv2d({i}->{o}, k={k}, s={self.stride}, p={self.padding})"


class ConvTranspose2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int = 1,
                 rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.stride, self.kernel = stride, kernel
        fan_in = in_ch * kernel * kernel // (stride * stride)
        self.weight = _he_uniform(rng, (in_ch, out_ch, kernel, kernel), max(fan_in, 1))
        self.bias = _zeros(out_ch)

    def forward(self, x: Tensor) -> Tensor:
        return F.conv_transpose2d(x, self.weight, self.bias, self.stride)

    def signature(self) -> str:
        i, o, k, _ = self.weight.shape
        return f"ConvTranspose2d({i}->{o}, k={k}, s={self.stride})"


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = F.BN_MOMENTUM, eps: float = F.BN_EPS):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.gamma = Tensor(np.ones(channels, dtype=np.float32), requires_grad=True)
        self.beta = _zeros(channels)
        self.register_buffer("running_mean", np.zeros(channels, dtype=np.float32))
        self.register_buffer("running_var", np.ones(channels, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return F.batchnorm2d(x, self.gamma, self.beta, self.running_mean, self.running_var,
                             self.training, self.momentum, self.eps)

    def signature(self) -> str:
        return f"BatchNorm2d({self.gamma.shape[0]})"


class Activation(Module):
    def __init__(self, kind: str):
        super().__init__()
        if kind not in F.ACTIVATIONS:
            raise ValueError(f"unknown activation '{kind}'")
        self.kind = kind

    def forward(self, x: Tensor) -> Tensor:
        return F.activation(x, self.kind)

    def signature(self) -> str:
        return f"Activation({self.kind})"


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.weight = _he_uniform(rng, (in_features, out_features), in_features)
        self.bias = _zeros(out_features)

    def forward(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias

    def signature(self) -> str:
        i, o = self.weight.shape
        return f"Linear({i}->{o})"


class Embedding(Module):
    def __init__(self, num: int, dim: int, rng: Optional[np.random.Generator] = None, scale: float = 1.0):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.weight = Tensor(rng.uniform(-scale, scale, size=(num, dim)).astype(np.float32),
                             requires_grad=True)

    def forward(self, indices) -> Tensor:
        return F.embedding(self.weight, indices)

    def signature(self) -> str:
        k, d = self.weight.shape
        return f"Embedding({k}x{d})"


class Sequential(Module):
    def __init__(self, *layers, **named_layers):
        super().__init__()
        for i, layer in enumerate(layers):
            setattr(self, str(i), layer)
        for name, layer in named_layers.items():
            setattr(self, name, layer)

    def add(self, name: str, layer: Module) -> None:
        setattr(self, name, layer)

    def __iter__(self):
        return iter(self._children.values())

    def __len__(self) -> int:
        return len(self._children)

    def __getitem__(self, name):
        if isinstance(name, int):
            return list(self._children.values())[name]
        return self._children[name]

    def forward(self, x):
        for layer in self._children.values():
            x = layer(x)
        return x
