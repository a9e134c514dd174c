"""Gated conditional PixelCNN over encoding grids (single masked stack)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from pixelvq.autodiff import functional as F
from pixelvq.autodiff.layers import Conv2d, Embedding, Linear, Module, _he_uniform, _zeros
from pixelvq.autodiff.tensor import Tensor, concat, no_grad, split
from pixelvq.errors import ConfigError, RangeError

COND_WIDTH = 64


@dataclass(frozen=True)
class PriorConfig:
    """Architecture of the prior.

    Defaults follow the reference setting of 7 gated layers with 256 3x3
    filters; ``K`` and ``grid_side`` come from the paired VQ-VAE.
    ``positional`` adds a learned per-position input embedding, which lets the
    model tell apart positions whose visible raster past is identical.
    """

    K: int = 256
    grid_side: int = 32
    condition_dims: tuple = (1, 1, 1)
    n_layers: int = 7
    n_filters: int = 256
    kernel: int = 3
    cond_width: int = COND_WIDTH
    positional: bool = False

    def __post_init__(self):
        object.__setattr__(self, "condition_dims", tuple(int(d) for d in self.condition_dims))
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"kernel must be odd, got {self.kernel}")
        if self.n_layers < 1:
            raise ConfigError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.K < 2 or self.grid_side < 1 or self.n_filters < 1:
            raise ConfigError("K >= 2, grid_side >= 1 and n_filters >= 1 are required")
        if len(self.condition_dims) != 3 or min(self.condition_dims) < 1:
            raise ConfigError(f"condition_dims must be three positive sizes, got {self.condition_dims}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["condition_dims"] = list(self.condition_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PriorConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown prior config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ConditionVector:
    shape_id: int
    type1_id: int
    type2_id: int

    def as_tuple(self) -> tuple:
        return (self.shape_id, self.type1_id, self.type2_id)

    def validate(self, dims: Sequence[int]) -> "ConditionVector":
        for name, v, n in zip(("shape", "type1", "type2"), self.as_tuple(), dims):
            if not 0 <= v < n:
                raise RangeError(f"{name} id {v} outside vocabulary of size {n}")
        return self

    @classmethod
    def of(cls, value) -> "ConditionVector":
        if isinstance(value, ConditionVector):
            return value
        a, b, c = (int(v) for v in value)
        return cls(a, b, c)


def causal_mask(kernel: int, mask_type: str, in_ch: int = 1, out_ch: int = 1) -> np.ndarray:
    """``[out, in, k, k]`` mask keeping the raster past (and the centre for type B)."""
    if kernel % 2 == 0:
        raise ValueError(f"masked convolution needs an odd kernel, got {kernel}")
    if mask_type not in ("A", "B"):
        raise ValueError(f"mask type must be 'A' or 'B', got {mask_type!r}")
    c = kernel // 2
    m = np.zeros((kernel, kernel), dtype=np.float32)
    m[:c, :] = 1.0
    m[c, :c] = 1.0
    if mask_type == "B":
        m[c, c] = 1.0
    return np.broadcast_to(m, (out_ch, in_ch, kernel, kernel)).copy()


def masked_conv(x: Tensor, weight: Tensor, mask: np.ndarray, bias: Optional[Tensor] = None) -> Tensor:
    """Same-padded convolution with ``weight * mask``."""
    k = weight.shape[-1]
    w = weight * Tensor(mask.astype(weight.dtype))
    return F.conv2d(x, w, bias, stride=1, padding=k // 2)


class MaskedConv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, mask_type: str, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        mask = causal_mask(kernel, mask_type, in_ch, out_ch)
        object.__setattr__(self, "mask_type", mask_type)
        self.weight = _he_uniform(rng, (out_ch, in_ch, kernel, kernel), in_ch * int(mask[0, 0].sum()))
        self.bias = _zeros(out_ch)
        self.register_buffer("mask", mask)

    def forward(self, x: Tensor) -> Tensor:
        return masked_conv(x, self.weight, self.mask, self.bias)

    def active_taps(self) -> int:
        return int(self.mask[0, 0].sum())

    def signature(self) -> str:
        o, i, k, _ = self.weight.shape
        return f"MaskedConv2d[{self.mask_type}]({i}->{o}, k={k})"


def gated_block(x: Tensor, conv: MaskedConv2d, cond_proj: Optional[Tensor] = None) -> Tensor:
    """``tanh(Wf*x + Vf h) * sigmoid(Wg*x + Vg h)``; ``cond_proj`` is ``(N, 2F)``."""
    pre = conv(x)
    if cond_proj is not None:
        pre = pre + cond_proj.reshape(cond_proj.shape[0], cond_proj.shape[1], 1, 1)
    f, g = split(pre, 2, axis=1)
    return F.tanh(f) * F.sigmoid(g)


class GatedLayer(Module):
    """One gated layer: masked conv to ``2F`` channels, condition bias, gate, optional residual."""

    def __init__(self, in_ch: int, filters: int, kernel: int, mask_type: str, cond_in: int, rng,
                 residual: bool):
        super().__init__()
        object.__setattr__(self, "residual", residual)
        self.conv = MaskedConv2d(in_ch, 2 * filters, kernel, mask_type, rng)
        self.cond = Linear(cond_in, 2 * filters, rng)
        if residual:
            self.out = Conv2d(filters, filters, 1, 1, rng=rng)

    def forward(self, x: Tensor, h: Tensor) -> Tensor:
        y = gated_block(x, self.conv, self.cond(h))
        if self.residual:
            y = x + self.out(y)
        return y


class PixelCNN(Module):
    """Conditional PixelCNN returning ``(N, K, G, G)`` logits for an index grid."""

    kind = "pixelcnn"

    def __init__(self, config: PriorConfig, seed: int = 0):
        super().__init__()
        object.__setattr__(self, "config", config)
        rng = np.random.default_rng(seed)
        Fn, k = config.n_filters, config.kernel
        self.embed = Embedding(config.K, Fn, rng)
        if config.positional:
            G = config.grid_side
            self.pos = Tensor(rng.uniform(-1.0, 1.0, size=(1, Fn, G, G)).astype(np.float32),
                              requires_grad=True)
        self.cond_embed = [Embedding(n, config.cond_width, rng) for n in config.condition_dims]
        for i, e in enumerate(self.cond_embed):
            setattr(self, f"cond{i}", e)
        cond_in = 3 * config.cond_width
        self.layers = []
        for i in range(config.n_layers):
            layer = GatedLayer(Fn, Fn, k, "A" if i == 0 else "B", cond_in, rng, residual=i > 0)
            setattr(self, f"layer{i}", layer)
            self.layers.append(layer)
        self.head1 = Conv2d(Fn, Fn, 1, 1, rng=rng)
        self.head2 = Conv2d(Fn, config.K, 1, 1, rng=rng)
        # small output weights keep the untrained prior close to uniform (loss ~ ln K)
        self.head2.weight.data *= 0.1

    def __setattr__(self, name, value):
        if isinstance(value, list):
            object.__setattr__(self, name, value)
        else:
            super().__setattr__(name, value)

    def condition_embedding(self, conditions) -> Tensor:
        conditions = np.asarray(conditions, dtype=np.int64).reshape(-1, 3)
        for j, (e, n) in enumerate(zip(self.cond_embed, self.config.condition_dims)):
            col = conditions[:, j]
            if col.min() < 0 or col.max() >= n:
                raise RangeError(f"condition attribute {j} outside vocabulary of size {n}")
        return concat([e(conditions[:, j]) for j, e in enumerate(self.cond_embed)], axis=1)

    def forward(self, grids, conditions) -> Tensor:
        grids = np.asarray(grids, dtype=np.int64)
        if grids.ndim == 2:
            grids = grids[None]
        G = self.config.grid_side
        if grids.shape[1:] != (G, G):
            raise ConfigError(f"prior expects {G}x{G} grids, got {grids.shape[1:]}")
        h = self.condition_embedding(conditions)
        x = self.embed(grids).transpose(0, 3, 1, 2)
        if self.config.positional:
            x = x + self.pos
        for layer in self.layers:
            x = layer(x, h)
        return self.head2(F.relu(self.head1(F.relu(x))))

    def loss(self, grids, conditions) -> Tensor:
        return F.cross_entropy(self(grids, conditions), np.asarray(grids, dtype=np.int64).reshape(
            -1, self.config.grid_side, self.config.grid_side))

    def logits(self, grids, conditions) -> np.ndarray:
        with no_grad():
            return self(grids, conditions).data

    def masked_convs(self) -> list:
        return [(name, m) for name, m in self.modules() if isinstance(m, MaskedConv2d)]
