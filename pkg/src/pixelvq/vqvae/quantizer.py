"""Codebook, nearest-neighbour quantisation and the VQ objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from pixelvq.autodiff import functional as F
from pixelvq.autodiff.layers import Module
from pixelvq.autodiff.tensor import Tensor
from pixelvq.errors import DimensionError, RangeError
from pixelvq.metrics import perplexity_from_counts

_CHUNK_ELEMENTS = 1 << 22


def nearest_codes(z: np.ndarray, embeddings: np.ndarray) -> np.ndarray:
    """Index of the closest row of ``embeddings`` for each row of ``z``.

    Distances are formed as explicit squared differences (no ``|a|^2 - 2ab +
    |b|^2`` expansion) so equal distances compare equal, and ``argmin``
    resolves ties towards the lowest index.
    """
    k, d = embeddings.shape
    out = np.empty(len(z), dtype=np.int64)
    step = max(1, _CHUNK_ELEMENTS // max(k * d, 1))
    for start in range(0, len(z), step):
        diff = z[start : start + step, None, :] - embeddings[None, :, :]
        out[start : start + step] = np.argmin(np.einsum("pkd,pkd->pk", diff, diff), axis=1)
    return out


class Codebook(Module):
    """``K x D`` embedding table plus usage counters."""

    def __init__(self, K: int, D: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.embeddings = Tensor(rng.uniform(-1.0 / K, 1.0 / K, size=(K, D)).astype(np.float32),
                                 requires_grad=True)
        object.__setattr__(self, "usage_counts", np.zeros(K, dtype=np.int64))

    @property
    def K(self) -> int:
        return self.embeddings.shape[0]

    @property
    def D(self) -> int:
        return self.embeddings.shape[1]

    def reset_usage(self) -> None:
        self.usage_counts[:] = 0

    def lookup(self, indices: np.ndarray) -> Tensor:
        """Embeddings for an ``(N, G, G)`` index grid as an ``(N, D, G, G)`` tensor."""
        indices = np.asarray(indices)
        if indices.size and (indices.min() < 0 or indices.max() >= self.K):
            raise RangeError(f"encoding outside [0, {self.K})")
        return F.embedding(self.embeddings, indices).transpose(0, 3, 1, 2)

    def perplexity(self) -> float:
        return perplexity_from_counts(self.usage_counts)

    def dead_codes(self) -> int:
        return int((self.usage_counts == 0).sum())

    def signature(self) -> str:
        return f"Codebook({self.K}x{self.D})"


def quantize(z_e: Tensor, codebook: Codebook, count: bool = True) -> tuple:
    """Snap each spatial vector of ``z_e[N, D, G, G]`` to its nearest codebook row.

    Returns ``(z_q, indices)``; ``z_q`` carries gradient to the codebook only.
    """
    if z_e.ndim != 4 or z_e.shape[1] != codebook.D:
        raise DimensionError(f"quantize: expected (N, {codebook.D}, G, G), got {z_e.shape}")
    n, d, h, w = z_e.shape
    flat = z_e.data.transpose(0, 2, 3, 1).reshape(-1, d)
    idx = nearest_codes(flat, codebook.embeddings.data).reshape(n, h, w)
    if count:
        codebook.usage_counts += np.bincount(idx.ravel(), minlength=codebook.K)
    return codebook.lookup(idx), idx


def straight_through(z_e: Tensor, z_q: Tensor) -> Tensor:
    return F.straight_through(z_e, z_q)


@dataclass
class VQLoss:
    recon: Tensor
    codebook: Tensor
    commitment: Tensor

    @property
    def total(self) -> Tensor:
        return self.recon + self.codebook + self.commitment

    def values(self) -> dict:
        return {
            "recon": float(self.recon.data),
            "codebook": float(self.codebook.data),
            "commitment": float(self.commitment.data),
            "total": float(self.recon.data + self.codebook.data + self.commitment.data),
        }


def vq_loss(x: Tensor, x_hat: Tensor, z_e: Tensor, z_q: Tensor, beta: float = 0.25) -> VQLoss:
    """Reconstruction MSE, codebook term ``|sg(z_e) - z_q|^2`` and ``beta * |z_e - sg(z_q)|^2``."""
    recon = F.mse_loss(x_hat, x if isinstance(x, Tensor) else Tensor(x, dtype=x_hat.dtype))
    codebook = F.mse_loss(z_q, F.detach(z_e))
    commitment = F.mse_loss(z_e, F.detach(z_q)) * beta
    return VQLoss(recon, codebook, commitment)
