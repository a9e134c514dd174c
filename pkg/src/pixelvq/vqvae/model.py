"""Encoder/decoder builders and the (Pixel) VQ-VAE model.

The encoder is ``[PixelSight] + L scaling blocks + [Adapter]``; the decoder
mirrors it. Disabling both enhancements yields the plain VQ-VAE, whose final
scaling block must then emit ``D`` channels itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from pixelvq.autodiff.layers import (
    Activation,
    BatchNorm2d,
    Conv2d,
    ConvTranspose2d,
    Module,
    Sequential,
)
from pixelvq.autodiff.tensor import Tensor, no_grad
from pixelvq.vqvae.geometry import HyperParams
from pixelvq.vqvae.quantizer import Codebook, VQLoss, quantize, straight_through, vq_loss


def _conv_block(cin: int, cout: int, kernel: int, stride: int, rng, transposed: bool = False,
                final: bool = False) -> Sequential:
    conv = (ConvTranspose2d if transposed else Conv2d)(cin, cout, kernel, stride, rng=rng)
    if final:
        return Sequential(conv=conv, act=Activation("sigmoid"))
    return Sequential(conv=conv, bn=BatchNorm2d(cout), act=Activation("relu"))


def build_encoder(hyper: HyperParams, rng: Optional[np.random.Generator] = None) -> Sequential:
    hyper.check_capability()
    rng = rng or np.random.default_rng(0)
    enc = Sequential()
    ch = 3
    if hyper.pixelsight:
        width = hyper.pixelsight_width()
        enc.add("pixelsight", _conv_block(ch, width, 1, 1, rng))
        ch = width
    for i, width in enumerate(hyper.block_widths()):
        enc.add(f"block{i}", _conv_block(ch, width, 2, 2, rng))
        ch = width
    if hyper.adapter:
        enc.add("adapter", Sequential(conv=Conv2d(ch, hyper.D, 1, 1, rng=rng), act=Activation("identity")))
    return enc


def build_decoder(hyper: HyperParams, rng: Optional[np.random.Generator] = None) -> Sequential:
    hyper.check_capability()
    rng = rng or np.random.default_rng(0)
    dec = Sequential()
    widths = hyper.block_widths()
    ch = hyper.D
    if hyper.adapter:
        top = widths[-1] if widths else hyper.pixelsight_width()
        dec.add("adapter", Sequential(conv=Conv2d(ch, top, 1, 1, rng=rng), act=Activation("identity")))
        ch = top
    for i in reversed(range(hyper.L)):
        if i > 0:
            out = widths[i - 1]
        else:
            out = hyper.pixelsight_width() if hyper.pixelsight else 3
        final = i == 0 and not hyper.pixelsight
        dec.add(f"block{i}", _conv_block(ch, out, 2, 2, rng, transposed=True, final=final))
        ch = out
    if hyper.pixelsight:
        dec.add("pixelsight", _conv_block(ch, 3, 1, 1, rng, transposed=True, final=True))
    return dec


@dataclass
class VQOutput:
    x_hat: Tensor
    z_e: Tensor
    z_q: Tensor
    indices: np.ndarray


class PixelVQVAE(Module):
    """VQ-VAE with optional PixelSight and Adapter enhancements."""

    kind = "vqvae"

    def __init__(self, hyper: HyperParams, seed: int = 0):
        super().__init__()
        object.__setattr__(self, "hyper", hyper)
        rng = np.random.default_rng(seed)
        self.encoder = build_encoder(hyper, rng)
        self.codebook = Codebook(hyper.K, hyper.D, rng)
        self.decoder = build_decoder(hyper, rng)

    def forward(self, x) -> VQOutput:
        x = x if isinstance(x, Tensor) else Tensor(x)
        z_e = self.encoder(x)
        # a frozen model must stay immutable, so usage is only tallied while training
        z_q, idx = quantize(z_e, self.codebook, count=self.training)
        x_hat = self.decoder(straight_through(z_e, z_q))
        return VQOutput(x_hat, z_e, z_q, idx)

    def loss(self, x, out: VQOutput, beta: float = 0.25) -> VQLoss:
        return vq_loss(x, out.x_hat, out.z_e, out.z_q, beta)

    def encode(self, images) -> np.ndarray:
        """``(N, G, G)`` integer encodings of ``images[N, 3, I, I]``."""
        x = images if isinstance(images, Tensor) else Tensor(images)
        with no_grad():
            z_e = self.encoder(x)
            _, idx = quantize(z_e, self.codebook, count=False)
        return idx

    def decode(self, indices) -> np.ndarray:
        """Images for an ``(N, G, G)`` (or single ``(G, G)``) encoding grid."""
        indices = np.asarray(getattr(indices, "indices", indices))
        single = indices.ndim == 2
        if single:
            indices = indices[None]
        with no_grad():
            out = self.decoder(self.codebook.lookup(indices)).data
        return out[0] if single else out

    def reconstruct(self, images) -> np.ndarray:
        with no_grad():
            return self.forward(images).x_hat.data


def param_count(model: Module) -> int:
    """Trainable scalars: conv weights and biases, batchnorm affine, codebook."""
    return model.num_parameters()


def build_vqvae_baseline(hyper: HyperParams, seed: int = 0) -> PixelVQVAE:
    """The plain VQ-VAE: same geometry with both enhancements disabled."""
    return PixelVQVAE(hyper.replace(pixelsight=False, adapter=False), seed)
