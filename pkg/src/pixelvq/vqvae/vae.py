"""Continuous-latent baselines: the plain VAE and the PixelSight-augmented Pixel VAE."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from pixelvq.autodiff import functional as F
from pixelvq.autodiff.layers import Linear, Module, Sequential
from pixelvq.autodiff.tensor import Tensor, exp, no_grad
from pixelvq.metrics import ssim
from pixelvq.vqvae.geometry import HyperParams, TrainConfig
from pixelvq.vqvae.model import _conv_block

N_BLOCKS = 4
PIXEL_VAE_KL_WEIGHT = 0.1


def kl_divergence(mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mu, exp(logvar)) || N(0, 1)) averaged over batch and latent dimensions."""
    return ((mu * mu + exp(logvar) - logvar - 1.0) * 0.5).mean()


@dataclass
class VAELoss:
    recon: Tensor
    kl: Tensor
    kl_weight: float

    @property
    def total(self) -> Tensor:
        return self.recon + self.kl * self.kl_weight

    def values(self) -> dict:
        return {
            "recon": float(self.recon.data),
            "kl": float(self.kl.data),
            "total": float(self.recon.data + self.kl_weight * self.kl.data),
        }


class VAE(Module):
    """Mirrored 4-block convolutional VAE with a dense Gaussian latent.

    ``hyper.F`` is the width of the last encoder block (earlier blocks halve),
    ``hyper.D`` the latent size. The ``pixel_vae`` variant adds a PixelSight
    block at the encoder head and a transposed one at the decoder tail.
    """

    kind = "vae"

    def __init__(self, hyper: HyperParams, variant: str = "plain", seed: int = 0):
        super().__init__()
        if variant not in ("plain", "pixel_vae"):
            raise ValueError(f"unknown VAE variant '{variant}'")
        if hyper.I % 2**N_BLOCKS:
            raise ValueError(f"VAE needs I divisible by {2**N_BLOCKS}, got {hyper.I}")
        object.__setattr__(self, "hyper", hyper)
        object.__setattr__(self, "variant", variant)
        object.__setattr__(self, "kind", variant if variant == "pixel_vae" else "vae")
        object.__setattr__(self, "_rng", np.random.default_rng([seed, 1]))
        rng = np.random.default_rng(seed)
        pixel = variant == "pixel_vae"
        widths = [max(1, hyper.F >> (N_BLOCKS - 1 - i)) for i in range(N_BLOCKS)]
        side = hyper.I // 2**N_BLOCKS
        flat = widths[-1] * side * side

        self.encoder = Sequential()
        ch = 3
        if pixel:
            self.encoder.add("pixelsight", _conv_block(3, widths[0], 1, 1, rng))
            ch = widths[0]
        for i, w in enumerate(widths):
            self.encoder.add(f"block{i}", _conv_block(ch, w, 2, 2, rng))
            ch = w
        self.to_mu = Linear(flat, hyper.D, rng)
        self.to_logvar = Linear(flat, hyper.D, rng)
        self.from_latent = Linear(hyper.D, flat, rng)
        self.decoder = Sequential()
        for i in reversed(range(N_BLOCKS)):
            out = widths[i - 1] if i > 0 else (widths[0] if pixel else 3)
            final = i == 0 and not pixel
            self.decoder.add(f"block{i}", _conv_block(ch, out, 2, 2, rng, transposed=True, final=final))
            ch = out
        if pixel:
            self.decoder.add("pixelsight", _conv_block(ch, 3, 1, 1, rng, transposed=True, final=True))
        object.__setattr__(self, "_latent_shape", (widths[-1], side, side))

    def encode_stats(self, x: Tensor) -> tuple:
        h = self.encoder(x)
        h = h.reshape(h.shape[0], -1)
        return self.to_mu(h), self.to_logvar(h)

    def decode_latent(self, z: Tensor) -> Tensor:
        h = self.from_latent(z)
        return self.decoder(h.reshape((z.shape[0],) + self._latent_shape))

    def forward(self, x, noise: Optional[np.ndarray] = None) -> tuple:
        """Returns ``(x_hat, mu, logvar)``; eval mode decodes the mean."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        mu, logvar = self.encode_stats(x)
        if self.training or noise is not None:
            if noise is None:
                noise = self._rng.standard_normal(mu.shape).astype(mu.dtype)
            z = mu + exp(logvar * 0.5) * Tensor(noise, dtype=mu.dtype)
        else:
            z = mu
        return self.decode_latent(z), mu, logvar

    def loss(self, x, out: tuple, loss_mix: str = "mse", kl_weight: float = 1.0) -> VAELoss:
        x_hat, mu, logvar = out
        x = x if isinstance(x, Tensor) else Tensor(x, dtype=x_hat.dtype)
        recon = F.mse_loss(x_hat, x)
        if loss_mix == "mse_plus_ssim":
            recon = recon + (1.0 - ssim(x_hat, x))
        return VAELoss(recon, kl_divergence(mu, logvar), kl_weight)

    def reconstruct(self, images) -> np.ndarray:
        with no_grad():
            was = self.training
            self.eval()
            try:
                return self.forward(images)[0].data
            finally:
                self.train(was)


def build_vae_baseline(variant: str, hyper: HyperParams, config: Optional[TrainConfig] = None,
                       seed: int = 0) -> tuple:
    """Return ``(model, config)``; the Pixel VAE pins MSE+SSIM and a 0.1 KL weight."""
    config = config or TrainConfig()
    if variant == "pixel_vae":
        config = replace(config, loss_mix="mse_plus_ssim", kl_weight=PIXEL_VAE_KL_WEIGHT)
    return VAE(hyper, variant, seed), config
