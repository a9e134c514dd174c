"""Pixel VQ-VAE, its plain baseline, the VAE baselines and their training loop."""

from pixelvq.vqvae.geometry import RESOLUTIONS, HyperParams, TrainConfig, resolve_geometry
from pixelvq.vqvae.model import (
    PixelVQVAE,
    VQOutput,
    build_decoder,
    build_encoder,
    build_vqvae_baseline,
    param_count,
)
from pixelvq.vqvae.quantizer import Codebook, VQLoss, nearest_codes, quantize, straight_through, vq_loss
from pixelvq.vqvae.train import TrainResult, fit, train_vae, train_vqvae
from pixelvq.vqvae.vae import VAE, VAELoss, build_vae_baseline, kl_divergence

__all__ = [
    "RESOLUTIONS", "HyperParams", "TrainConfig", "resolve_geometry", "PixelVQVAE", "VQOutput",
    "build_decoder", "build_encoder", "build_vqvae_baseline", "param_count", "Codebook", "VQLoss",
    "nearest_codes", "quantize", "straight_through", "vq_loss", "TrainResult", "fit", "train_vae",
    "train_vqvae", "VAE", "VAELoss", "build_vae_baseline", "kl_divergence",
]
