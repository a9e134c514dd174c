"""Training loops for the VQ-VAE family and the VAE baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.cluster.vq import kmeans2

from pixelvq.autodiff import functional as F
from pixelvq.autodiff.optim import Adam
from pixelvq.autodiff.tensor import Tensor, no_grad
from pixelvq.data.sprites import build_epoch, split_images
from pixelvq.errors import TrainingDiverged
from pixelvq.vqvae.geometry import HyperParams, TrainConfig
from pixelvq.vqvae.model import PixelVQVAE
from pixelvq.vqvae.vae import build_vae_baseline


@dataclass
class TrainResult:
    model: object
    config: TrainConfig
    seed: int
    history: list = field(default_factory=list)
    steps: int = 0
    best_epoch: Optional[int] = None
    usage_counts: Optional[np.ndarray] = None

    def curve(self, key: str) -> list:
        return [row[key] for row in self.history]


def _check_finite(value: float, epoch: int, batch: int, lr: float) -> None:
    if not math.isfinite(value):
        raise TrainingDiverged(
            f"non-finite loss {value} at epoch {epoch}, batch {batch} (learning rate {lr:g})"
        )


def _val_mse(model, corpus, image_size: int, seed: int, batch_size: int) -> Optional[float]:
    val = split_images(corpus, image_size, "val", seed)
    if len(val) == 0:
        return None
    was = model.training
    model.eval()
    total = 0.0
    try:
        with no_grad():
            for start in range(0, len(val), batch_size):
                x = val.pixels[start : start + batch_size]
                recon = model.reconstruct(x)
                total += float(np.sum((recon.astype(np.float64) - x) ** 2))
    finally:
        model.train(was)
    return total / val.pixels.size


def fit(model, corpus, config: TrainConfig, seed: int, step_fn: Callable,
        epoch_stats: Optional[Callable] = None, on_epoch: Optional[Callable] = None) -> TrainResult:
    """Shared epoch loop: Adam, NaN guard, step budget, best-validation restore.

    ``step_fn(model, x)`` returns ``(total_loss_tensor, {name: float})``.
    Batches of a single image are skipped because batchnorm needs two.
    """
    opt = Adam(model.parameters(), lr=config.learning_rate)
    result = TrainResult(model, config, seed)
    best, best_state, best_usage = math.inf, None, None
    codebook = getattr(model, "codebook", None)
    image_size = model.hyper.I
    for epoch in range(config.epochs):
        if config.max_steps is not None and result.steps >= config.max_steps:
            break
        model.train()
        if codebook is not None:
            codebook.reset_usage()
        sums: dict = {}
        n_batches = 0
        batches = build_epoch(corpus, image_size, config.batch_size, "train", seed, epoch,
                              config.augment, config.resample)
        for b, batch in enumerate(batches):
            if config.max_steps is not None and result.steps >= config.max_steps:
                break
            if len(batch) < 2:
                continue
            opt.zero_grad()
            total, parts = step_fn(model, batch.pixels)
            _check_finite(float(total.data), epoch, b, config.learning_rate)
            total.backward()
            opt.step()
            result.steps += 1
            n_batches += 1
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v
        if n_batches == 0:
            break
        row = {"epoch": epoch, "steps": result.steps}
        row.update({k: v / n_batches for k, v in sums.items()})
        if epoch_stats is not None:
            row.update(epoch_stats(model))
        val = _val_mse(model, corpus, image_size, seed, config.batch_size)
        row["val_mse"] = val
        result.history.append(row)
        if on_epoch is not None:
            on_epoch(row)
        score = val if val is not None else row.get("recon", math.inf)
        if score < best:
            best, result.best_epoch = score, epoch
            best_state = model.state_dict()
            best_usage = codebook.usage_counts.copy() if codebook is not None else None
    if best_state is not None:
        model.load_state_dict(best_state)
        if codebook is not None:
            codebook.usage_counts[:] = best_usage
    if codebook is not None:
        result.usage_counts = codebook.usage_counts.copy()
    model.eval()
    return result


def init_codebook_from_data(model: PixelVQVAE, x: np.ndarray, seed: int) -> None:
    """Replace the codebook with k-means centroids of the encoder outputs for ``x``."""
    state = [buf.copy() for _, buf in model.named_buffers()]
    with no_grad():
        z = model.encoder(x).data
    # the probe pass must not advance batchnorm running statistics
    for (_, buf), saved in zip(model.named_buffers(), state):
        buf[...] = saved
    # flat backgrounds repeat one vector many times; cluster distinct rows only
    flat = np.unique(z.transpose(0, 2, 3, 1).reshape(-1, z.shape[1]).astype(np.float64), axis=0)
    K = model.hyper.K
    rng = np.random.default_rng([seed, 2])
    if len(flat) <= K:
        rows = flat[rng.choice(len(flat), size=K, replace=True)]
        rows[len(flat):] += rng.normal(0.0, 1e-3, size=(K - len(flat), flat.shape[1]))
        rows[: len(flat)] = flat
    else:
        rows, _ = kmeans2(flat, K, iter=20, minit="++", seed=rng)
    model.codebook.embeddings.data[...] = rows.astype(model.codebook.embeddings.dtype)


def _vq_step(config: TrainConfig, seed: int):
    done = [0]

    def step(model, x):
        if done[0] < config.warmup_steps:
            # autoencoder warm-up: decode z_e directly, quantizer bypassed
            recon = F.mse_loss(model.decoder(model.encoder(Tensor(x))), Tensor(x))
            done[0] += 1
            return recon, {"recon": float(recon.data), "codebook": 0.0, "commitment": 0.0,
                           "total": float(recon.data)}
        if done[0] == config.warmup_steps and config.codebook_init == "data":
            init_codebook_from_data(model, x, seed)
        done[0] += 1
        out = model(Tensor(x))
        parts = model.loss(x, out, config.beta)
        return parts.total, parts.values()

    return step


def train_vqvae(corpus, hyper: HyperParams, config: Optional[TrainConfig] = None, seed: int = 0,
                model: Optional[PixelVQVAE] = None, on_epoch: Optional[Callable] = None) -> TrainResult:
    """Train a (Pixel) VQ-VAE; per-epoch rows carry losses, perplexity and dead codes.

    ``config.warmup_steps`` first trains encoder and decoder as a plain
    autoencoder; ``config.codebook_init == "data"`` then seeds the codebook
    with k-means centroids of the encoder outputs before the first VQ step.
    """
    config = config or TrainConfig()
    model = model or PixelVQVAE(hyper, seed)

    def stats(m):
        return {"perplexity": m.codebook.perplexity(), "dead_codes": m.codebook.dead_codes()}

    return fit(model, corpus, config, seed, _vq_step(config, seed), stats, on_epoch)


def train_vae(corpus, hyper: HyperParams, variant: str = "plain", config: Optional[TrainConfig] = None,
              seed: int = 0, on_epoch: Optional[Callable] = None) -> TrainResult:
    model, config = build_vae_baseline(variant, hyper, config, seed)

    def step(m, x):
        out = m(Tensor(x))
        parts = m.loss(x, out, config.loss_mix, config.kl_weight)
        return parts.total, parts.values()

    return fit(model, corpus, config, seed, step, None, on_epoch)
