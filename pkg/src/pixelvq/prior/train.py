"""Encoding-grid datasets and the prior's training loop."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from pixelvq.autodiff.optim import Adam
from pixelvq.data.sprites import build_epoch
from pixelvq.errors import CompatibilityError, ConfigError, TrainingDiverged
from pixelvq.prior.model import PixelCNN, PriorConfig


@dataclass
class PriorTrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 25
    max_steps: Optional[int] = None
    augment: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PriorTrainConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown prior train keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class PriorTrainResult:
    prior: PixelCNN
    config: PriorTrainConfig
    seed: int
    history: list = field(default_factory=list)
    steps: int = 0

    def curve(self, key: str = "loss") -> list:
        return [row[key] for row in self.history]


def encode_dataset(vqvae, corpus, split: str = "train", augment: bool = False, seed: int = 0,
                   batch_size: int = 64) -> tuple:
    """Encode one epoch of ``split`` into ``(grids[N, G, G], conditions[N, 3])``."""
    grids, conds = [], []
    vqvae.eval()
    for batch in build_epoch(corpus, vqvae.hyper.I, batch_size, split, seed, 0, augment):
        grids.append(vqvae.encode(batch.pixels))
        conds.append(batch.conditions)
    if not grids:
        G = vqvae.hyper.G
        return np.zeros((0, G, G), np.int64), np.zeros((0, 3), np.int64)
    return np.concatenate(grids), np.concatenate(conds)


def fit_prior(prior: PixelCNN, grids: np.ndarray, conditions: np.ndarray,
              config: Optional[PriorTrainConfig] = None, seed: int = 0,
              on_epoch: Optional[Callable] = None) -> PriorTrainResult:
    """Minimise mean per-position cross-entropy with Adam, reshuffling every epoch."""
    config = config or PriorTrainConfig()
    grids = np.asarray(grids, dtype=np.int64)
    conditions = np.asarray(conditions, dtype=np.int64).reshape(-1, 3)
    if len(grids) != len(conditions):
        raise ValueError(f"{len(grids)} grids but {len(conditions)} conditions")
    if grids.size and grids.max() >= prior.config.K:
        raise CompatibilityError(f"grid holds encoding {grids.max()} but prior K={prior.config.K}")
    opt = Adam(prior.parameters(), lr=config.learning_rate)
    result = PriorTrainResult(prior, config, seed)
    prior.train()
    for epoch in range(config.epochs):
        if not len(grids) or (config.max_steps is not None and result.steps >= config.max_steps):
            break
        order = np.random.default_rng([seed, epoch]).permutation(len(grids))
        total, n = 0.0, 0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            if config.max_steps is not None and result.steps >= config.max_steps:
                break
            idx = order[start : start + config.batch_size]
            opt.zero_grad()
            loss = prior.loss(grids[idx], conditions[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite prior loss at epoch {epoch}, batch {b} (learning rate {config.learning_rate:g})"
                )
            loss.backward()
            opt.step()
            result.steps += 1
            total += value
            n += 1
        row = {"epoch": epoch, "steps": result.steps, "loss": total / max(n, 1)}
        result.history.append(row)
        if on_epoch is not None:
            on_epoch(row)
    prior.eval()
    return result


def prior_config_for(vqvae, corpus, **arch) -> PriorConfig:
    return PriorConfig(K=vqvae.hyper.K, grid_side=vqvae.hyper.G, condition_dims=corpus.condition_dims,
                       **arch)


def train_prior(vqvae, corpus, prior_config: Optional[PriorConfig] = None,
                config: Optional[PriorTrainConfig] = None, seed: int = 0,
                on_epoch: Optional[Callable] = None) -> PriorTrainResult:
    """Encode the training split with ``vqvae`` and fit a prior on the grids."""
    from pixelvq.checkpoint import Checkpoint

    if isinstance(vqvae, Checkpoint):
        vqvae = vqvae.build_model()
    config = config or PriorTrainConfig()
    prior_config = prior_config or prior_config_for(vqvae, corpus)
    if prior_config.K != vqvae.hyper.K:
        raise CompatibilityError(
            f"prior K={prior_config.K} does not match the VQ-VAE codebook K={vqvae.hyper.K}"
        )
    if prior_config.grid_side != vqvae.hyper.G:
        raise CompatibilityError(
            f"prior grid side {prior_config.grid_side} does not match VQ-VAE grid side {vqvae.hyper.G}"
        )
    if tuple(prior_config.condition_dims) != tuple(corpus.condition_dims):
        raise CompatibilityError(
            f"prior condition sizes {prior_config.condition_dims} differ from corpus {corpus.condition_dims}"
        )
    grids, conds = encode_dataset(vqvae, corpus, "train", config.augment, seed)
    prior = PixelCNN(prior_config, seed)
    return fit_prior(prior, grids, conds, config, seed, on_epoch)
