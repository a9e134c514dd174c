"""Raster-order ancestral sampling from a trained prior."""

from __future__ import annotations

import numpy as np

from pixelvq.prior.model import ConditionVector, PixelCNN


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def sample(prior: PixelCNN, condition, temperature: float = 1.0, seed: int = 0, n: int = 1) -> np.ndarray:
    """Draw ``n`` grids of shape ``(G, G)`` for one condition.

    ``temperature == 0`` selects the argmax at every position (greedy).
    """
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    cfg = prior.config
    G = cfg.grid_side
    cond = ConditionVector.of(condition).validate(cfg.condition_dims)
    conds = np.tile(np.array(cond.as_tuple(), dtype=np.int64), (n, 1))
    rng = np.random.default_rng(seed)
    grid = np.zeros((n, G, G), dtype=np.int64)
    was = prior.training
    prior.eval()
    try:
        for q in range(G * G):
            r, c = divmod(q, G)
            logits = prior.logits(grid, conds)[:, :, r, c]
            if temperature == 0:
                grid[:, r, c] = np.argmax(logits, axis=1)
            else:
                p = softmax(logits.astype(np.float64) / temperature, axis=1)
                u = rng.random((n, 1))
                grid[:, r, c] = np.minimum((p.cumsum(axis=1) < u).sum(axis=1), cfg.K - 1)
    finally:
        prior.train(was)
    return grid
