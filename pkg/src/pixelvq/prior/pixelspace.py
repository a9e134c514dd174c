"""Pixel-space PixelCNN: the prior run directly on quantized RGB pixels.

Each pixel becomes one class out of ``levels**3`` (uniform per-channel
quantization, red as the most significant digit), so the ordinary
``PixelCNN`` models an ``I x I`` grid with no VQ-VAE in between. This is the
configuration that reportedly fails to converge and produces blank images;
it is exposed for experiments, with no promise that training succeeds.
"""

from __future__ import annotations

import numpy as np

from pixelvq.prior.model import PriorConfig


def pixel_space_config(image_size: int, condition_dims, levels: int = 4, **arch) -> PriorConfig:
    if levels < 2:
        raise ValueError("levels must be >= 2")
    return PriorConfig(K=levels**3, grid_side=image_size, condition_dims=tuple(condition_dims), **arch)


def pixels_to_grid(pixels, levels: int = 4) -> np.ndarray:
    """``[N,3,H,W]`` in [0, 1] -> ``[N,H,W]`` class ids in ``[0, levels**3)``."""
    q = np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * (levels - 1)), 0, levels - 1).astype(np.int64)
    return (q[:, 0] * levels + q[:, 1]) * levels + q[:, 2]


def grid_to_pixels(grid, levels: int = 4) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.int64)
    r, rest = np.divmod(grid, levels * levels)
    g, b = np.divmod(rest, levels)
    return (np.stack([r, g, b], axis=1) / (levels - 1)).astype(np.float32)
