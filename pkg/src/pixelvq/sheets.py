"""Contact sheets and sample grids written as PNG."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image


def to_uint8(images: np.ndarray) -> np.ndarray:
    """``(..., 3, H, W)`` floats in [0, 1] to ``(..., H, W, 3)`` bytes."""
    arr = np.clip(np.asarray(images, dtype=np.float64), 0.0, 1.0)
    return np.rint(np.moveaxis(arr, -3, -1) * 255.0).astype(np.uint8)


def tile(images: np.ndarray, cols: int) -> np.ndarray:
    """Lay ``(N, 3, I, I)`` images out row-major on a ``cols``-wide grid (black padding)."""
    images = to_uint8(images)
    n, h, w, _ = images.shape
    rows = math.ceil(n / cols)
    sheet = np.zeros((rows * h, cols * w, 3), dtype=np.uint8)
    for i, img in enumerate(images):
        r, c = divmod(i, cols)
        sheet[r * h : (r + 1) * h, c * w : (c + 1) * w] = img
    return sheet


def contact_sheet(originals: np.ndarray, reconstructions: np.ndarray) -> np.ndarray:
    """One row per image: original on the left, reconstruction on the right."""
    originals = np.asarray(originals)
    reconstructions = np.asarray(reconstructions)
    if originals.shape != reconstructions.shape:
        raise ValueError(f"shape mismatch: {originals.shape} vs {reconstructions.shape}")
    pairs = np.stack([originals, reconstructions], axis=1).reshape((-1,) + originals.shape[1:])
    return tile(pairs, 2)


def sample_sheet(samples: np.ndarray, cols: int = 8) -> np.ndarray:
    if len(samples) == 0:
        raise ValueError("refusing to write an empty sample sheet")
    return tile(samples, min(cols, len(samples)))


def save_png(sheet: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(sheet).save(path, format="PNG", optimize=False)
    return path
