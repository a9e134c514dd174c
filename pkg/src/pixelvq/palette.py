"""Palette swap by frequency rank of encodings.

Each image's distinct encodings are ranked by descending count (ties go to
the smaller encoding id) and the i-th ranked code of one image is exchanged
with the i-th ranked code of the other. Ranks without a partner keep their
code.
"""

from __future__ import annotations

import numpy as np


def frequency_ranking(grid) -> list:
    """Distinct codes of ``grid`` ordered by ``(-count, code)``."""
    codes, counts = np.unique(np.asarray(grid).ravel(), return_counts=True)
    order = np.lexsort((codes, -counts))
    return [int(c) for c in codes[order]]


def swap_mappings(grid_a, grid_b) -> tuple:
    """Return ``(map_for_a, map_for_b)`` as dicts; unmatched ranks are absent (identity)."""
    ra, rb = frequency_ranking(grid_a), frequency_ranking(grid_b)
    n = min(len(ra), len(rb))
    return dict(zip(ra[:n], rb[:n])), dict(zip(rb[:n], ra[:n]))


def remap(grid, mapping: dict) -> np.ndarray:
    grid = np.asarray(grid)
    out = grid.copy()
    for src, dst in mapping.items():
        out[grid == src] = dst
    return out


def swap_grids(grid_a, grid_b) -> tuple:
    map_a, map_b = swap_mappings(grid_a, grid_b)
    return remap(grid_a, map_a), remap(grid_b, map_b)


def palette_swap(model, image_a, image_b) -> tuple:
    """Encode two images, swap their encodings by frequency rank and decode.

    Returns ``(swapped_a, swapped_b, grid_a, grid_b)`` where the images are
    ``(3, I, I)`` arrays and the grids are the swapped encodings.
    """
    grids = model.encode(np.stack([np.asarray(image_a), np.asarray(image_b)]).astype(np.float32))
    ga, gb = swap_grids(grids[0], grids[1])
    out = model.decode(np.stack([ga, gb]))
    return out[0], out[1], ga, gb
