"""Procedural pixel-art sprites standing in for a licensed sprite corpus.

Each entity gets a left-right symmetric body mask assembled from ellipses
whose layout depends on its ``shape`` attribute, a one-pixel outline, a
limited palette drawn around the hue of its ``type1`` attribute (plus an
accent from ``type2``) and full transparency outside the outline.
"""

from __future__ import annotations

import colorsys
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from pixelvq.data.sprites import ATTRIBUTES, Corpus, SpriteRecord, save_corpus

SHAPES = ("blob", "biped", "quadruped", "serpent", "winged", "tall")
TYPES = ("fire", "water", "grass", "electric", "rock", "ghost", "ice", "poison")
TYPE_HUES = {
    "fire": 0.02, "water": 0.60, "grass": 0.30, "electric": 0.15,
    "rock": 0.08, "ghost": 0.75, "ice": 0.50, "poison": 0.85, "none": 0.0,
}

# (cx, cy, rx, ry) in units of the sprite side for each shape family
_LAYOUTS = {
    "blob": [(0.50, 0.55, 0.32, 0.28)],
    "biped": [(0.50, 0.30, 0.18, 0.16), (0.50, 0.58, 0.20, 0.20), (0.38, 0.85, 0.07, 0.10)],
    "quadruped": [(0.50, 0.55, 0.30, 0.15), (0.25, 0.78, 0.06, 0.12), (0.65, 0.35, 0.14, 0.13)],
    "serpent": [(0.50, 0.25, 0.14, 0.12), (0.42, 0.50, 0.10, 0.18), (0.55, 0.78, 0.24, 0.10)],
    "winged": [(0.50, 0.55, 0.14, 0.22), (0.25, 0.40, 0.18, 0.10), (0.50, 0.28, 0.10, 0.10)],
    "tall": [(0.50, 0.50, 0.14, 0.38), (0.50, 0.18, 0.16, 0.10)],
}


def _ellipse(size: int, cx, cy, rx, ry) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size] + 0.5
    return ((x / size - cx) / rx) ** 2 + ((y / size - cy) / ry) ** 2 <= 1.0


def _palette(rng: np.random.Generator, type1: str, type2: str, n: int) -> np.ndarray:
    """``n`` distinct RGB colours: dark outline first, then body shades, then an accent."""
    hue = (TYPE_HUES[type1] + rng.uniform(-0.04, 0.04)) % 1.0
    colors = [colorsys.hsv_to_rgb(hue, 0.7, 0.25)]
    levels = np.linspace(0.55, 0.95, max(n - 1, 1))
    for k in range(1, n):
        if k == n - 1 and n >= 3 and type2 != "none":
            colors.append(colorsys.hsv_to_rgb(TYPE_HUES[type2], 0.85, 0.9))
        else:
            sat = rng.uniform(0.45, 0.85)
            colors.append(colorsys.hsv_to_rgb(hue, sat, levels[k - 1]))
    rgb = np.round(np.array(colors) * 255).astype(np.uint8)
    for k in range(1, len(rgb)):  # keep colours distinct after rounding
        while any((rgb[k] == rgb[j]).all() for j in range(k)):
            rgb[k] = np.minimum(rgb[k].astype(int) + 7, 255).astype(np.uint8)
    return rgb


def make_sprite(rng: np.random.Generator, size: int, shape: str, type1: str, type2: str,
                palette_size: int) -> np.ndarray:
    """One ``(size, size, 4)`` RGBA sprite using at most ``palette_size`` opaque colours."""
    half = np.zeros((size, size), dtype=bool)
    for cx, cy, rx, ry in _LAYOUTS[shape]:
        jitter = rng.uniform(0.85, 1.15, size=4)
        half |= _ellipse(size, cx * jitter[0], cy * jitter[1], rx * jitter[2], ry * jitter[3])
    # random bumps break the ellipse regularity
    for _ in range(rng.integers(1, 4)):
        cx, cy = rng.uniform(0.2, 0.6), rng.uniform(0.15, 0.85)
        half |= _ellipse(size, cx, cy, rng.uniform(0.04, 0.1), rng.uniform(0.04, 0.1))
    left = half[:, : (size + 1) // 2]
    body = np.concatenate([left, left[:, : size // 2][:, ::-1]], axis=1)
    body[[0, -1], :] = False
    body[:, [0, -1]] = False
    outline = ndimage.binary_dilation(body) & ~body

    pal = _palette(rng, type1, type2, palette_size)
    index = np.full((size, size), -1)
    index[outline] = 0
    if palette_size == 1:
        index[body] = 0
    else:
        n_body = palette_size - 1
        y = np.mgrid[0:size, 0:size][0] / size
        bands = np.clip((y * n_body + rng.uniform(-0.3, 0.3)).astype(int), 0, n_body - 1)
        shade = np.where(ndimage.binary_erosion(body, iterations=2), bands, 0)
        index[body] = 1 + shade[body]
        if palette_size >= 3:  # eyes in the accent colour
            ey, ex = int(size * rng.uniform(0.25, 0.4)), int(size * rng.uniform(0.3, 0.42))
            for yy, xx in ((ey, ex), (ey, size - 1 - ex)):
                if body[yy, xx]:
                    index[yy, xx] = palette_size - 1

    rgba = np.zeros((size, size, 4), dtype=np.uint8)
    opaque = index >= 0
    rgba[opaque, :3] = pal[index[opaque]]
    rgba[opaque, 3] = 255
    return rgba


def assign_splits(n: int, rng: np.random.Generator, fractions=(0.8, 0.1, 0.1)) -> list:
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    labels = ["train"] * n_train + ["val"] * n_val + ["test"] * (n - n_train - n_val)
    return [labels[i] for i in rng.permutation(n)]


def make_synthetic_corpus(n_entities: int, image_size: int = 32, palette_size: int = 4, seed: int = 0,
                          out_dir: Optional[str] = None, sprites_per_entity: int = 1,
                          fractions=(0.8, 0.1, 0.1)) -> Corpus:
    """Generate a deterministic sprite corpus; write it to ``out_dir`` when given."""
    if palette_size < 2:
        raise ValueError("palette_size must be >= 2")
    rng = np.random.default_rng(seed)
    vocab = {"shape": list(SHAPES), "type1": list(TYPES), "type2": ["none", *TYPES]}
    splits = assign_splits(n_entities, rng, fractions)
    records = []
    for e in range(n_entities):
        shape = SHAPES[rng.integers(len(SHAPES))]
        type1 = TYPES[rng.integers(len(TYPES))]
        type2 = "none" if rng.random() < 0.4 else TYPES[rng.integers(len(TYPES))]
        attr = (vocab["shape"].index(shape), vocab["type1"].index(type1), vocab["type2"].index(type2))
        for v in range(sprites_per_entity):
            img = make_sprite(rng, image_size, shape, type1, type2, palette_size)
            eid = f"e{e:05d}"
            records.append(SpriteRecord(eid, img, *attr, split=splits[e],
                                        image_path=f"images/{eid}_{v}.png"))
    corpus = Corpus(records, vocab)
    if out_dir is not None:
        save_corpus(corpus, Path(out_dir))
    return corpus


__all__ = ["ATTRIBUTES", "SHAPES", "TYPES", "make_sprite", "make_synthetic_corpus"]
