# # Palette swap in encoding space
#
# Two sprites are encoded, their codes ranked by frequency, and the i-th most
# common code of one image is replaced by the i-th most common code of the
# other. Decoding gives each sprite the other's colour scheme.

import sys
from pathlib import Path

import numpy as np

from pixelvq.checkpoint import load_model
from pixelvq.data import make_synthetic_corpus, split_images
from pixelvq.palette import frequency_ranking, palette_swap, swap_mappings
from pixelvq.sheets import save_png, tile

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
vq = load_model(out / "pixel-vqvae" / "checkpoint.pxvq").eval()
test = split_images(make_synthetic_corpus(300, 32, seed=0), 32, "test")
a, b = test.pixels[0], test.pixels[2]

grid_a, grid_b = vq.encode(np.stack([a, b]))
print("top codes of a:", frequency_ranking(grid_a)[:5])
print("top codes of b:", frequency_ranking(grid_b)[:5])
map_a, _ = swap_mappings(grid_a, grid_b)
print(len(map_a), "codes remapped in a")

swapped_a, swapped_b, _, _ = palette_swap(vq, a, b)
save_png(tile(np.stack([a, b, swapped_a, swapped_b]), 2), out / "palette_swap.png")

# Swapping an image with itself changes nothing: every code maps to itself.
# (Decoded pixels agree to float rounding; BLAS sums differently per batch size.)
same, _, g, _ = palette_swap(vq, a, a)
print("self-swap keeps the grid:", np.array_equal(g, grid_a))
print("max pixel difference to the reconstruction:", np.abs(same - vq.reconstruct(a[None])[0]).max())
