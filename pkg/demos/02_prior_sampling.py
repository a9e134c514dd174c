# # A conditional PixelCNN over encoding grids
#
# Continues from 01_train_vqvae.py: load the Pixel VQ-VAE checkpoint, encode
# the training split and fit a small gated PixelCNN on the 16x16 grids. New
# sprites are drawn by sampling a grid for a chosen condition and decoding it.

import sys
from pathlib import Path

import numpy as np

from pixelvq.checkpoint import load_model, save_model
from pixelvq.data import make_synthetic_corpus
from pixelvq.prior import PriorTrainConfig, causality_audit, prior_config_for, sample, train_prior
from pixelvq.sheets import sample_sheet, save_png

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
vq = load_model(out / "pixel-vqvae" / "checkpoint.pxvq").eval()
corpus = make_synthetic_corpus(300, 32, seed=0)

# ## Fit
#
# Four gated layers are plenty for a demo; the full recipe uses 15.

cfg = prior_config_for(vq, corpus, n_layers=4, n_filters=32)
res = train_prior(vq, corpus, cfg, PriorTrainConfig(learning_rate=3e-3, batch_size=32, epochs=3), seed=0)
print("prior loss per epoch:", [round(v, 3) for v in res.curve()])
save_model(res.prior, out / "prior" / "checkpoint.pxvq", seed=0)

# ## Causality
#
# Every output position must depend only on earlier raster positions. The
# audit perturbs each input cell and checks which logits move.

audit = causality_audit(res.prior)
print("causality violations:", len(audit.violations))

# ## Sampling
#
# Same condition, different seeds; temperature 1 draws from the softmax,
# temperature 0 would take the argmax everywhere.

cond = tuple(int(c) for c in corpus.records[0].condition)
grids = np.concatenate([sample(res.prior, cond, temperature=1.0, seed=s) for s in range(8)])
save_png(sample_sheet(vq.decode(grids), cols=4), out / "samples.png")
print("wrote", out / "samples.png")
