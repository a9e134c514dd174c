"""Reconstruction and codebook metrics.

SSIM is assembled from differentiable tensor ops so the same code serves as
an evaluation metric and as the structural term of the Pixel VAE loss.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from pixelvq.autodiff import functional as F
from pixelvq.autodiff.tensor import Tensor, no_grad
from pixelvq.errors import CompatibilityError, DimensionError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def perplexity_from_counts(counts: np.ndarray) -> float:
    """``exp`` of the entropy of the normalised histogram (1 for collapse, K for uniform)."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total <= 0:
        return 1.0
    # exp(H) written as prod (T/c)^(n_c c / T) over distinct count values c;
    # uniform usage then gives (T/c)^1 = K with no exp/log round trip
    values, multiplicity = np.unique(counts[counts > 0], return_counts=True)
    weights = multiplicity * values / total
    return float(np.prod((total / values) ** weights))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def ssim(a: Tensor, b: Tensor, data_range: float = 1.0) -> Tensor:
    """Mean SSIM over channels, window positions and images (differentiable).

    Uses an 11x11 Gaussian window (sigma 1.5) evaluated only where it fits
    inside the image, with ``C1 = (0.01 R)^2`` and ``C2 = (0.03 R)^2``.
    """
    if a.shape != b.shape:
        raise DimensionError(f"ssim: shapes differ, {a.shape} vs {b.shape}")
    if min(a.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"ssim: image side {min(a.shape[-2:])} is smaller than the {SSIM_WINDOW}px window")
    g = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a = F.separable_filter(a, g)
    mu_b = F.separable_filter(b, g)
    mu_aa, mu_bb, mu_ab = mu_a * mu_a, mu_b * mu_b, mu_a * mu_b
    var_a = F.separable_filter(a * a, g) - mu_aa
    var_b = F.separable_filter(b * b, g) - mu_bb
    cov = F.separable_filter(a * b, g) - mu_ab
    num = (mu_ab * 2.0 + c1) * (cov * 2.0 + c2)
    den = (mu_aa + mu_bb + c1) * (var_a + var_b + c2)
    return (num / den).mean()


def ssim_metric(a, b) -> float:
    """SSIM of two images (``C,H,W``) or batches (``N,C,H,W``) with values in [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    with no_grad():
        return float(ssim(Tensor(a), Tensor(b)).data)


def mse_metric(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"mse: shapes differ, {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


@dataclass
class CodebookStats:
    histogram: np.ndarray
    perplexity: float
    dead_codes: int


def codebook_stats(grids: Sequence, K: int) -> CodebookStats:
    """Usage histogram, perplexity and dead-code count over encoding grids."""
    counts = np.zeros(K, dtype=np.int64)
    for g in grids:
        idx = np.asarray(getattr(g, "indices", g)).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= K):
            raise ValueError(f"encoding outside [0, {K})")
        counts += np.bincount(idx, minlength=K)
    return CodebookStats(counts, perplexity_from_counts(counts), int((counts == 0).sum()))


@dataclass
class ReconReport:
    model_tag: str
    mse: float
    ssim: float
    perplexity: Optional[float]
    dead_codes: Optional[int]
    n_images: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def check(self, K: Optional[int] = None) -> None:
        assert self.mse >= 0, "mse must be non-negative"
        assert self.n_images > 0
        if self.perplexity is not None:
            assert self.perplexity >= 1.0 - 1e-9
            if K is not None:
                assert self.perplexity <= K + 1e-9


REPORT_SCHEMA = {
    "type": "object",
    "required": ["model_tag", "mse", "ssim", "perplexity", "dead_codes", "n_images"],
    "properties": {
        "model_tag": {"type": "string"},
        "mse": {"type": "number", "minimum": 0},
        "ssim": {"type": "number", "maximum": 1},
        "perplexity": {"type": ["number", "null"], "minimum": 1},
        "dead_codes": {"type": ["integer", "null"], "minimum": 0},
        "n_images": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


def _as_pixels(data, split: str, image_size: int, seed: int) -> np.ndarray:
    from pixelvq.data.sprites import Batch, Corpus, split_images

    if isinstance(data, Corpus):
        pixels = split_images(data, image_size, split, seed).pixels
    elif isinstance(data, Batch):
        pixels = data.pixels
    else:
        pixels = np.asarray(data, dtype=np.float32)
    if len(pixels) == 0:
        raise ValueError(f"split '{split}' has no images to evaluate")
    if pixels.shape[1:] != (3, image_size, image_size):
        raise CompatibilityError(
            f"model expects 3x{image_size}x{image_size} images, data has {pixels.shape[1:]}"
        )
    return pixels


def evaluate_model(model, data, split: str = "test", model_tag: Optional[str] = None,
                   batch_size: int = 64, seed: int = 0) -> ReconReport:
    """Stream a split through the model in eval mode and aggregate metrics."""
    from pixelvq.checkpoint import Checkpoint

    if isinstance(model, Checkpoint):
        model = model.build_model()
    hyper = model.hyper
    pixels = _as_pixels(data, split, hyper.I, seed)
    was_training = model.training
    model.eval()
    recon, grids = [], []
    try:
        for start in range(0, len(pixels), batch_size):
            x = pixels[start : start + batch_size]
            if model.kind == "vqvae":
                idx = model.encode(x)
                grids.append(idx)
                recon.append(model.decode(idx))
            else:
                recon.append(model.reconstruct(x))
    finally:
        model.train(was_training)
    recon = np.concatenate(recon)
    per_image_ssim = [ssim_metric(pixels[i], recon[i]) for i in range(len(pixels))]
    perplexity = dead = None
    if grids:
        stats = codebook_stats(grids, hyper.K)
        perplexity, dead = stats.perplexity, stats.dead_codes
    return ReconReport(
        model_tag=model_tag or getattr(model, "tag", model.kind),
        mse=mse_metric(pixels, recon),
        ssim=float(np.mean(per_image_ssim)),
        perplexity=perplexity,
        dead_codes=dead,
        n_images=len(pixels),
    )


def format_table(reports: Sequence[ReconReport]) -> str:
    """Aligned plain-text table: Model | MSE | SSIM | Perplexity | Dead codes."""
    header = ("Model", "MSE", "SSIM", "Perplexity", "Dead codes")
    rows = [
        (
            r.model_tag,
            f"{r.mse:.5f}",
            f"{r.ssim:.5f}",
            "-" if r.perplexity is None else f"{r.perplexity:.2f}",
            "-" if r.dead_codes is None else str(r.dead_codes),
        )
        for r in reports
    ]
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    fmt = lambda cells: " | ".join(  # noqa: E731
        c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))
    )
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), sep, *(fmt(r) for r in rows)])
