"""End-to-end check that prior logits only see the raster past."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pixelvq.errors import CausalityViolation
from pixelvq.prior.model import PixelCNN, causal_mask


@dataclass
class AuditReport:
    grid_side: int
    coverage: np.ndarray
    violations: list = field(default_factory=list)
    suspect_layers: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.suspect_layers

    @property
    def positions_checked(self) -> int:
        return int(self.coverage.sum())

    def summary(self) -> str:
        if self.ok:
            return f"causality audit: {self.positions_checked} positions, 0 violations"
        first = self.violations[0] if self.violations else None
        layers = ", ".join(self.suspect_layers) or "unknown layer"
        return (f"causality audit: {len(self.violations)} violations over {self.positions_checked} "
                f"positions; first at perturbed {first[0]} -> logits {first[1]}; suspect: {layers}")


def mask_census(prior: PixelCNN) -> list:
    """Names of masked convolutions whose mask admits raster-future (or, for A, centre) taps."""
    bad = []
    for name, conv in prior.masked_convs():
        k = conv.weight.shape[-1]
        allowed = causal_mask(k, conv.mask_type)[0, 0]
        if np.any((conv.mask != 0) & (allowed[None, None] == 0)):
            bad.append(name)
    return bad


def causality_audit(prior: PixelCNN, seed: int = 0, raise_on_violation: bool = False) -> AuditReport:
    """Perturb every raster position ``q`` once and demand bitwise-equal logits at ``p <= q``."""
    cfg = prior.config
    G, K = cfg.grid_side, cfg.K
    rng = np.random.default_rng(seed)
    grid = rng.integers(0, K, size=(1, G, G))
    cond = np.array([[rng.integers(0, n) for n in cfg.condition_dims]])
    was = prior.training
    prior.eval()
    try:
        base = prior.logits(grid, cond)[0].reshape(K, -1)
        coverage = np.zeros(G * G, dtype=np.int64)
        violations = []
        for q in range(G * G):
            r, c = divmod(q, G)
            probe = grid.copy()
            probe[0, r, c] = (probe[0, r, c] + 1 + rng.integers(0, K - 1)) % K
            out = prior.logits(probe, cond)[0].reshape(K, -1)
            coverage[q] += 1
            changed = np.any(out[:, : q + 1] != base[:, : q + 1], axis=0)
            for p in np.flatnonzero(changed):
                violations.append((divmod(q, G), divmod(int(p), G)))
    finally:
        prior.train(was)
    report = AuditReport(G, coverage.reshape(G, G), violations, mask_census(prior))
    if raise_on_violation and not report.ok:
        raise CausalityViolation(report.summary())
    return report


def break_center(prior: PixelCNN, layer: int = 0) -> PixelCNN:
    """Test fixture: open the centre tap of one masked convolution (in place)."""
    name, conv = prior.masked_convs()[layer]
    c = conv.weight.shape[-1] // 2
    conv.mask[:, :, c, c] = 1.0
    if conv.mask_type == "B":
        # a B mask already has its centre; leak the next raster position instead
        conv.mask[:, :, c, c + 1] = 1.0
    return prior
