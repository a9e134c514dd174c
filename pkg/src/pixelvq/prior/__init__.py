"""Gated conditional PixelCNN prior over VQ encoding grids."""

from pixelvq.prior.audit import AuditReport, break_center, causality_audit, mask_census
from pixelvq.prior.model import (
    ConditionVector,
    GatedLayer,
    MaskedConv2d,
    PixelCNN,
    PriorConfig,
    causal_mask,
    gated_block,
    masked_conv,
)
from pixelvq.prior.pixelspace import grid_to_pixels, pixel_space_config, pixels_to_grid
from pixelvq.prior.sample import sample, softmax
from pixelvq.prior.train import (
    PriorTrainConfig,
    PriorTrainResult,
    encode_dataset,
    fit_prior,
    prior_config_for,
    train_prior,
)

__all__ = [
    "AuditReport", "break_center", "causality_audit", "mask_census", "ConditionVector",
    "GatedLayer", "MaskedConv2d", "PixelCNN", "PriorConfig", "causal_mask", "gated_block",
    "masked_conv", "sample", "softmax", "PriorTrainConfig", "PriorTrainResult", "encode_dataset",
    "fit_prior", "prior_config_for", "train_prior", "grid_to_pixels", "pixel_space_config",
    "pixels_to_grid",
]
