"""Sprite ingestion, augmentation and the synthetic corpus generator."""

from pixelvq.data.sprites import (
    ATTRIBUTES,
    AugmentedExample,
    Batch,
    Corpus,
    SpriteRecord,
    augment,
    build_epoch,
    composite_background,
    load_corpus,
    resize_bicubic,
    save_corpus,
    split_images,
)
from pixelvq.data.synthetic import make_synthetic_corpus

__all__ = [
    "ATTRIBUTES", "AugmentedExample", "Batch", "Corpus", "SpriteRecord", "augment", "build_epoch",
    "composite_background", "load_corpus", "make_synthetic_corpus", "resize_bicubic",
    "save_corpus", "split_images",
]
