"""Pixel VQ-VAE: discrete representations for pixel art."""

__version__ = "0.1.0"
