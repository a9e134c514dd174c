"""Model geometry and training hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

from pixelvq.errors import CapabilityError, ConfigError, GeometryError

RESOLUTIONS = {"lowres": 2, "medres": 1, "hires": 0}


def resolve_geometry(I: int, L: int) -> tuple:
    """Return ``(G, M, encodings_per_image)`` for input side ``I`` and ``L`` scaling blocks.

    ``G = I / 2**L`` is the side of the encoding grid, ``M = 4**L`` the number
    of pixels governed by one encoding (a ``2**L x 2**L`` patch).

    >>> resolve_geometry(64, 2)
    (16, 16, 256)
    """
    if L < 0:
        raise GeometryError(f"L must be >= 0, got {L}")
    if I <= 0 or I % (2**L):
        raise GeometryError(f"input side {I} is not divisible by 2**L = {2**L}")
    G = I // 2**L
    return G, 4**L, G * G


@dataclass(frozen=True)
class HyperParams:
    """Geometry of a (Pixel) VQ-VAE.

    ``I`` input side, ``L`` scaling blocks, ``K`` codebook size, ``D``
    embedding width, ``F`` filters of the final scaling block.
    """

    I: int = 64
    L: int = 1
    K: int = 256
    D: int = 32
    F: int = 512
    pixelsight: bool = True
    adapter: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        resolve_geometry(self.I, self.L)
        if self.K < 2:
            raise ConfigError(f"K must be >= 2, got {self.K}")
        if self.D < 1:
            raise ConfigError(f"D must be >= 1, got {self.D}")
        if self.F < self.D:
            raise ConfigError(f"F ({self.F}) must be >= D ({self.D})")

    def check_capability(self) -> None:
        """Raise :class:`CapabilityError` for configurations no encoder can realise."""
        if self.L == 0 and not self.pixelsight:
            raise CapabilityError(
                "an encoder with L=0 scaling blocks needs the PixelSight enhancement "
                "(missing: pixelsight); the base VQ-VAE has no HiRes configuration"
            )

    @property
    def G(self) -> int:
        return resolve_geometry(self.I, self.L)[0]

    @property
    def M(self) -> int:
        return resolve_geometry(self.I, self.L)[1]

    @property
    def encodings_per_image(self) -> int:
        return resolve_geometry(self.I, self.L)[2]

    @property
    def variant(self) -> str:
        if self.pixelsight and self.adapter:
            return "pixel"
        if self.pixelsight:
            return "pixelsight"
        if self.adapter:
            return "adapter"
        return "base"

    def block_widths(self) -> list:
        """Filter count of each encoder scaling block, final block last."""
        top = self.F if self.adapter else self.D
        return [max(1, top >> (self.L - 1 - i)) for i in range(self.L)]

    def pixelsight_width(self) -> int:
        top = self.F if self.adapter else self.D
        return max(1, top >> self.L)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown hyperparameter keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def preset(cls, resolution: str, pixel: bool = True, I: int = 64, K: int = 256, F: int = 512,
               D: Optional[int] = None) -> "HyperParams":
        """LowRes/MedRes/HiRes settings with the reference K, F and D defaults."""
        L = RESOLUTIONS[resolution.lower()]
        if D is None:
            D = 64 if L == 2 else 32
        return cls(I=I, L=L, K=K, D=D, F=F, pixelsight=pixel, adapter=pixel)

    def replace(self, **kw) -> "HyperParams":
        return replace(self, **kw)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 25
    beta: float = 0.25
    kl_weight: float = 1.0
    loss_mix: str = "mse"
    max_steps: Optional[int] = None
    augment: bool = True
    resample: str = "bilinear"
    codebook_init: str = "uniform"
    warmup_steps: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.beta < 0:
            raise ConfigError("commitment weight beta must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.loss_mix not in ("mse", "mse_plus_ssim"):
            raise ConfigError(f"unknown loss_mix '{self.loss_mix}'")
        if self.resample not in ("bilinear", "nearest"):
            raise ConfigError(f"unknown resample '{self.resample}'")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be >= 0")
        if self.codebook_init not in ("uniform", "data"):
            raise ConfigError(f"unknown codebook_init '{self.codebook_init}'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)
