"""Single-file checkpoint container.

Layout (little-endian)::

    b"PIXVQCKP" | u32 version | u32 header length | header JSON (sorted keys)
    u32 tensor count | per tensor: u32 name length, name, u64 offset, u64 nbytes
    tensor payloads (offsets are relative to the start of this section)

The header holds the model kind, its configuration, the seed, codebook
usage counts and free-form training metadata. Nothing time- or
path-dependent is written, so equal models give equal bytes.
"""

from __future__ import annotations

import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from pixelvq.autodiff.serialize import tensor_from_bytes, tensor_to_bytes
from pixelvq.errors import CheckpointFormatError, CompatibilityError

MAGIC = b"PIXVQCKP"
VERSION = 1
MODEL_KINDS = ("vqvae", "vae", "pixel_vae", "pixelcnn")


def _json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass
class Checkpoint:
    model_kind: str
    config: dict
    tensors: "OrderedDict[str, np.ndarray]"
    seed: int = 0
    metadata: dict = field(default_factory=dict)
    usage_counts: Optional[list] = None
    vocab_hash: Optional[str] = None

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise CheckpointFormatError(f"unknown model kind '{self.model_kind}'")

    # -- construction ------------------------------------------------------
    @classmethod
    def from_model(cls, model, seed: int = 0, metadata: Optional[dict] = None,
                   vocab_hash: Optional[str] = None) -> "Checkpoint":
        kind = model.kind
        if kind == "pixelcnn":
            config = model.config.to_dict()
        elif kind in ("vae", "pixel_vae"):
            config = dict(model.hyper.to_dict(), variant=model.variant)
        else:
            config = model.hyper.to_dict()
        usage = None
        if kind == "vqvae":
            usage = [int(c) for c in model.codebook.usage_counts]
        tensors = OrderedDict((n, np.array(a, dtype=np.float32)) for n, a in model.state_dict().items())
        return cls(kind, config, tensors, int(seed), dict(metadata or {}), usage, vocab_hash)

    def build_model(self):
        """Instantiate the stored model in eval mode with the stored weights."""
        if self.model_kind == "vqvae":
            from pixelvq.vqvae.geometry import HyperParams
            from pixelvq.vqvae.model import PixelVQVAE

            model = PixelVQVAE(HyperParams.from_dict(self.config), self.seed)
        elif self.model_kind in ("vae", "pixel_vae"):
            from pixelvq.vqvae.geometry import HyperParams
            from pixelvq.vqvae.vae import VAE

            cfg = dict(self.config)
            variant = cfg.pop("variant")
            model = VAE(HyperParams.from_dict(cfg), variant, self.seed)
        else:
            from pixelvq.prior.model import PixelCNN, PriorConfig

            model = PixelCNN(PriorConfig.from_dict(self.config), self.seed)
        model.load_state_dict(self.tensors)
        if self.usage_counts is not None:
            model.codebook.usage_counts[:] = self.usage_counts
        return model.eval()

    @property
    def K(self) -> int:
        return int(self.config["K"])

    def require_kind(self, *kinds: str) -> "Checkpoint":
        if self.model_kind not in kinds:
            raise CompatibilityError(f"expected a {' or '.join(kinds)} checkpoint, got '{self.model_kind}'")
        return self

    # -- encoding ----------------------------------------------------------
    def header(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "config": self.config,
            "seed": self.seed,
            "metadata": self.metadata,
            "usage_counts": self.usage_counts,
            "vocab_hash": self.vocab_hash,
        }

    def to_bytes(self) -> bytes:
        head = _json(self.header())
        payloads, table, offset = [], [], 0
        for name, arr in self.tensors.items():
            blob = tensor_to_bytes(arr)
            key = name.encode("utf-8")
            table.append(struct.pack("<I", len(key)) + key + struct.pack("<QQ", offset, len(blob)))
            payloads.append(blob)
            offset += len(blob)
        parts = [MAGIC, struct.pack("<II", VERSION, len(head)), head, struct.pack("<I", len(table))]
        return b"".join(parts + table + payloads)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Checkpoint":
        if buf[: len(MAGIC)] != MAGIC:
            raise CheckpointFormatError("not a checkpoint file (bad magic)")
        pos = len(MAGIC)
        try:
            version, head_len = struct.unpack_from("<II", buf, pos)
            if version != VERSION:
                raise CheckpointFormatError(f"checkpoint version {version} is not supported (expected {VERSION})")
            pos += 8
            head = json.loads(buf[pos : pos + head_len].decode("utf-8"))
            pos += head_len
            (count,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            entries = []
            for _ in range(count):
                (n,) = struct.unpack_from("<I", buf, pos)
                pos += 4
                name = buf[pos : pos + n].decode("utf-8")
                pos += n
                off, nbytes = struct.unpack_from("<QQ", buf, pos)
                pos += 16
                entries.append((name, off, nbytes))
        except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointFormatError(f"corrupt checkpoint header: {exc}") from exc
        tensors = OrderedDict()
        for name, off, nbytes in entries:
            arr, end = tensor_from_bytes(buf, pos + off)
            if end - (pos + off) != nbytes:
                raise CheckpointFormatError(f"tensor '{name}' size disagrees with the offset table")
            tensors[name] = arr
        return cls(head["model_kind"], head["config"], tensors, head["seed"], head["metadata"],
                   head["usage_counts"], head["vocab_hash"])

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())

    def summary(self) -> dict:
        """Header plus tensor shapes, for ``inspect-checkpoint``."""
        out = self.header()
        out["version"] = VERSION
        out["tensors"] = {n: list(a.shape) for n, a in self.tensors.items()}
        out["n_parameters"] = int(sum(a.size for n, a in self.tensors.items()
                                      if not n.endswith(("running_mean", "running_var", "mask"))))
        return out


def save_model(model, path, seed: int = 0, metadata: Optional[dict] = None,
               vocab_hash: Optional[str] = None) -> Path:
    return Checkpoint.from_model(model, seed, metadata, vocab_hash).save(path)


def load_model(path):
    return Checkpoint.load(path).build_model()
