"""Sprite corpora: manifest loading, background compositing, augmentation, batching.

Rasters are ``(H, W, C)`` arrays on the 0-255 scale. Compositing turns an
RGBA sprite into a float RGB raster; flips, rotations and the bicubic resize
operate on that float raster, and batches finally hold ``[N, 3, I, I]``
float32 pixels in ``[0, 1]``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from pixelvq.errors import ImageDecodeError, ManifestIntegrityError

ATTRIBUTES = ("shape", "type1", "type2")
SPLITS = ("train", "val", "test")
TRAIN_BACKGROUNDS = ("black", "white", "noise0", "noise1")
EVAL_BACKGROUNDS = ("black", "white")
N_ROTATIONS = 4
MAX_ROTATION = 30.0


@dataclass
class SpriteRecord:
    entity_id: str
    image: np.ndarray  # (H, W, 4) uint8 RGBA
    shape_attr: int
    type1_attr: int
    type2_attr: int
    split: str
    image_path: Optional[str] = None

    @property
    def condition(self) -> tuple:
        return (self.shape_attr, self.type1_attr, self.type2_attr)


@dataclass
class Corpus:
    records: list = field(default_factory=list)
    vocab: dict = field(default_factory=lambda: {a: [] for a in ATTRIBUTES})

    def __len__(self) -> int:
        return len(self.records)

    def split(self, name: str) -> list:
        return [r for r in self.records if r.split == name]

    @property
    def condition_dims(self) -> tuple:
        return tuple(max(len(self.vocab[a]), 1) for a in ATTRIBUTES)

    def vocab_hash(self) -> str:
        blob = json.dumps(self.vocab, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class AugmentedExample:
    pixels: np.ndarray  # (3, I, I) float32 in [0, 1]
    entity_id: str
    background: str
    flip: bool
    rotation: float
    condition: tuple = (0, 0, 0)

    @property
    def provenance(self) -> tuple:
        return (self.entity_id, self.background, self.flip, self.rotation)


@dataclass
class Batch:
    pixels: np.ndarray  # (N, 3, I, I) float32
    conditions: np.ndarray  # (N, 3) int64
    provenance: list

    def __len__(self) -> int:
        return len(self.pixels)


# ---------------------------------------------------------------------------
# manifest I/O


def check_split_integrity(rows: Sequence) -> None:
    """Raise if any entity appears in more than one split."""
    seen: dict = {}
    for row in rows:
        eid, split = (row["entity_id"], row["split"]) if isinstance(row, dict) else (row.entity_id, row.split)
        if split not in SPLITS:
            raise ManifestIntegrityError(f"entity '{eid}': unknown split '{split}'")
        prev = seen.setdefault(eid, split)
        if prev != split:
            raise ManifestIntegrityError(
                f"entity '{eid}' appears in both '{prev}' and '{split}' splits"
            )


def vocab_path_for(manifest_path: Path) -> Path:
    return manifest_path.with_name("vocab.json")


def load_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.array(im.convert("RGBA"), dtype=np.uint8)
    except Exception as exc:  # PIL raises a zoo of types
        raise ImageDecodeError(f"cannot decode image '{path}': {exc}") from exc


def load_corpus(manifest_path) -> Corpus:
    """Read a JSON-lines manifest (and its ``vocab.json`` sidecar when present)."""
    manifest_path = Path(manifest_path)
    rows = []
    with open(manifest_path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestIntegrityError(f"{manifest_path}:{lineno}: {exc}") from exc
            missing = {"entity_id", "image_path", "split", *ATTRIBUTES} - set(row)
            if missing:
                raise ManifestIntegrityError(f"{manifest_path}:{lineno}: missing fields {sorted(missing)}")
            rows.append(row)
    check_split_integrity(rows)

    sidecar = vocab_path_for(manifest_path)
    if sidecar.exists():
        raw = json.loads(sidecar.read_text())
        vocab = {a: sorted(raw[a], key=raw[a].get) for a in ATTRIBUTES}
    else:
        vocab = {a: sorted({str(r[a]) for r in rows}) for a in ATTRIBUTES}
    ids = {a: {label: i for i, label in enumerate(vocab[a])} for a in ATTRIBUTES}

    records = []
    for row in rows:
        path = manifest_path.parent / row["image_path"]
        try:
            attr = [ids[a][str(row[a])] for a in ATTRIBUTES]
        except KeyError as exc:
            raise ManifestIntegrityError(f"label {exc} missing from vocabulary") from exc
        records.append(
            SpriteRecord(row["entity_id"], load_image(path), *attr, split=row["split"],
                         image_path=row["image_path"])
        )
    return Corpus(records, vocab)


def save_corpus(corpus: Corpus, out_dir, manifest_name: str = "manifest.jsonl") -> Path:
    """Write PNGs, the manifest and the vocabulary sidecar; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    lines = []
    for i, rec in enumerate(corpus.records):
        rel = rec.image_path or f"images/{rec.entity_id}_{i:05d}.png"
        Image.fromarray(np.ascontiguousarray(rec.image, dtype=np.uint8)).save(out_dir / rel, format="PNG")
        row = {
            "entity_id": rec.entity_id,
            "image_path": rel,
            "shape": corpus.vocab["shape"][rec.shape_attr],
            "type1": corpus.vocab["type1"][rec.type1_attr],
            "type2": corpus.vocab["type2"][rec.type2_attr],
            "split": rec.split,
        }
        lines.append(json.dumps(row, sort_keys=True))
    manifest = out_dir / manifest_name
    manifest.write_text("".join(line + "\n" for line in lines))
    sidecar = {a: {label: i for i, label in enumerate(corpus.vocab[a])} for a in ATTRIBUTES}
    vocab_path_for(manifest).write_text(json.dumps(sidecar, sort_keys=True, indent=1) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# raster transforms


def background(kind: str, shape: tuple, seed: int = 0) -> np.ndarray:
    h, w = shape
    if kind == "black":
        return np.zeros((h, w, 3))
    if kind == "white":
        return np.full((h, w, 3), 255.0)
    if kind.startswith("noise"):
        rng = np.random.default_rng(seed)
        return rng.integers(0, 256, size=(h, w, 3)).astype(np.float64)
    raise ValueError(f"unknown background '{kind}'")


def composite_background(sprite: np.ndarray, kind: str, seed: int = 0) -> np.ndarray:
    """Alpha-blend an RGBA sprite over a black, white or uniform-noise background.

    Alpha is read on the 0-255 scale; the result is a float RGB raster.
    """
    sprite = np.asarray(sprite)
    if sprite.ndim != 3 or sprite.shape[2] != 4:
        raise ValueError(f"sprite must be (H, W, 4) RGBA, got {sprite.shape}")
    rgb = sprite[..., :3].astype(np.float64)
    alpha = sprite[..., 3:4].astype(np.float64) / 255.0
    bg = background(kind, sprite.shape[:2], seed)
    return alpha * rgb + (1.0 - alpha) * bg


def augment(raster: np.ndarray, flip: bool = False, rotation_degrees: float = 0.0,
            resample: str = "bilinear") -> np.ndarray:
    """Mirror horizontally (first, when ``flip``) then rotate about the centre.

    Positive angles rotate counter-clockwise as displayed. Pixels rotated in
    from outside the frame replicate the nearest edge of the composited raster.
    """
    if abs(rotation_degrees) > MAX_ROTATION:
        raise ValueError(f"rotation {rotation_degrees} outside [-{MAX_ROTATION}, {MAX_ROTATION}]")
    out = np.asarray(raster)
    if flip:
        out = out[:, ::-1]
    if rotation_degrees == 0:
        return out.copy()
    order = {"bilinear": 1, "nearest": 0}[resample]
    theta = np.deg2rad(rotation_degrees)
    c, s = np.cos(theta), np.sin(theta)
    matrix = np.array([[c, s], [-s, c]])
    center = (np.array(out.shape[:2]) - 1) / 2.0
    offset = center - matrix @ center
    channels = [
        ndimage.affine_transform(out[..., k].astype(np.float64), matrix, offset=offset,
                                 order=order, mode="nearest")
        for k in range(out.shape[2])
    ]
    return np.stack(channels, axis=-1)


def catmull_rom(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=np.float64))
    near = ((a + 2) * x - (a + 3)) * x * x + 1
    far = ((a * x - 5 * a) * x + 8 * a) * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def bicubic_weights(n_in: int, n_out: int) -> np.ndarray:
    """``(n_out, n_in)`` interpolation matrix with edge-clamped taps."""
    w = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(int)
    for tap in range(-1, 3):
        idx = base + tap
        weight = catmull_rom(src - idx)
        np.add.at(w, (np.arange(n_out), np.clip(idx, 0, n_in - 1)), weight)
    return w


def resize_bicubic(raster: np.ndarray, target: int) -> np.ndarray:
    """Catmull-Rom resize of an ``(H, W, C)`` raster to ``target x target``, clamped to [0, 255]."""
    if target <= 0:
        raise ValueError(f"target size must be positive, got {target}")
    raster = np.asarray(raster, dtype=np.float64)
    h, w = raster.shape[:2]
    if (h, w) == (target, target):
        return np.clip(raster, 0, 255)
    wy, wx = bicubic_weights(h, target), bicubic_weights(w, target)
    out = np.einsum("oh,hwc,pw->opc", wy, raster, wx)
    return np.clip(out, 0, 255)


# ---------------------------------------------------------------------------
# epoch streams


def _noise_seed(seed: int, epoch: int, index: int, bg: int) -> int:
    return int(np.random.SeedSequence([seed, epoch, index, bg]).generate_state(1)[0])


def make_example(record: SpriteRecord, image_size: int, bg: str, flip: bool = False,
                 rotation: float = 0.0, noise_seed: int = 0, resample: str = "bilinear") -> AugmentedExample:
    raster = composite_background(record.image, bg, noise_seed)
    raster = augment(raster, flip, rotation, resample)
    raster = resize_bicubic(raster, image_size)
    pixels = (raster / 255.0).astype(np.float32).transpose(2, 0, 1)
    return AugmentedExample(np.ascontiguousarray(pixels), record.entity_id, bg, flip, rotation,
                            record.condition)


def epoch_plan(records: Sequence[SpriteRecord], split: str, seed: int, epoch: int = 0,
               augment_train: bool = True) -> list:
    """Enumerate ``(record index, background, flip, rotation, noise seed)`` in shuffled order."""
    rng = np.random.default_rng([seed, epoch])
    plan = []
    train = split == "train" and augment_train
    for i, _ in enumerate(records):
        if train:
            angles = [0.0] + [float(a) for a in rng.uniform(-MAX_ROTATION, MAX_ROTATION, N_ROTATIONS)]
            for b, bg in enumerate(TRAIN_BACKGROUNDS):
                ns = _noise_seed(seed, epoch, i, b)
                for flip in (False, True):
                    for angle in angles:
                        plan.append((i, bg, flip, angle, ns))
        else:
            for bg in EVAL_BACKGROUNDS:
                plan.append((i, bg, False, 0.0, 0))
    order = rng.permutation(len(plan)) if split == "train" else np.arange(len(plan))
    return [plan[k] for k in order]


def build_epoch(corpus, image_size: int, batch_size: int, split: str = "train", seed: int = 0,
                epoch: int = 0, augment_train: bool = True, resample: str = "bilinear") -> Iterator[Batch]:
    """Yield batches for one epoch of ``split``.

    The train split enumerates every sprite under 4 backgrounds x 2 flips x
    (identity + 4 random rotations); evaluation splits use black and white
    backgrounds only, in manifest order. The last partial batch is kept.
    """
    if hasattr(image_size, "I"):
        image_size = image_size.I
    records = corpus.split(split) if isinstance(corpus, Corpus) else [r for r in corpus if r.split == split]
    plan = epoch_plan(records, split, seed, epoch, augment_train)
    for start in range(0, len(plan), batch_size):
        chunk = plan[start : start + batch_size]
        examples = [
            make_example(records[i], image_size, bg, flip, rot, ns, resample)
            for i, bg, flip, rot, ns in chunk
        ]
        yield Batch(
            np.stack([e.pixels for e in examples]),
            np.array([e.condition for e in examples], dtype=np.int64).reshape(-1, 3),
            [e.provenance for e in examples],
        )


def split_images(corpus, image_size: int, split: str, seed: int = 0) -> Batch:
    """All evaluation-policy examples of a split as one batch."""
    batches = list(build_epoch(corpus, image_size, 10**9, split, seed, augment_train=False))
    if not batches:
        return Batch(np.zeros((0, 3, image_size, image_size), np.float32), np.zeros((0, 3), np.int64), [])
    return batches[0]
