"""``pixelvq`` command line: corpus generation, training, evaluation, sampling, palette swap.

Run configs are JSON files; unknown keys are rejected and ``--set a.b=value``
overrides individual entries. Every failure prints one JSON object on stderr
and exits with status 2.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from pixelvq.checkpoint import Checkpoint
from pixelvq.errors import ConfigError, PixelVQError

CHECKPOINT_NAME = "checkpoint.pxvq"

RUN_KEYS = {"manifest", "out_dir", "seed", "model", "train"}
MODEL_KEYS = {"kind", "hyper"}
PRIOR_RUN_KEYS = {"manifest", "vqvae_checkpoint", "out_dir", "seed", "prior", "train"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("ArgumentError", message)


def _fail(kind: str, message: str, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True) + "\n")
    sys.exit(2)


# -- configuration ------------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    cfg = copy.deepcopy(cfg)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: '{p}' is not a section")
        node[parts[-1]] = _parse_value(value)
    return cfg


def load_config(path: Optional[str], overrides=None) -> dict:
    cfg = {}
    if path:
        try:
            cfg = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be an object")
    return apply_overrides(cfg, overrides)


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _resolve_seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return int(args.seed)
    return int(cfg.get("seed", 0))


def _require(cfg: dict, key: str, where: str = "config"):
    if cfg.get(key) in (None, ""):
        raise ConfigError(f"{where} needs '{key}'")
    return cfg[key]


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_curve(path: Path, history: list) -> None:
    keys = sorted({k for row in history for k in row} - {"epoch", "steps"})
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "steps", *keys])
        for row in history:
            w.writerow([row["epoch"], row["steps"], *("" if row.get(k) is None else repr(row[k]) for k in keys)])


# -- commands -----------------------------------------------------------------


def cmd_make_synthetic(args) -> dict:
    from pixelvq.data.synthetic import make_synthetic_corpus

    if args.n < 0:
        raise ConfigError("--n must be >= 0")
    seed = 0 if args.seed is None else args.seed
    corpus = make_synthetic_corpus(args.n, args.size, args.palette, seed, args.out, args.sprites_per_entity)
    return {"out": str(args.out), "entities": args.n, "sprites": len(corpus),
            "manifest": str(Path(args.out) / "manifest.jsonl")}


def cmd_train(args) -> dict:
    from pixelvq.data.sprites import load_corpus
    from pixelvq.vqvae.geometry import HyperParams, TrainConfig
    from pixelvq.vqvae.train import train_vae, train_vqvae

    cfg = load_config(args.config, args.set)
    if args.manifest:
        cfg["manifest"] = args.manifest
    if args.out:
        cfg["out_dir"] = args.out
    _check_keys(cfg, RUN_KEYS, "run config")
    model_cfg = cfg.get("model", {})
    _check_keys(model_cfg, MODEL_KEYS, "model")
    kind = model_cfg.get("kind", "vqvae")
    if kind not in ("vqvae", "vae", "pixel_vae"):
        raise ConfigError(f"model.kind must be vqvae, vae or pixel_vae, got '{kind}'")
    hyper = HyperParams.from_dict(model_cfg.get("hyper", {}))
    train_cfg = TrainConfig.from_dict(cfg.get("train", {}))
    seed = _resolve_seed(args, cfg)
    out = Path(_require(cfg, "out_dir"))
    corpus = load_corpus(_require(cfg, "manifest"))
    if kind == "vqvae":
        result = train_vqvae(corpus, hyper, train_cfg, seed)
    else:
        result = train_vae(corpus, hyper, "plain" if kind == "vae" else "pixel_vae", train_cfg, seed)
    meta = {
        "epochs_run": len(result.history),
        "steps": result.steps,
        "best_epoch": result.best_epoch,
        "final": result.history[-1] if result.history else None,
        "train": result.config.to_dict(),
    }
    ckpt = Checkpoint.from_model(result.model, seed, meta, corpus.vocab_hash())
    ckpt.save(out / CHECKPOINT_NAME)
    write_curve(out / "loss_curve.csv", result.history)
    resolved = dict(cfg, seed=seed, model={"kind": kind, "hyper": hyper.to_dict()}, train=result.config.to_dict())
    _write_json(out / "run.json", resolved)
    return {"checkpoint": str(out / CHECKPOINT_NAME), "epochs": len(result.history), "steps": result.steps}


def cmd_train_prior(args) -> dict:
    from pixelvq.data.sprites import load_corpus
    from pixelvq.prior.model import PriorConfig
    from pixelvq.prior.train import PriorTrainConfig, prior_config_for, train_prior

    cfg = load_config(args.config, args.set)
    for key in ("manifest", "vqvae_checkpoint"):
        if getattr(args, key, None):
            cfg[key] = getattr(args, key)
    if args.out:
        cfg["out_dir"] = args.out
    _check_keys(cfg, PRIOR_RUN_KEYS, "prior run config")
    seed = _resolve_seed(args, cfg)
    out = Path(_require(cfg, "out_dir"))
    vq_ckpt = Checkpoint.load(_require(cfg, "vqvae_checkpoint")).require_kind("vqvae")
    vqvae = vq_ckpt.build_model()
    corpus = load_corpus(_require(cfg, "manifest"))
    arch = dict(cfg.get("prior", {}))
    if "K" in arch or "grid_side" in arch or "condition_dims" in arch:
        prior_config = PriorConfig.from_dict(arch)
    else:
        _check_keys(arch, {"n_layers", "n_filters", "kernel", "cond_width", "positional"}, "prior")
        prior_config = prior_config_for(vqvae, corpus, **arch)
    train_cfg = PriorTrainConfig.from_dict(cfg.get("train", {}))
    result = train_prior(vqvae, corpus, prior_config, train_cfg, seed)
    meta = {
        "epochs_run": len(result.history),
        "steps": result.steps,
        "final": result.history[-1] if result.history else None,
        "train": train_cfg.to_dict(),
        "vocab": corpus.vocab,
    }
    Checkpoint.from_model(result.prior, seed, meta, corpus.vocab_hash()).save(out / CHECKPOINT_NAME)
    write_curve(out / "loss_curve.csv", result.history)
    _write_json(out / "run.json", dict(cfg, seed=seed, prior=prior_config.to_dict(), train=train_cfg.to_dict()))
    return {"checkpoint": str(out / CHECKPOINT_NAME), "epochs": len(result.history), "steps": result.steps}


def cmd_eval(args) -> dict:
    from pixelvq.data.sprites import load_corpus, split_images
    from pixelvq.metrics import evaluate_model, format_table
    from pixelvq.sheets import contact_sheet, save_png

    ckpt = Checkpoint.load(args.checkpoint).require_kind("vqvae", "vae", "pixel_vae")
    model = ckpt.build_model()
    corpus = load_corpus(args.manifest)
    seed = 0 if args.seed is None else args.seed
    tag = args.tag or ckpt.model_kind
    report = evaluate_model(model, corpus, args.split, tag, seed=seed)
    out = Path(args.out)
    _write_json(out / "report.json", report.to_dict())
    (out / "report.txt").write_text(format_table([report]) + "\n")
    images = split_images(corpus, model.hyper.I, args.split, seed).pixels[: args.sheet_rows]
    save_png(contact_sheet(images, model.reconstruct(images)), out / "contact_sheet.png")
    return report.to_dict()


def _parse_condition(text: str, vocab: Optional[dict]) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"condition needs three comma-separated values, got '{text}'")
    out = []
    for attr, p in zip(("shape", "type1", "type2"), parts):
        if p.lstrip("-").isdigit():
            out.append(int(p))
        elif vocab and p in vocab.get(attr, []):
            out.append(vocab[attr].index(p))
        else:
            raise ConfigError(f"unknown {attr} label '{p}'")
    return tuple(out)


def cmd_generate(args) -> dict:
    from pixelvq.errors import CompatibilityError
    from pixelvq.prior.sample import sample
    from pixelvq.sheets import sample_sheet, save_png

    if args.n < 1:
        raise ConfigError(f"--n must be >= 1, got {args.n}")
    vq_ckpt = Checkpoint.load(args.vqvae).require_kind("vqvae")
    pr_ckpt = Checkpoint.load(args.prior).require_kind("pixelcnn")
    if vq_ckpt.K != pr_ckpt.K:
        raise CompatibilityError(f"VQ-VAE K={vq_ckpt.K} but prior K={pr_ckpt.K}")
    vqvae, prior = vq_ckpt.build_model(), pr_ckpt.build_model()
    if prior.config.grid_side != vqvae.hyper.G:
        raise CompatibilityError(f"prior grid {prior.config.grid_side} != VQ-VAE grid {vqvae.hyper.G}")
    vocab = pr_ckpt.metadata.get("vocab")
    conditions = [_parse_condition(c, vocab) for c in (args.condition or ["0,0,0"])]
    seed = 0 if args.seed is None else args.seed
    grids, log = [], []
    for i in range(args.n):
        cond = conditions[i % len(conditions)]
        grids.append(sample(prior, cond, args.temperature, seed=seed + i)[0])
        log.append({"index": i, "condition": list(cond), "seed": seed + i, "temperature": args.temperature})
    images = vqvae.decode(np.stack(grids))
    out = Path(args.out)
    save_png(sample_sheet(images, args.cols), out)
    log_path = out.with_suffix(".jsonl")
    log_path.write_text("".join(json.dumps(row, sort_keys=True) + "\n" for row in log))
    return {"sheet": str(out), "log": str(log_path), "n": args.n}


def _load_for_model(path: str, size: int) -> np.ndarray:
    from pixelvq.data.sprites import composite_background, load_image, resize_bicubic

    raster = resize_bicubic(composite_background(load_image(Path(path)), "black"), size)
    return (raster / 255.0).astype(np.float32).transpose(2, 0, 1)


def cmd_swap_palette(args) -> dict:
    from pixelvq.palette import palette_swap, swap_mappings
    from pixelvq.sheets import save_png, to_uint8

    model = Checkpoint.load(args.checkpoint).require_kind("vqvae").build_model()
    a = _load_for_model(args.image_a, model.hyper.I)
    b = _load_for_model(args.image_b, model.hyper.I)
    grids = model.encode(np.stack([a, b]))
    sa, sb, ga, gb = palette_swap(model, a, b)
    out = Path(args.out)
    save_png(to_uint8(sa), out / "swapped_a.png")
    save_png(to_uint8(sb), out / "swapped_b.png")
    map_a, map_b = swap_mappings(grids[0], grids[1])
    mapping = {"a": {str(k): v for k, v in map_a.items()}, "b": {str(k): v for k, v in map_b.items()}}
    _write_json(out / "mapping.json", mapping)
    return {"out": str(out), "mapped_codes": len(map_a)}


def cmd_inspect(args) -> dict:
    return Checkpoint.load(args.checkpoint).summary()


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pixelvq", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="global seed (overrides the config file)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("make-synthetic", help="write a procedural sprite corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int, default=100, help="number of entities")
    s.add_argument("--size", type=int, default=32)
    s.add_argument("--palette", type=int, default=4)
    s.add_argument("--sprites-per-entity", type=int, default=1)
    s.set_defaults(func=cmd_make_synthetic)

    s = sub.add_parser("train", help="train a VQ-VAE or VAE baseline")
    s.add_argument("--config")
    s.add_argument("--manifest")
    s.add_argument("--out")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("train-prior", help="train the PixelCNN prior on VQ-VAE encodings")
    s.add_argument("--config")
    s.add_argument("--manifest")
    s.add_argument("--vqvae-checkpoint", dest="vqvae_checkpoint")
    s.add_argument("--out")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.set_defaults(func=cmd_train_prior)

    s = sub.add_parser("eval", help="reconstruction metrics and a contact sheet")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--split", default="test", choices=["train", "val", "test"])
    s.add_argument("--out", required=True)
    s.add_argument("--tag")
    s.add_argument("--sheet-rows", type=int, default=16)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("generate", help="sample grids from the prior and decode them")
    s.add_argument("--vqvae", required=True)
    s.add_argument("--prior", required=True)
    s.add_argument("--condition", action="append", help="shape,type1,type2 as ids or labels")
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--temperature", type=float, default=1.0)
    s.add_argument("--cols", type=int, default=8)
    s.add_argument("--out", required=True, help="PNG sheet path")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("swap-palette", help="exchange two sprites' palettes by encoding rank")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--image-a", required=True)
    s.add_argument("--image-b", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_swap_palette)

    s = sub.add_parser("inspect-checkpoint", help="print a checkpoint header as JSON")
    s.add_argument("checkpoint")
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except (PixelVQError, ValueError, OSError, KeyError) as exc:
        extra = {"command": args.command}
        if getattr(args, "config", None):
            extra["config"] = args.config
        _fail(type(exc).__name__, str(exc), **extra)
    sys.stdout.write(json.dumps(result, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
