import csv
import hashlib
import json
import subprocess
import sys

import jsonschema
import pytest
from PIL import Image

from pixelvq.cli import apply_overrides, main
from pixelvq.metrics import REPORT_SCHEMA

HYPER = {"I": 16, "L": 1, "K": 8, "D": 4, "F": 8}
TRAIN = {"learning_rate": 0.003, "batch_size": 8, "epochs": 2, "augment": False}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    assert code == 0
    return json.loads(out.strip().splitlines()[-1])


def run_fail(capsys, *argv):
    with pytest.raises(SystemExit) as exc:
        main([str(a) for a in argv])
    assert exc.value.code != 0
    err = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(err)


def md5(path):
    return hashlib.md5(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Corpus, trained VQ-VAE and prior shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["--seed", "7", "make-synthetic", "--out", str(root / "data"), "--n", "10", "--size", "16"]) == 0
    cfg = {"manifest": str(root / "data" / "manifest.jsonl"), "out_dir": str(root / "run"), "seed": 1,
           "model": {"kind": "vqvae", "hyper": HYPER}, "train": TRAIN}
    (root / "train.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(root / "train.json")]) == 0
    pcfg = {"manifest": cfg["manifest"], "vqvae_checkpoint": str(root / "run" / "checkpoint.pxvq"),
            "out_dir": str(root / "prior"), "seed": 2, "prior": {"n_layers": 1, "n_filters": 8},
            "train": {"learning_rate": 0.003, "batch_size": 8, "epochs": 1}}
    (root / "prior.json").write_text(json.dumps(pcfg))
    assert main(["train-prior", "--config", str(root / "prior.json")]) == 0
    return root


def test_make_synthetic_counts_and_determinism(tmp_path, capsys, workspace):
    res = run(capsys, "--seed", "7", "make-synthetic", "--out", tmp_path / "d", "--n", "10", "--size", "16")
    assert res["entities"] == 10
    assert len(list((tmp_path / "d" / "images").glob("*.png"))) == 10
    assert len((tmp_path / "d" / "manifest.jsonl").read_text().splitlines()) == 10
    for f in (workspace / "data").rglob("*"):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "d" / f.relative_to(workspace / "data")).read_bytes()


def test_train_outputs(workspace):
    run_dir = workspace / "run"
    with open(run_dir / "loss_curve.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert {"epoch", "steps", "recon", "perplexity"} <= set(rows[0])
    resolved = json.loads((run_dir / "run.json").read_text())
    assert resolved["seed"] == 1 and resolved["model"]["hyper"]["K"] == 8


def test_train_rerun_byte_identical(workspace, tmp_path, capsys):
    run(capsys, "train", "--config", workspace / "train.json", "--out", tmp_path / "again")
    assert md5(tmp_path / "again" / "checkpoint.pxvq") == md5(workspace / "run" / "checkpoint.pxvq")
    assert (tmp_path / "again" / "loss_curve.csv").read_bytes() == (workspace / "run" / "loss_curve.csv").read_bytes()


def test_global_seed_overrides_config(workspace, tmp_path, capsys):
    run(capsys, "--seed", "99", "train", "--config", workspace / "train.json", "--out", tmp_path / "s")
    assert json.loads((tmp_path / "s" / "run.json").read_text())["seed"] == 99
    assert md5(tmp_path / "s" / "checkpoint.pxvq") != md5(workspace / "run" / "checkpoint.pxvq")


def test_base_vqvae_L0_capability_error(workspace, tmp_path, capsys):
    err = run_fail(capsys, "train", "--config", workspace / "train.json", "--out", tmp_path / "x",
                   "--set", "model.hyper.L=0", "--set", "model.hyper.pixelsight=false",
                   "--set", "model.hyper.adapter=false")
    assert err["error"] == "CapabilityError" and "pixelsight" in err["message"]
    assert err["config"] == str(workspace / "train.json")


def test_unknown_key_rejected(workspace, capsys):
    err = run_fail(capsys, "train", "--config", workspace / "train.json", "--set", "train.lr=0.1")
    assert err["error"] == "ConfigError" and "lr" in err["message"]


def test_eval_report_and_sheet(workspace, tmp_path, capsys):
    rep = run(capsys, "eval", "--checkpoint", workspace / "run" / "checkpoint.pxvq",
              "--manifest", workspace / "data" / "manifest.jsonl", "--split", "train",
              "--out", tmp_path / "ev", "--sheet-rows", "3")
    jsonschema.validate(json.loads((tmp_path / "ev" / "report.json").read_text()), REPORT_SCHEMA)
    assert rep["n_images"] > 0
    assert "Perplexity" in (tmp_path / "ev" / "report.txt").read_text()
    with Image.open(tmp_path / "ev" / "contact_sheet.png") as im:
        assert im.size == (2 * 16, 3 * 16)
    run(capsys, "eval", "--checkpoint", workspace / "run" / "checkpoint.pxvq",
        "--manifest", workspace / "data" / "manifest.jsonl", "--split", "train",
        "--out", tmp_path / "ev2", "--sheet-rows", "3")
    for name in ("report.json", "report.txt", "contact_sheet.png"):
        assert (tmp_path / "ev" / name).read_bytes() == (tmp_path / "ev2" / name).read_bytes()


def test_generate_deterministic_and_logged(workspace, tmp_path, capsys):
    args = ["--seed", "3", "generate", "--vqvae", workspace / "run" / "checkpoint.pxvq",
            "--prior", workspace / "prior" / "checkpoint.pxvq", "--condition", "0,0,0",
            "--condition", "1,1,1", "--n", "3", "--cols", "2"]
    run(capsys, *args, "--out", tmp_path / "a.png")
    run(capsys, *args, "--out", tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    with Image.open(tmp_path / "a.png") as im:
        assert im.size == (32, 32)
    log = [json.loads(x) for x in (tmp_path / "a.jsonl").read_text().splitlines()]
    assert len(log) == 3


def test_generate_n_zero_refused(workspace, tmp_path, capsys):
    err = run_fail(capsys, "generate", "--vqvae", workspace / "run" / "checkpoint.pxvq",
                   "--prior", workspace / "prior" / "checkpoint.pxvq", "--n", "0",
                   "--out", tmp_path / "z.png")
    assert err["error"] == "ConfigError"
    assert not (tmp_path / "z.png").exists()


def test_generate_K_mismatch(workspace, tmp_path, capsys):
    cfg = json.loads((workspace / "train.json").read_text())
    run(capsys, "train", "--config", workspace / "train.json", "--out", tmp_path / "k16",
        "--set", "model.hyper.K=16", "--set", "train.epochs=1")
    err = run_fail(capsys, "generate", "--vqvae", tmp_path / "k16" / "checkpoint.pxvq",
                   "--prior", workspace / "prior" / "checkpoint.pxvq", "--out", tmp_path / "m.png")
    assert err["error"] == "CompatibilityError"
    assert cfg["model"]["hyper"]["K"] == 8


def test_swap_palette(workspace, tmp_path, capsys):
    images = sorted((workspace / "data" / "images").glob("*.png"))
    res = run(capsys, "swap-palette", "--checkpoint", workspace / "run" / "checkpoint.pxvq",
              "--image-a", images[0], "--image-b", images[1], "--out", tmp_path / "sw")
    assert (tmp_path / "sw" / "swapped_a.png").exists() and (tmp_path / "sw" / "swapped_b.png").exists()
    mapping = json.loads((tmp_path / "sw" / "mapping.json").read_text())
    assert res["mapped_codes"] == len(mapping["a"])


def test_inspect_checkpoint(workspace, capsys):
    info = run(capsys, "inspect-checkpoint", workspace / "run" / "checkpoint.pxvq")
    assert info["model_kind"] == "vqvae" and info["version"] == 1
    assert info["config"]["K"] == 8 and info["seed"] == 1


def test_missing_checkpoint_is_json_error(capsys, tmp_path):
    err = run_fail(capsys, "inspect-checkpoint", tmp_path / "nope.pxvq")
    assert err["error"] in ("FileNotFoundError", "OSError")


def test_apply_overrides_nested():
    cfg = apply_overrides({"a": {"b": 1}}, ["a.b=2", "a.c=[1, 2]", "d=text"])
    assert cfg == {"a": {"b": 2, "c": [1, 2]}, "d": "text"}


def test_module_entry_point_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pixelvq", "train", "--set", "train.lr=1"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    line = json.loads(proc.stderr.strip().splitlines()[-1])
    assert line["error"] == "ConfigError"
