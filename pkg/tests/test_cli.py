"""Testes da CLI (click) de ponta a ponta em escala mínima."""

import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from core.application import SweepCell, run_sweep_cell
from engine.checkpoint import load_checkpoint, save_checkpoint
from evaluation.charts import CHART_SIZE
from main import cli, parse_caches, parse_grid

BASE = ["--no-log-file", "--threads", "1", "--log-level", "WARNING"]
TINY_VIT = ["--vit-dim", "16", "--vit-mlp", "32", "--vit-layers", "1", "--vit-heads", "2"]


def invoke(*args):
    return CliRunner().invoke(cli, [*BASE, *map(str, args)])


@pytest.fixture(scope="module")
def caches(synth_corpus, tmp_path_factory):
    root = tmp_path_factory.mktemp("caches")
    paths = {}
    for split in ("train", "eval"):
        protocol = synth_corpus[split]
        out = root / f"{split}.mel.qvfc"
        result = invoke("extract", "--in", protocol.parent, "--protocol", protocol,
                        "--features", "mel", "--out", out, "--split", split)
        assert result.exit_code == 0, result.output
        paths[split] = out
    return paths


def test_parse_grid():
    assert parse_grid("cnn,qv-cnn x 8,16") == (["cnn", "qv_cnn"], [8, 16])
    assert parse_grid("qv_vit×4") == (["qv_vit"], [4])


def test_parse_caches(tmp_path):
    parsed = parse_caches(("mel=a.qvfc", str(tmp_path / "mfcc.qvfc")))
    assert set(parsed) == {"mel", "mfcc"}


def test_synth_writes_both_splits(tmp_path):
    result = invoke("synth", "--out", tmp_path / "corpus", "--n-per-class", 2, "--eval-n-per-class", 1)

    assert result.exit_code == 0, result.output
    assert (tmp_path / "corpus" / "train" / "protocol.txt").read_text().count("\n") == 4
    assert (tmp_path / "corpus" / "eval" / "protocol.txt").read_text().count("\n") == 2
    assert (tmp_path / "corpus" / "synth.manifest.json").exists()


def test_outputs_are_write_once(tmp_path):
    assert invoke("synth", "--out", tmp_path, "--n-per-class", 1).exit_code == 0

    again = invoke("synth", "--out", tmp_path, "--n-per-class", 1)
    forced = invoke("synth", "--out", tmp_path, "--n-per-class", 1, "--force")

    assert again.exit_code == 2
    assert forced.exit_code == 0


def test_extract_cache_and_sidecars(caches):
    manifest = json.loads((caches["train"].parent / (caches["train"].name + ".manifest.json")).read_text())

    assert manifest["command"] == "extract"
    assert caches["train"].with_name(caches["train"].name + ".ids.txt").read_text().count("\n") == 8


@pytest.mark.parametrize("arch,extra", [
    ("qv-cnn", ["--filters", "4"]),
    ("qv-vit", ["--filters", "4", *TINY_VIT]),
])
def test_train_then_eval(caches, tmp_path, arch, extra):
    ckpt = tmp_path / "model.qvck"
    trained = invoke("train", "--cache", caches["train"], "--arch", arch, "--batch", 4, "--epochs", 2,
                     "--lr", "1e-3", "--out", ckpt, *extra)
    assert trained.exit_code == 0, trained.output
    assert (tmp_path / "model.history.csv").read_text().startswith("epoch,loss,acc,seconds")

    report_path = tmp_path / "report.json"
    evaluated = invoke("eval", "--cache", caches["eval"], "--ckpt", ckpt, "--out", report_path)

    assert evaluated.exit_code == 0, evaluated.output
    report = json.loads(report_path.read_text())
    assert report["n_bonafide"] == 3 and report["n_spoof"] == 3
    assert 0.0 <= report["eer"] <= 1.0
    assert sum(map(sum, report["confusion"])) == 6
    assert (tmp_path / "report.confusion.csv").exists()
    assert (tmp_path / "report.confusion.png").exists()
    assert len((tmp_path / "report.scores.txt").read_text().splitlines()) == 6


def test_zero_epochs_is_a_usage_error(caches, tmp_path):
    result = invoke("train", "--cache", caches["train"], "--arch", "cnn", "--epochs", 0,
                    "--out", tmp_path / "m.qvck")
    assert result.exit_code == 2


def test_unknown_arch(caches, tmp_path):
    result = invoke("train", "--cache", caches["train"], "--arch", "resnet", "--epochs", 1,
                    "--out", tmp_path / "m.qvck")
    assert result.exit_code == 2


def test_missing_cache_is_a_data_error(tmp_path):
    result = invoke("train", "--cache", tmp_path / "absent.qvfc", "--arch", "cnn", "--epochs", 1,
                    "--out", tmp_path / "m.qvck")
    assert result.exit_code == 3


def test_waves_render_eight_basis_maps(synth_corpus, tmp_path):
    wav = next(synth_corpus["train"].parent.glob("*.wav"))
    out = tmp_path / "waves"

    result = invoke("waves", "--in", wav, "--features", "mel", "--out", out)

    assert result.exit_code == 0, result.output
    assert len(list(out.glob("*.pgm"))) == 8
    assert invoke("waves", "--in", wav, "--out", out).exit_code == 2


def test_sweep_summary(caches, tmp_path):
    out = tmp_path / "sweep"
    result = invoke("sweep", "--cache", f"mel={caches['train']}", "--eval-cache", f"mel={caches['eval']}",
                    "--grid", "cnn,qv-cnn x 4", "--epochs", 1, "--filters", 4, "--out", out)

    assert result.exit_code == 0, result.output
    with (out / "summary.csv").open() as f:
        rows = list(csv.DictReader(f))
    assert [r["classifier"] for r in rows] == ["CNN", "QV-CNN"]
    assert all(r["status"] == "ok" for r in rows)
    assert all(0.0 <= float(r["eer"]) <= 1.0 for r in rows)
    for name in ("accuracy_mel.png", "eer_mel.png", "batch_size.png"):
        with Image.open(out / name) as chart:
            assert chart.format == "PNG"
            assert chart.size == CHART_SIZE
    manifest = json.loads((out / "summary.csv.manifest.json").read_text())
    assert str(out / "batch_size.png") in manifest["outputs"]


def history_without_time(path):
    with path.open() as f:
        return [{k: v for k, v in row.items() if k != "seconds"} for row in csv.DictReader(f)]


def test_forced_reruns_reproduce_outputs(synth_corpus, caches, tmp_path):
    protocol = synth_corpus["train"]
    cache = tmp_path / "train.mel.qvfc"
    extract_args = ["extract", "--in", protocol.parent, "--protocol", protocol, "--features", "mel",
                    "--out", cache]
    assert invoke(*extract_args).exit_code == 0
    first_cache = cache.read_bytes()
    assert invoke(*extract_args, "--force").exit_code == 0
    assert cache.read_bytes() == first_cache

    ckpt = tmp_path / "m.qvck"
    train_args = ["train", "--cache", caches["train"], "--arch", "qv-cnn", "--batch", 4, "--epochs", 2,
                  "--lr", "1e-3", "--filters", 4, "--out", ckpt]
    assert invoke(*train_args).exit_code == 0
    first_ckpt, first_history = ckpt.read_bytes(), history_without_time(tmp_path / "m.history.csv")
    assert invoke(*train_args, "--force").exit_code == 0
    assert ckpt.read_bytes() == first_ckpt
    assert history_without_time(tmp_path / "m.history.csv") == first_history

    summary = tmp_path / "sweep" / "summary.csv"
    sweep_args = ["sweep", "--cache", f"mel={caches['train']}", "--eval-cache", f"mel={caches['eval']}",
                  "--grid", "qv-cnn x 4", "--epochs", 1, "--filters", 4, "--out", summary.parent]
    assert invoke(*sweep_args).exit_code == 0
    first_summary = summary.read_bytes()
    assert invoke(*sweep_args).exit_code == 2
    assert invoke(*sweep_args, "--force").exit_code == 0
    assert summary.read_bytes() == first_summary


def test_sweep_cell_does_not_overwrite_checkpoint(caches, tmp_path):
    cell = SweepCell(features="mel", arch="cnn", batch=4, epochs=1, seed=0,
                     train_cache=str(caches["train"]), eval_cache=str(caches["eval"]),
                     out_dir=str(tmp_path), dtype="float32", model_overrides={})
    existing = tmp_path / f"{cell.tag}.qvck"
    existing.write_bytes(b"keep")

    row = run_sweep_cell(cell)

    assert "ContractError" in row["status"]
    assert existing.read_bytes() == b"keep"
    cell.force = True
    assert run_sweep_cell(cell)["status"] == "ok"


def test_non_finite_weights_are_a_numeric_error(caches, tmp_path):
    ckpt = tmp_path / "m.qvck"
    trained = invoke("train", "--cache", caches["train"], "--arch", "qv-cnn", "--batch", 4, "--epochs", 1,
                     "--filters", 4, "--out", ckpt)
    assert trained.exit_code == 0, trained.output
    config, state = load_checkpoint(ckpt)
    state["head.weight"][...] = np.nan
    broken = tmp_path / "broken.qvck"
    save_checkpoint(broken, state, config)

    result = invoke("eval", "--cache", caches["eval"], "--ckpt", broken, "--out", tmp_path / "r.json")

    assert result.exit_code == 4
    assert not (tmp_path / "r.json").exists()


def test_cli_shuts_the_app_down(tmp_path, monkeypatch):
    calls = []
    monkeypatch.setattr("core.application.QVApp.shutdown", lambda self: calls.append(self))

    assert invoke("synth", "--out", tmp_path, "--n-per-class", 1).exit_code == 0
    assert len(calls) == 1
