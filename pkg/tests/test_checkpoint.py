"""Testes de checkpoint: gravação, leitura e corrupção."""

import numpy as np
import pytest

from ai.factory import build_model
from ai.model_manager import ModelManager, score
from core.errors import CheckpointFormatError, ShapeError
from engine.checkpoint import load_checkpoint, save_checkpoint

from conftest import tiny_model_config


@pytest.mark.parametrize("arch", ["qv_cnn", "qv_vit"])
def test_scores_survive_round_trip(tmp_path, rng, arch):
    cfg = tiny_model_config(arch, seed=5)
    model = build_model(cfg).eval()
    images = rng.normal(size=(3, 1, 32, 32)).astype(np.float32)
    path = tmp_path / "model.qvck"
    save_checkpoint(path, model.state_dict(), {"model": cfg.model_dump(mode="json")})

    manager = ModelManager()
    manager.load(path)

    np.testing.assert_array_equal(manager.score(images), score(model, images))
    assert manager.model_config == cfg


def test_state_and_config_preserved(tmp_path):
    state = {"a.weight": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.array(1.5, dtype=np.float32)}
    path = tmp_path / "x.qvck"
    save_checkpoint(path, state, {"k": [1, 2]})

    config, loaded = load_checkpoint(path)

    assert config == {"k": [1, 2]}
    assert list(loaded) == ["a.weight", "b"]
    np.testing.assert_array_equal(loaded["a.weight"], state["a.weight"])
    assert loaded["b"].shape == ()


def corrupt(path, mutate):
    blob = bytearray(path.read_bytes())
    path.write_bytes(bytes(mutate(blob)))


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:-3],
    lambda b: b + b"\x00",
    lambda b: b[:4] + b"\x09\x00\x00\x00" + b[8:],
])
def test_corrupted_files(tmp_path, mutate):
    path = tmp_path / "x.qvck"
    save_checkpoint(path, {"w": np.ones(4, dtype=np.float32)}, {})
    corrupt(path, mutate)

    with pytest.raises(CheckpointFormatError) as info:
        load_checkpoint(path)
    assert info.value.exit_code == 3


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(tmp_path / "none.qvck")


def test_incompatible_state(tmp_path):
    cfg = tiny_model_config("cnn")
    path = tmp_path / "x.qvck"
    save_checkpoint(path, {"w": np.ones(1, dtype=np.float32)}, {"model": cfg.model_dump(mode="json")})

    with pytest.raises(CheckpointFormatError):
        ModelManager().load(path)


def test_input_shape_checked(tmp_path, rng):
    cfg = tiny_model_config("cnn")
    path = tmp_path / "x.qvck"
    save_checkpoint(path, build_model(cfg).state_dict(), {"model": cfg.model_dump(mode="json")})
    manager = ModelManager()
    manager.load(path)

    with pytest.raises(ShapeError):
        manager.score(rng.normal(size=(2, 1, 16, 16)))
