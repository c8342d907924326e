"""Testes do laço de treino."""

import csv

import numpy as np
import pytest

from ai.factory import build_model
from ai.trainer import batch_indices, evaluate_loss, train
from audio.synth import synth_dataset
from core.config import FeatureConfig, TrainConfig
from core.errors import DataError
from features.cache import FeatureCache
from features.spectral import extract

from conftest import tiny_model_config


def fit(cache, arch="cnn", **train_values):
    values = dict(batch_size=8, epochs=4, lr=1e-3, seed=0)
    values.update(train_values)
    model = build_model(tiny_model_config(arch))
    _, history = train(model, cache, TrainConfig(**values))
    return model, history


def test_batches_cover_everything_once():
    batches = batch_indices(9, 4, np.random.default_rng(0))

    assert [len(b) for b in batches] == [4, 5]
    assert sorted(np.concatenate(batches).tolist()) == list(range(9))


def test_batch_indices_exact_multiple():
    assert [len(b) for b in batch_indices(8, 4, np.random.default_rng(0))] == [4, 4]


@pytest.mark.parametrize("arch", ["cnn", "qv_cnn"])
def test_loss_decreases(separable_cache, arch):
    _, history = fit(separable_cache, arch, epochs=8)

    assert len(history) == 8
    assert history.losses[-1] < history.losses[0]


def test_training_is_deterministic(separable_cache):
    model_a, history_a = fit(separable_cache)
    model_b, history_b = fit(separable_cache)

    assert history_a.losses == history_b.losses
    assert [r.acc for r in history_a.records] == [r.acc for r in history_b.records]
    for (name, a), (_, b) in zip(model_a.state_dict().items(), model_b.state_dict().items()):
        np.testing.assert_array_equal(a, b, err_msg=name)


def test_zero_learning_rate_keeps_parameters(separable_cache):
    initial = build_model(tiny_model_config("cnn"))
    model, _ = fit(separable_cache, lr=0.0, epochs=1)

    for (name, a), (_, b) in zip(initial.named_parameters(), model.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data, err_msg=name)


def test_single_class_is_rejected(separable_cache):
    one_class = FeatureCache(
        images=separable_cache.images[:4],
        labels=np.ones(4, dtype=np.uint8),
        ids=separable_cache.ids[:4],
    )
    with pytest.raises(DataError):
        fit(one_class)


def test_class_weighting_and_validation(separable_cache, tmp_path):
    model, _ = fit(separable_cache, epochs=2, class_weighting=True)
    path = tmp_path / "history.csv"

    _, history = train(model, separable_cache, TrainConfig(batch_size=8, epochs=2),
                       val_cache=separable_cache)
    history.to_csv(path)

    with path.open() as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["epoch", "loss", "acc", "seconds", "val_loss", "val_acc"]
    assert [int(r["epoch"]) for r in rows] == [1, 2]
    assert 0.0 <= float(rows[-1]["val_acc"]) <= 1.0


def test_history_csv_without_validation(separable_cache, tmp_path):
    _, history = fit(separable_cache, epochs=1)
    path = tmp_path / "history.csv"
    history.to_csv(path)

    header = path.read_text().splitlines()[0]
    assert header == "epoch,loss,acc,seconds"


def test_checkpoint_written(separable_cache, tmp_path):
    model = build_model(tiny_model_config("cnn"))
    saved, _ = train(model, separable_cache, TrainConfig(batch_size=8, epochs=1),
                     checkpoint_path=tmp_path / "m.qvck", config={"model": {}})
    assert saved.exists()


def test_evaluate_loss_range(separable_cache):
    model = build_model(tiny_model_config("vit"))
    loss, acc = evaluate_loss(model, separable_cache)
    assert loss > 0.0
    assert 0.0 <= acc <= 1.0


@pytest.fixture(scope="module")
def synth_mel_cache():
    dataset = synth_dataset(50, 7)
    cfg = FeatureConfig()
    images = [extract(dataset.clip(e.utterance_id), "mel", cfg) for e in dataset.entries]
    return FeatureCache.from_images(images, [e.label.index for e in dataset.entries],
                                    [e.utterance_id for e in dataset.entries])


def test_two_epochs_on_synthetic_corpus_lower_the_loss(synth_mel_cache):
    assert len(synth_mel_cache) == 100

    _, history = fit(synth_mel_cache, "qv_cnn", batch_size=16, epochs=2, seed=7)

    assert len(history) == 2
    assert history.losses[1] < history.losses[0]
