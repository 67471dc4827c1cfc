import hashlib
import math

import numpy as np
import pytest

from smallcnn import model as M
from smallcnn.checkpoint import checkpoint_bytes
from smallcnn.data import Dataset, Sample, split, SplitSpec
from smallcnn.exceptions import ConfigError, InputError, ShapeError
from smallcnn.optim import HyperParams
from smallcnn.training import TrainConfig, TrainingHistory, evaluate, train


def reduced(**kw):
    kw.setdefault("architecture", "reduced")
    kw.setdefault("epochs", 3)
    kw.setdefault("batch_size", 4)
    return TrainConfig(**kw)


def test_history_has_one_record_per_epoch(small_synthetic):
    tr, va = split(small_synthetic, SplitSpec(seed=0))
    _, history = train(reduced(epochs=4), tr, va)
    assert [r.epoch for r in history] == [1, 2, 3, 4]
    for r in history:
        assert 0 <= r.train_accuracy <= 1 and 0 <= r.val_accuracy <= 1
        assert r.train_loss >= 0 and r.val_loss >= 0


def test_single_step_when_batch_covers_dataset(small_synthetic, monkeypatch):
    from smallcnn import training

    calls = []
    real = training.step

    def counting(params, grads, state):
        calls.append(state.t)
        return real(params, grads, state)

    monkeypatch.setattr(training, "step", counting)
    _, history = train(reduced(epochs=1, batch_size=1000), small_synthetic)
    assert len(calls) == 1 and len(history) == 1
    assert not history[0].has_validation


def test_training_is_bit_deterministic(small_synthetic):
    tr, va = split(small_synthetic, SplitSpec(seed=1))
    cfg = reduced(epochs=2, zoom_range=0.2, seed=77)
    m1, h1 = train(cfg, tr, va)
    m2, h2 = train(cfg, tr, va)
    assert h1.to_csv() == h2.to_csv()
    assert checkpoint_bytes(m1) == checkpoint_bytes(m2)
    m3, _ = train(reduced(epochs=2, zoom_range=0.2, seed=78), tr, va)
    assert checkpoint_bytes(m3) != checkpoint_bytes(m1)


@pytest.mark.parametrize("optimizer, first, zoom_range", [
    ("rmsprop", "relu", 0.0), ("adam", "relu", 0.0), ("adam", "leaky_relu", 0.0), ("adam", "relu", 0.2),
])
def test_loss_decreases_on_learnable_data(small_synthetic, optimizer, first, zoom_range):
    cfg = reduced(optimizer=optimizer, first_layer_activation=first, zoom_range=zoom_range,
                  epochs=12, hyper=HyperParams(0.01))
    _, history = train(cfg, small_synthetic)
    assert history.final.train_loss < history[0].train_loss


def test_validation_happens_before_training():
    bad = Dataset([Sample(np.zeros((16, 16, 1)), 0, "a"), Sample(np.zeros((12, 12, 1)), 1, "b")])
    with pytest.raises(ShapeError):
        train(reduced(), bad)
    with pytest.raises(InputError):
        train(reduced(), Dataset([]))
    with pytest.raises(InputError):
        train(reduced(), Dataset([Sample(np.zeros((16, 16, 1)), 3, "c")]))


@pytest.mark.parametrize("kwargs", [dict(optimizer="sgd"), dict(first_layer_activation="sigmoid"),
                                    dict(zoom_range=1.0), dict(epochs=0), dict(batch_size=0),
                                    dict(threshold=1.0), dict(first_layer_activation="leaky_relu", leaky_slope=0)])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)


def test_config_dict_round_trip():
    cfg = TrainConfig(optimizer="rmsprop", hyper=HyperParams(0.01, rho=0.8), seed=2 ** 63)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_evaluate_zero_model_follows_tie_rule(small_synthetic):
    model = M.build_model(M.reduced_architecture(), (16, 16, 1), init="zeros")
    result = evaluate(model, small_synthetic)
    neg, pos = small_synthetic.class_counts
    assert result.accuracy == pos / (neg + pos)
    assert result.confusion.fn == 0 and result.confusion.tn == 0
    assert result.loss == pytest.approx(math.log(2))


def test_evaluate_is_pure(small_synthetic):
    model = M.build_model(M.reduced_architecture(), (16, 16, 1), rng=0)
    digest = hashlib.sha256(checkpoint_bytes(model)).hexdigest()
    a = evaluate(model, small_synthetic)
    b = evaluate(model, small_synthetic)
    assert a == b
    assert a.confusion.total == len(small_synthetic)
    assert hashlib.sha256(checkpoint_bytes(model)).hexdigest() == digest
    with pytest.raises(InputError):
        evaluate(model, Dataset([]))


def test_history_csv_round_trip(tmp_path, small_synthetic):
    _, history = train(reduced(epochs=2), small_synthetic)
    path = tmp_path / "h.csv"
    history.write_csv(path)
    text = path.read_text()
    assert text.splitlines()[0] == "epoch,train_loss,train_accuracy,val_loss,val_accuracy"
    assert text.splitlines()[1].endswith(",,")
    again = TrainingHistory.read_csv(path)
    assert again.to_csv() == history.to_csv()
