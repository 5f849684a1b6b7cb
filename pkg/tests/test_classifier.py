import numpy as np
import pytest

from clad.classifier import ClassifierTrainConfig, predict_logits, train_classifier
from clad.engine import CrossEntropyLoss, Dense, Network, ReLU, grad_check
from clad.selflabel import PseudoLabels


def two_blobs(n=100, seed=0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal([-2.0, 0.0], 0.5, size=(n, 2)), rng.normal([2.0, 0.0], 0.5, size=(n, 2))])
    return x, PseudoLabels(np.repeat([0, 1], n), 2)


def test_default_training_settings():
    cfg = ClassifierTrainConfig()
    assert (cfg.optimizer, cfg.learning_rate, cfg.epochs) == ("adam", 0.0001, 100)


@pytest.fixture(scope="module")
def separable_model():
    x, labels = two_blobs()
    cfg = ClassifierTrainConfig(hidden_widths=(16,), epochs=30, batch_size=16, learning_rate=0.01)
    return x, labels, train_classifier(x, labels, cfg)


def test_separable_blobs_reach_high_accuracy(separable_model):
    x, labels, model = separable_model
    assert len(model.accuracy_history) == 30
    assert model.accuracy_history[-1] >= 0.99
    pred = predict_logits(model, x).argmax(1)
    assert np.mean(pred == labels.labels) >= 0.99


def test_predict_logits_pure_and_sized(separable_model):
    x, _, model = separable_model
    a = predict_logits(model, x[3])
    assert a.shape == (2,)
    np.testing.assert_array_equal(a, predict_logits(model, x[3]))
    with pytest.raises(ValueError):
        predict_logits(model, np.zeros((1, 3)))


def test_learning_rate_zero_constant_accuracy():
    x, labels = two_blobs(30)
    model = train_classifier(x, labels, ClassifierTrainConfig(epochs=5, learning_rate=0.0))
    assert len(set(model.accuracy_history)) == 1


def test_single_label_rejected():
    x, _ = two_blobs(10)
    with pytest.raises(ValueError, match="cluster count"):
        train_classifier(x, PseudoLabels(np.zeros(20, dtype=int), 3))
    with pytest.raises(ValueError):
        train_classifier(x[:5], PseudoLabels(np.array([0, 1] * 10), 2))


def test_output_width_is_label_count():
    x, _ = two_blobs(10)
    labels = PseudoLabels(np.array([0, 1, 3] * 6 + [0, 1]), 5)
    model = train_classifier(x, labels, ClassifierTrainConfig(epochs=1))
    assert predict_logits(model, x).shape == (20, 5)
    assert model.n_classes == 5


def test_cross_entropy_grad_check():
    rng = np.random.default_rng(1)
    net = Network([Dense(5, 7, rng), ReLU(), Dense(7, 4, rng)], (5,))
    assert grad_check(net, CrossEntropyLoss(rng.integers(0, 4, 6)), rng.normal(size=(6, 5))) < 1e-4


def test_conv_preset_trains():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(12, 8, 8))
    labels = PseudoLabels(np.repeat([0, 1, 2], 4), 3)
    model = train_classifier(x, labels, ClassifierTrainConfig(preset="conv", epochs=2))
    assert predict_logits(model, x).shape == (12, 3)
