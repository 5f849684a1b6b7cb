import numpy as np
import pytest

from clad.features import AutoencoderConfig, InputScaler, encode, train_autoencoder


def small_cfg(**kw):
    base = dict(hidden_dim=3, hidden_widths=(16,), epochs=5, batch_size=8, seed=0)
    base.update(kw)
    return AutoencoderConfig(**base)


def test_default_training_settings():
    cfg = AutoencoderConfig()
    assert cfg.optimizer == "adam"
    assert cfg.learning_rate == 0.01
    assert cfg.epochs == 100
    assert cfg.hidden_dim == 100


def test_overfits_single_repeated_point():
    x = np.tile(np.array([[0.2, 0.9, 0.5, 0.1]]), (16, 1))
    model = train_autoencoder(x, small_cfg(epochs=200, keep_prob=1.0))
    assert len(model.loss_history) == 200
    assert model.loss_history[-1] < 1e-3


def test_learning_rate_zero_changes_nothing():
    x = np.random.default_rng(0).uniform(size=(30, 4))
    frozen = train_autoencoder(x, small_cfg(epochs=0))
    model = train_autoencoder(x, small_cfg(learning_rate=0.0))
    for a, b in zip(model.encoder.parameters(), frozen.encoder.parameters()):
        np.testing.assert_array_equal(a, b)
    assert len(set(model.loss_history)) == 1


def test_errors():
    with pytest.raises(ValueError):
        train_autoencoder(np.empty((0, 3)), small_cfg())
    with pytest.raises(ValueError):
        train_autoencoder([[0.0, 1.0], [1.0]], small_cfg())


def test_encode_deterministic_and_sized():
    x = np.random.default_rng(1).uniform(size=(20, 6))
    model = train_autoencoder(x, small_cfg(hidden_dim=10))
    z1 = encode(model, x[0])
    assert z1.shape == (10,)
    np.testing.assert_array_equal(z1, encode(model, x[0]))
    # batched and single-row matrix products may round differently in the last bit
    np.testing.assert_allclose(encode(model, x)[0], z1, rtol=1e-12, atol=1e-15)
    with pytest.raises(ValueError):
        encode(model, np.zeros((2, 5)))


@pytest.mark.parametrize("dim", [10, 50, 100])
def test_hidden_dim_sweep(dim):
    x = np.random.default_rng(2).uniform(size=(12, 8))
    model = train_autoencoder(x, small_cfg(hidden_dim=dim, epochs=1))
    assert encode(model, x).shape == (12, dim)


def test_smoothed_loss_makes_progress():
    rng = np.random.default_rng(3)
    x = np.vstack([rng.normal(m, 0.3, size=(40, 5)) for m in (0.0, 2.0, 4.0)])
    model = train_autoencoder(x, small_cfg(epochs=30))
    h = np.array(model.loss_history)
    smooth = np.convolve(h, np.ones(5) / 5, mode="valid")
    assert smooth[-1] <= smooth[0]


def test_scaler_recorded_and_applied():
    x = np.random.default_rng(4).uniform(-5, 15, size=(25, 3))
    model = train_autoencoder(x, small_cfg(epochs=1))
    assert model.scaler.lo == pytest.approx(x.min())
    assert model.scaler.hi == pytest.approx(x.max())
    xs = model.scaler.transform(x)
    assert xs.min() == 0.0 and xs.max() == 1.0
    assert InputScaler.fit(np.ones((3, 2))).scale == 1.0


def test_conv_preset_on_images():
    x = np.random.default_rng(5).uniform(size=(6, 9, 9))
    model = train_autoencoder(x, small_cfg(preset="conv", epochs=2))
    assert encode(model, x).shape == (6, 3)
