import math
from types import SimpleNamespace

import numpy as np
import pytest

from bcnn import layers
from bcnn.data import Dataset, Sample
from bcnn.errors import ConfigError, StateError
from bcnn.layers import DenseParams
from bcnn.network import PARAM_NAMES, NetworkSpec, backward, build_model, forward
from bcnn.optim import (TrainConfig, batch_cross_entropy, batch_gradient, cross_entropy,
                        evaluate, fit, sgd_step, train_epoch)
from conftest import separable_samples

# learning rate / batch used for the small-net training checks
FAST = dict(learning_rate=0.3, batch_size=1, dropout_rate=0.0)


def test_cross_entropy_examples():
    assert cross_entropy(np.array([0.0, 1.0, 0.0, 0.0]), 1) == 0.0
    assert cross_entropy(np.full(4, 0.25), 3) == pytest.approx(math.log(4), rel=1e-15)
    assert math.log(4) == pytest.approx(1.386294, abs=1e-6)
    probs = [np.array([0.0, 1.0, 0.0, 0.0]), np.full(4, 0.25)]
    assert batch_cross_entropy(probs, [1, 0]) == pytest.approx(0.693147, abs=1e-6)


def test_cross_entropy_floor_and_sign():
    assert cross_entropy(np.array([1.0, 0.0]), 1) == pytest.approx(-math.log(1e-300))
    rng = np.random.default_rng(0)
    for _ in range(100):
        p = layers.softmax(5 * rng.standard_normal(4))
        assert cross_entropy(p, int(rng.integers(4))) >= 0.0


def test_config_validation():
    cfg = TrainConfig()
    assert (cfg.learning_rate, cfg.epochs, cfg.batch_size, cfg.dropout_rate) == (0.01, 96, 32, 0.1)
    assert cfg.validation_fraction == 0.2
    for bad in (dict(learning_rate=-1), dict(batch_size=0), dict(dropout_rate=1.0),
                dict(validation_fraction=1.0), dict(epochs=-1)):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)


def _scalar_model(value):
    return SimpleNamespace(params={"w": np.array([value])})


def test_sgd_step_examples():
    m = _scalar_model(1.0)
    sgd_step(m, {"w": np.array([0.5])}, 0.1)
    assert m.params["w"][0] == pytest.approx(0.95, rel=1e-15)

    m = _scalar_model(1.0)
    g = {"w": np.array([0.5])}
    sgd_step(m, g, 0.1)
    sgd_step(m, g, 0.1)
    assert 1.0 - m.params["w"][0] == pytest.approx(2 * 0.1 * 0.5, rel=1e-14)


def test_sgd_zero_gradient_is_noop():
    m = build_model(NetworkSpec.tiny(), seed=0)
    before = m.copy()
    sgd_step(m, {n: np.zeros_like(p) for n, p in m.params.items()}, 0.7)
    assert all(np.array_equal(m.params[n], before.params[n]) for n in PARAM_NAMES)


def test_sgd_shape_checks():
    m = build_model(NetworkSpec.tiny(), seed=0)
    with pytest.raises(StateError):
        sgd_step(m, {"conv1.weight": np.zeros(1)}, 0.1)
    bad = {n: np.zeros_like(p) for n, p in m.params.items()}
    bad["dense2.bias"] = np.zeros(5)
    with pytest.raises(StateError):
        sgd_step(m, bad, 0.1)


def test_sgd_on_quadratic_surrogate_moves_minus_lr_g():
    rng = np.random.default_rng(4)
    p = DenseParams(rng.standard_normal((3, 5)), rng.standard_normal(3))
    x, target = rng.standard_normal(5), rng.standard_normal(3)
    # loss = 0.5 * ||W x + b - target||^2, delta = output - target
    delta = layers.dense_forward(x, p) - target
    _, gw, gb = layers.dense_backward(x, p, delta)
    model = SimpleNamespace(params={"w": p.weights.copy(), "b": p.bias.copy()})
    sgd_step(model, {"w": gw, "b": gb}, 0.05)
    assert np.array_equal(model.params["w"], p.weights - 0.05 * gw)
    assert np.array_equal(model.params["b"], p.bias - 0.05 * gb)


def test_batch_gradient_is_mean_of_sample_gradients():
    m = build_model(NetworkSpec.tiny(), seed=1)
    samples = separable_samples(0)[:5]
    seeds = [11, 12, 13, 14, 15]
    mean, _ = batch_gradient(m, samples, seeds, 0.1)
    total = {n: np.zeros_like(p) for n, p in m.params.items()}
    for s, seed in zip(samples, seeds):
        tr = forward(m, s.pixels, "train", np.random.default_rng(seed), 0.1)
        g = backward(m, tr, s.label)
        for n in total:
            total[n] += g[n]
    for n in PARAM_NAMES:
        assert np.array_equal(mean[n], total[n] / 5)


def test_batch_gradient_threads_match_serial():
    m = build_model(NetworkSpec.tiny(), seed=1)
    samples = separable_samples(3)
    seeds = list(range(8))
    a, pa = batch_gradient(m, samples, seeds, 0.1, workers=1)
    b, pb = batch_gradient(m, samples, seeds, 0.1, workers=4)
    assert all(np.array_equal(a[n], b[n]) for n in PARAM_NAMES)
    assert all(np.array_equal(x, y) for x, y in zip(pa, pb))


def test_zero_lr_leaves_model_and_reports_evaluation():
    m = build_model(NetworkSpec.tiny(), seed=2)
    before = m.copy()
    data = separable_samples(1)
    cfg = TrainConfig(learning_rate=0.0, batch_size=3, dropout_rate=0.0)
    loss, acc, _ = train_epoch(m, data, cfg, np.random.default_rng(0))
    assert all(np.array_equal(m.params[n], before.params[n]) for n in PARAM_NAMES)
    ev_loss, ev_acc = evaluate(m, data)
    assert loss == pytest.approx(ev_loss, rel=1e-12) and acc == ev_acc


def test_single_sample_overfit():
    m = build_model(NetworkSpec.tiny(), seed=0)
    sample = separable_samples(0)[:1]
    cfg = TrainConfig(batch_size=1, dropout_rate=0.0, learning_rate=0.1)
    rng = np.random.default_rng(0)
    for _ in range(200):
        loss, _, _ = train_epoch(m, sample, cfg, rng)
    assert loss < 1e-2


def test_train_epoch_determinism():
    data = separable_samples(5)
    cfg = TrainConfig(learning_rate=0.1, batch_size=2, dropout_rate=0.1)
    runs = []
    for _ in range(2):
        m = build_model(NetworkSpec.tiny(), seed=9)
        rng = np.random.default_rng(9)
        runs.append([train_epoch(m, data, cfg, rng)[0] for _ in range(5)])
    assert runs[0] == runs[1]


def test_train_epoch_errors():
    m = build_model(NetworkSpec.tiny(), seed=0)
    with pytest.raises(ConfigError):
        train_epoch(m, [], TrainConfig(batch_size=1), np.random.default_rng(0))
    with pytest.raises(ConfigError):
        train_epoch(m, separable_samples(0), TrainConfig(batch_size=9), np.random.default_rng(0))


def test_fit_zero_epochs():
    m = build_model(NetworkSpec.tiny(), seed=0)
    before = m.copy()
    assert fit(m, separable_samples(0), TrainConfig(epochs=0, batch_size=1)) == []
    assert all(np.array_equal(m.params[n], before.params[n]) for n in PARAM_NAMES)


def test_fit_overfits_tiny_set():
    m = build_model(NetworkSpec.tiny(), seed=0)
    hist = fit(m, separable_samples(0), TrainConfig(epochs=200, validation_fraction=0.0, **FAST))
    assert len(hist) == 200 and [h.epoch for h in hist] == list(range(1, 201))
    assert hist[-1].train_acc == 1.0
    assert math.isnan(hist[-1].val_loss)  # no holdout requested


def test_fit_reports_validation():
    data = Dataset(separable_samples(2, per_class=5))
    m = build_model(NetworkSpec.tiny(), seed=0)
    seen = []
    hist = fit(m, data, TrainConfig(epochs=3, batch_size=4, learning_rate=0.1), seen.append)
    assert seen == hist
    for h in hist:
        assert h.train_loss >= 0 and h.val_loss >= 0
        assert 0 <= h.train_acc <= 1 and 0 <= h.val_acc <= 1


def test_descent_smoke_over_seeds():
    wins = 0
    for seed in range(100):
        m = build_model(NetworkSpec.tiny(), seed=seed)
        cfg = TrainConfig(learning_rate=0.1, batch_size=1, dropout_rate=0.1, seed=seed)
        rng = np.random.default_rng(seed)
        data = separable_samples(seed)
        losses = [train_epoch(m, data, cfg, rng)[0] for _ in range(50)]
        wins += losses[49] < losses[0]
    assert wins >= 95


def test_full_geometry_training_smoke():
    rng = np.random.default_rng(0)
    data = [Sample(rng.random((3, 80, 100)), k % 4) for k in range(4)]
    m = build_model(seed=0)
    cfg = TrainConfig(epochs=2, batch_size=2, validation_fraction=0.0, learning_rate=0.01)
    hist = fit(m, data, cfg)
    assert len(hist) == 2 and all(math.isfinite(h.train_loss) for h in hist)
