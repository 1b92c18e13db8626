import hashlib
import math

import numpy as np
import pytest

from bcnn import layers
from bcnn.data import Sample
from bcnn.gradcheck import check_model, numeric_grad, relative_error, tie_free
from bcnn.network import NetworkSpec, backward, build_model, forward


def _sample(seed, label=None, shape=(1, 8, 8)):
    rng = np.random.default_rng(seed)
    return Sample(rng.random(shape), int(rng.integers(4)) if label is None else label)


def _digest(model):
    h = hashlib.sha256()
    for name, p in model.params.items():
        h.update(name.encode())
        h.update(p.tobytes())
    return h.hexdigest()


def test_relative_error_examples():
    assert relative_error(1.0, 1.0) == 0.0
    assert relative_error(2.0, 1.0) == 0.5
    # the 1e-8 floor keeps two near-zero values from blowing up
    assert relative_error(1e-12, -1e-12) == pytest.approx(2e-4)


@pytest.mark.parametrize("seed", range(5))
def test_check_model_passes_tiny(seed):
    m = build_model(NetworkSpec.tiny(), seed=seed)
    report = check_model(m, _sample(seed), tol=1e-4, seed=seed)
    assert report.passed, report.format_table()
    assert set(report.tensors) == set(m.params)


def test_one_parameter_hand_derivation():
    # all weights zero except dense2.weight[0, 1] = w; hidden unit 1 fixed at x = tanh(0.7)
    spec = NetworkSpec.tiny()
    m = build_model(spec, seed=0)
    for p in m.params.values():
        p[...] = 0.0
    m.params["dense1.bias"][1] = 0.7
    x = math.tanh(0.7)
    for label in range(4):
        s = Sample(np.random.default_rng(label).random(spec.input_shape), label)
        expected = x * (0.25 - (label == 0))
        num = numeric_grad(m, s, "dense2.weight", (0, 1))
        ana = backward(m, forward(m, s.pixels), label)["dense2.weight"][0, 1]
        assert num == pytest.approx(expected, rel=1e-8)
        assert ana == pytest.approx(expected, rel=1e-14)


def test_dead_path_gradient_is_zero():
    m = build_model(NetworkSpec.tiny(), seed=1)
    m.params["dense1.weight"][0] = 0.0
    m.params["dense1.bias"][0] = 0.0
    s = _sample(1)
    ana = backward(m, forward(m, s.pixels), s.label)["dense2.weight"]
    for j in range(4):
        assert ana[j, 0] == 0.0
        assert abs(numeric_grad(m, s, "dense2.weight", (j, 0))) < 1e-8


def test_eps_halving_shrinks_truncation_error():
    m = build_model(NetworkSpec.tiny(), seed=2)
    s = tie_free(m, _sample(2))
    idx = (1, 0, 4, 4)
    exact = backward(m, forward(m, s.pixels), s.label)["conv1.weight"][idx]
    e1 = abs(numeric_grad(m, s, "conv1.weight", idx, eps=0.04) - exact)
    e2 = abs(numeric_grad(m, s, "conv1.weight", idx, eps=0.02) - exact)
    assert 3.0 < e1 / e2 < 5.0


def test_numeric_grad_restores_parameters_bitwise():
    m = build_model(NetworkSpec.tiny(), seed=3)
    before = _digest(m)
    s = _sample(3)
    for name, p in m.params.items():
        for flat in range(0, p.size, max(1, p.size // 7)):
            numeric_grad(m, s, name, flat, eps=1e-3)
    assert _digest(m) == before
    check_model(m, s, budget=10)
    assert _digest(m) == before


def test_infinite_tolerance_always_passes():
    m = build_model(NetworkSpec.tiny(), seed=4)
    assert check_model(m, _sample(4), tol=math.inf, budget=3).passed


def test_mutated_conv_gradient_is_caught(monkeypatch):
    real = layers.conv2d_backward

    def flipped(inp, p, grad_out, need_input=True):
        gi, gw, gb = real(inp, p, grad_out, need_input)
        return gi, -gw, gb

    monkeypatch.setattr(layers, "conv2d_backward", flipped)
    m = build_model(NetworkSpec.tiny(), seed=5)
    report = check_model(m, _sample(5))
    assert not report.passed
    assert report.worst in ("conv1.weight", "conv2.weight")
    assert report.tensors["dense2.weight"].max_rel < 1e-4
    assert "FAIL" in report.format_table()


def test_out_of_range_coordinates():
    m = build_model(NetworkSpec.tiny(), seed=0)
    s = _sample(0)
    with pytest.raises(IndexError):
        numeric_grad(m, s, "dense2.bias", 4)
    with pytest.raises(IndexError):
        numeric_grad(m, s, "conv1.weight", (0, 0, 9, 0))
    with pytest.raises(IndexError):
        numeric_grad(m, s, "conv3.weight", 0)
    with pytest.raises(ValueError):
        numeric_grad(m, s, "dense2.bias", 0, eps=0.0)


def test_budget_limits_probes():
    m = build_model(NetworkSpec.tiny(), seed=0)
    report = check_model(m, _sample(0), budget=5)
    for name, t in report.tensors.items():
        assert t.n_checked == min(5, m.params[name].size)
