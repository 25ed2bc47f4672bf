import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netrel import DataError, NumericalError
from netrel.neural import (AdamState, Dataset, Layer, Mlp, TrainConfig, adam_step, backward,
                           forward, load_model, loss_bce, loss_mse, save_model, train)
from oracles import fd_gradients

ACTS = ("relu", "sigmoid", "tanh", "identity")


def random_model(rng, max_layers=4, max_units=16, out_act=None):
    n_layers = int(rng.integers(1, max_layers + 1))
    dims = [int(rng.integers(1, max_units + 1)) for _ in range(n_layers + 1)]
    acts = [ACTS[int(rng.integers(4))] for _ in range(n_layers)]
    if out_act:
        dims[-1] = 1
        acts[-1] = out_act
    model = Mlp.create(dims, acts, seed=int(rng.integers(2**31)))
    for layer in model.layers:  # nonzero biases exercise every term
        layer.bias[...] = rng.normal(0, 0.3, layer.bias.shape)
    return model


# -- forward -----------------------------------------------------------------

def test_forward_bias_only():
    m = Mlp([Layer(np.zeros((3, 4)), np.arange(4.0), "identity"),
             Layer(np.zeros((4, 2)), np.array([0.5, -1.5]), "identity")])
    assert forward(m, [1.0, 2.0, 3.0]).tolist() == [0.5, -1.5]


def test_forward_relu_identity_matrix():
    m = Mlp([Layer(np.eye(2), np.zeros(2), "relu")])
    assert forward(m, [-1.0, 2.0]).tolist() == [0.0, 2.0]


def test_forward_single_hidden_layer_by_hand():
    W1 = np.array([[1.0, -2.0], [0.5, 0.25]])
    b1 = np.array([0.1, -0.2])
    W2 = np.array([[2.0], [-1.0]])
    b2 = np.array([0.3])
    m = Mlp([Layer(W1, b1, "sigmoid"), Layer(W2, b2, "identity")])
    x = np.array([0.4, -0.6])
    h = [1 / (1 + np.exp(-(0.4 * 1.0 - 0.6 * 0.5 + 0.1))),
         1 / (1 + np.exp(-(0.4 * -2.0 - 0.6 * 0.25 - 0.2)))]
    expected = h[0] * 2.0 - h[1] + 0.3
    assert forward(m, x)[0] == pytest.approx(expected, rel=1e-14)


def test_forward_matches_dense_algebra_oracle():
    rng = np.random.default_rng(0)
    dims = [5, 7, 6, 3]
    Ws = [rng.normal(size=(a, b)) for a, b in zip(dims[:-1], dims[1:])]
    bs = [rng.normal(size=b) for b in dims[1:]]
    m = Mlp([Layer(W, b, a) for W, b, a in zip(Ws, bs, ("tanh", "relu", "identity"))])
    x = rng.normal(size=(10, 5))
    # independent evaluation, one row and one output unit at a time
    for i in range(10):
        a = list(x[i])
        for W, b, act in zip(Ws, bs, ("tanh", "relu", "identity")):
            z = [sum(a[k] * W[k, j] for k in range(len(a))) + b[j] for j in range(W.shape[1])]
            a = [np.tanh(v) if act == "tanh" else max(v, 0.0) if act == "relu" else v for v in z]
        np.testing.assert_allclose(forward(m, x[i]), a, rtol=1e-12, atol=1e-14)
    np.testing.assert_array_equal(forward(m, x)[3], forward(m, x[3]))


def test_forward_errors():
    m = Mlp.create([3, 2], ["relu"])
    with pytest.raises(DataError):
        forward(m, [1.0, 2.0])
    with pytest.raises(DataError):
        forward(m, [1.0, np.nan, 0.0])


def test_model_validation():
    with pytest.raises(DataError):
        Mlp([Layer(np.zeros((2, 3)), np.zeros(3), "relu"), Layer(np.zeros((2, 1)), np.zeros(1), "relu")])
    with pytest.raises(DataError):
        Mlp([Layer(np.zeros((2, 3)), np.zeros(3), "softmax")])
    with pytest.raises(DataError):
        Mlp([Layer(np.full((2, 3), np.inf), np.zeros(3), "relu")])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(ACTS[:3]))
def test_activation_ranges(seed, act):
    rng = np.random.default_rng(seed)
    m = Mlp.create([4, 8], [act], seed=seed)
    y = forward(m, rng.normal(0, 3, (20, 4)))
    if act == "relu":
        assert np.all(y >= 0)
    elif act == "sigmoid":
        assert np.all((y > 0) & (y < 1))
    else:
        assert np.all((y > -1) & (y < 1))


# -- losses ------------------------------------------------------------------

def test_mse_values():
    assert loss_mse([[1.0, 2.0]], [[1.0, 2.0]]) == 0.0
    assert loss_mse([[0.0]], [[1.0]]) == 0.5
    assert loss_mse([[1.0, 0.0], [0.0, 2.0]], [[0.0, 0.0], [0.0, 0.0]]) == 1.25
    with pytest.raises(DataError):
        loss_mse([[1.0]], [[1.0, 2.0]])


def test_bce_values():
    assert loss_bce([[1 - 1e-12]], [[1.0]]) == pytest.approx(0.0, abs=1e-11)
    assert loss_bce([[0.5]], [[1.0]]) == pytest.approx(np.log(2))
    assert loss_bce([[0.9]], [[0.0]]) == pytest.approx(-np.log(0.1))
    assert np.isfinite(loss_bce([[0.0]], [[1.0]]))
    with pytest.raises(DataError):
        loss_bce([[0.5]], [[0.3]])


# -- gradients ---------------------------------------------------------------

def _check_gradients(model, X, Y, loss):
    """Worst relative error of backprop against extended-precision central differences."""
    worst = 0.0
    for (gW, gb), (nW, nb) in zip(backward(model, X, Y, loss), fd_gradients(model, X, Y, loss)):
        for g, num in ((gW, nW), (gb, nb)):
            scale = np.maximum(np.abs(num), np.abs(g))
            mask = scale > 1e-8
            rel = np.abs(num - g)[mask] / scale[mask]
            worst = max(worst, rel.max(initial=0.0))
            assert np.all(np.abs(num - g)[~mask] < 1e-12)
    return worst


def test_gradient_zero_at_perfect_fit():
    m = Mlp.create([3, 4, 2], ["tanh", "identity"], seed=1)
    X = np.random.default_rng(0).normal(size=(5, 3))
    Y = forward(m, X)
    for gW, gb in backward(m, X, Y, "mse"):
        assert np.all(gW == 0) and np.all(gb == 0)


def test_linear_mse_gradient_closed_form():
    rng = np.random.default_rng(3)
    W, b = rng.normal(size=(4, 2)), rng.normal(size=2)
    m = Mlp([Layer(W, b, "identity")])
    X, Y = rng.normal(size=(7, 4)), rng.normal(size=(7, 2))
    (gW, gb), = backward(m, X, Y, "mse")
    resid = X @ W + b - Y
    np.testing.assert_allclose(gW, X.T @ resid / 7, rtol=1e-12)
    np.testing.assert_allclose(gb, resid.sum(axis=0) / 7, rtol=1e-12)


@pytest.mark.parametrize("loss", ["mse", "bce"])
def test_gradients_match_finite_differences(loss):
    rng = np.random.default_rng(10 if loss == "mse" else 11)
    worst = 0.0
    for _ in range(20):
        model = random_model(rng, out_act="sigmoid" if loss == "bce" else None)
        X = rng.normal(size=(6, model.input_dim))
        if loss == "bce":
            Y = rng.integers(0, 2, (6, 1)).astype(float)
        else:
            Y = rng.normal(size=(6, model.output_dim))
        worst = max(worst, _check_gradients(model, X, Y, loss))
    assert worst < 1e-5


def test_bce_gradient_non_sigmoid_output():
    rng = np.random.default_rng(12)
    m = Mlp.create([3, 5, 1], ["tanh", "tanh"], seed=4)
    m.layers[-1].bias[...] = 0.0
    X = rng.normal(size=(4, 3))
    Y = np.array([[1.0], [0.0], [1.0], [0.0]])
    # tanh output can be negative; keep predictions in (0, 1) for a finite loss
    m.layers[-1].weights[...] = np.abs(m.layers[-1].weights) * 0.1
    m.layers[-1].bias[...] = 0.5
    assert _check_gradients(m, X, Y, "bce") < 1e-5


def test_backward_errors():
    m = Mlp.create([3, 1], ["sigmoid"])
    with pytest.raises(DataError):
        backward(m, np.zeros((0, 3)), np.zeros((0, 1)))
    with pytest.raises(DataError):
        backward(m, np.zeros((2, 3)), np.zeros((2, 2)))


# -- Adam ----------------------------------------------------------------------

def test_adam_zero_gradient_is_fixed_point():
    p = np.array([1.0, -2.0])
    state = AdamState.zeros(2)
    for _ in range(10):
        adam_step(p, np.zeros(2), state)
    assert p.tolist() == [1.0, -2.0]


def test_adam_first_step_size():
    cfg = TrainConfig()
    p = np.zeros(4)
    adam_step(p, np.array([3.0, -0.05, 0.5, -50.0]), AdamState.zeros(4), cfg)
    assert np.all((np.abs(p) >= cfg.learning_rate * (1 - 1e-6)) & (np.abs(p) <= cfg.learning_rate))
    assert np.array_equal(np.sign(p), [-1, 1, -1, 1])


def test_adam_scalar_quadratic():
    cfg = TrainConfig(learning_rate=0.1)
    w = np.array([0.0])
    state = AdamState.zeros(1)
    losses = []
    for _ in range(200):
        losses.append(float((w[0] - 3) ** 2))
        adam_step(w, 2 * (w - 3), state, cfg)
    assert abs(w[0] - 3) < 0.5
    assert losses[-1] < losses[0] and np.mean(losses[100:]) < np.mean(losses[:100])


def test_adam_shape_mismatch():
    with pytest.raises(DataError):
        adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2))


# -- training -------------------------------------------------------------------

def test_train_config_validation():
    for bad in (dict(batch_size=0), dict(learning_rate=0.0), dict(adam_beta1=1.0),
                dict(loss="hinge"), dict(epochs=-1)):
        with pytest.raises(DataError):
            TrainConfig(**bad)


def test_zero_epochs_noop():
    m = Mlp.create([2, 3, 1], ["tanh", "sigmoid"], seed=0)
    res = train(m, Dataset(np.zeros((4, 2)), np.zeros(4)), TrainConfig(epochs=0))
    assert res.history == []
    assert np.array_equal(res.model.params, m.params)


def test_xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([0, 1, 1, 0], dtype=float)
    m = Mlp.create([2, 2, 1], ["tanh", "sigmoid"], seed=3)
    res = train(m, Dataset(X, y), TrainConfig(epochs=5000, batch_size=4, learning_rate=0.05,
                                              loss="bce"))
    assert res.history[-1] < 0.1
    assert (forward(res.model, X)[:, 0] > 0.5).astype(int).tolist() == [0, 1, 1, 0]


def test_training_is_deterministic_and_leaves_input_untouched():
    rng = np.random.default_rng(0)
    data = Dataset(rng.normal(size=(50, 3)), rng.integers(0, 2, 50))
    m = Mlp.create([3, 8, 1], ["relu", "sigmoid"], seed=5)
    before = m.params.copy()
    cfg = TrainConfig(epochs=20, batch_size=7, loss="bce", shuffle_seed=9)
    a, b = train(m, data, cfg), train(m, data, cfg)
    assert np.array_equal(a.model.params, b.model.params) and a.history == b.history
    assert np.array_equal(m.params, before)
    assert len(a.history) == 20


def test_separable_mse_loss_settles():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] + X[:, 1] > 0).astype(float)
    m = Mlp.create([2, 1], ["sigmoid"], seed=2)
    res = train(m, Dataset(X, y), TrainConfig(epochs=60, batch_size=200, learning_rate=0.01,
                                              loss="mse"))
    h = res.history[5:]
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


def test_divergence_raises():
    X = np.array([[1e200, 1e200]])
    m = Mlp.create([2, 1], ["identity"], seed=0)
    with pytest.raises((NumericalError, FloatingPointError)):
        with np.errstate(all="ignore"):
            train(m, Dataset(X, [1e300]), TrainConfig(epochs=3, loss="mse"))


def test_dataset_checks_and_csv_roundtrip():
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 2)), np.zeros(4))
    d = Dataset(np.random.default_rng(0).random((5, 3)), np.arange(5) / 7)
    back = Dataset.from_csv(d.to_csv())
    assert np.array_equal(back.inputs, d.inputs) and np.array_equal(back.targets, d.targets)
    with pytest.raises(DataError):
        Dataset.from_csv("x0,y\n")
    m = Mlp.create([2, 1], ["sigmoid"])
    with pytest.raises(DataError):
        train(m, d, TrainConfig(epochs=1))


# -- serialization ---------------------------------------------------------------

def test_save_load_roundtrip():
    m = random_model(np.random.default_rng(7))
    text = save_model(m)
    back = load_model(text)
    assert save_model(back) == text
    assert np.array_equal(back.params, m.params)
    assert back.activations == m.activations
    data = json.loads(text)
    assert set(data["layers"][0]) == {"activation", "weights", "bias"}
    assert len(data["layers"][0]["weights"]) == m.input_dim


def test_load_errors():
    text = save_model(Mlp.create([3, 4, 1], ["relu", "sigmoid"]))
    with pytest.raises(DataError):
        load_model(text[: len(text) // 2])
    data = json.loads(text)
    data["layers"][1]["weights"] = [[0.0]] * 5
    with pytest.raises(DataError, match="expects 5 inputs"):
        load_model(json.dumps(data))
