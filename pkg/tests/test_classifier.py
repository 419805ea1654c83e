import math

import numpy as np
import pytest

from wafertda.classifier import (
    MLPModel,
    TrainConfig,
    adam_step,
    confusion_matrix,
    evaluate,
    forward,
    init_adam,
    init_model,
    load_model,
    loss_and_grad,
    predict,
    save_model,
    train,
)
from wafertda.errors import FormatError, InvalidInput, InvalidParameter, LabelError, ShapeError


def small_model(seed=0, d=6, h=7, k=5):
    m = init_model(seed, d, h, k)
    rng = np.random.default_rng(seed + 100)
    # nonzero biases so every parameter is exercised
    m.b1[:] = rng.normal(0, 0.1, h)
    m.b2[:] = rng.normal(0, 0.1, k)
    return m


def numeric_grad(model, X, y, name, h=1e-6):
    p = getattr(model, name)
    g = np.zeros_like(p)
    for idx in np.ndindex(p.shape):
        old = p[idx]
        p[idx] = old + h
        lp, _ = loss_and_grad(model, X, y)
        p[idx] = old - h
        lm, _ = loss_and_grad(model, X, y)
        p[idx] = old
        g[idx] = (lp - lm) / (2 * h)
    return g


def max_rel_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-7))


def test_init_is_deterministic_with_zero_biases():
    a, b = init_model(3), init_model(3)
    assert a.W1.tobytes() == b.W1.tobytes() and a.W2.tobytes() == b.W2.tobytes()
    assert not a.b1.any() and not a.b2.any()
    assert a.W1.shape == (800, 1024) and a.W2.shape == (1024, 5)


def test_init_scale():
    for seed in range(3):
        m = init_model(seed)
        assert abs(m.W1.std() / (1 / math.sqrt(800)) - 1) < 0.2
        assert abs(m.W2.std() / (1 / math.sqrt(1024)) - 1) < 0.2


def test_forward_zero_weights_is_uniform():
    m = MLPModel(np.zeros((800, 16)), np.zeros(16), np.zeros((16, 5)), np.zeros(5))
    np.testing.assert_array_equal(forward(m, np.zeros((3, 800))), np.full((3, 5), 0.2))


def test_forward_rows_are_distributions():
    m = init_model(1)
    X = np.random.default_rng(0).random((10, 800)) * 5
    p = forward(m, X)
    assert np.all(np.abs(p.sum(axis=1) - 1) <= 1e-9)
    assert np.all((p > 0) & (p < 1))


def test_softmax_shift_invariance():
    m = init_model(2)
    X = np.random.default_rng(1).random((4, 800))
    shifted = m.copy()
    shifted.b2 += 37.5
    np.testing.assert_allclose(forward(shifted, X), forward(m, X), atol=1e-12)
    assert np.array_equal(predict(shifted, X), predict(m, X))


def test_forward_shape_error():
    with pytest.raises(ShapeError):
        forward(init_model(0), np.zeros((2, 799)))


def test_uniform_prediction_loss_is_log5():
    m = MLPModel(np.zeros((4, 3)), np.zeros(3), np.zeros((3, 5)), np.zeros(5))
    loss, _ = loss_and_grad(m, np.ones((6, 4)), [0, 1, 2, 3, 4, 0])
    assert loss == pytest.approx(math.log(5), abs=1e-15)


def test_confident_prediction_loss_goes_to_zero():
    m = MLPModel(np.eye(2), np.zeros(2), np.zeros((2, 5)), np.zeros(5))
    m.b2[3] = 50.0
    loss, _ = loss_and_grad(m, np.ones((2, 2)), [3, 3])
    assert 0 <= loss < 1e-20


def test_bad_labels():
    m = init_model(0, 4, 3)
    with pytest.raises(LabelError):
        loss_and_grad(m, np.ones((2, 4)), [0, 5])
    with pytest.raises(LabelError):
        loss_and_grad(m, np.ones((2, 4)), [0.5, 1])
    with pytest.raises(LabelError):
        loss_and_grad(m, np.ones((2, 4)), [0])


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    for trial in range(20):
        m = small_model(trial)
        X = rng.normal(0, 1, (3, 6))
        y = rng.integers(0, 5, 3)
        _, grads = loss_and_grad(m, X, y)
        for name in ("W1", "b1", "W2", "b2"):
            assert max_rel_error(grads[name], numeric_grad(m, X, y, name)) <= 1e-4, name


def test_adam_zero_gradient_is_a_no_op():
    m = small_model()
    state = init_adam(m.params())
    zero = {k: np.zeros_like(v) for k, v in m.params().items()}
    new, st = adam_step(m, zero, state, TrainConfig())
    for k in ("W1", "b1", "W2", "b2"):
        np.testing.assert_array_equal(getattr(new, k), getattr(m, k))
    assert st.t == 1 and state.t == 0


def test_adam_first_step_moves_by_learning_rate():
    m = small_model()
    rng = np.random.default_rng(1)
    grads = {k: rng.normal(0, 3, v.shape) for k, v in m.params().items()}
    cfg = TrainConfig(learning_rate=1e-3)
    new, _ = adam_step(m, grads, init_adam(m.params()), cfg)
    for k in ("W1", "b1", "W2", "b2"):
        delta = getattr(new, k) - getattr(m, k)
        # bias-corrected m/sqrt(v) is g/|g| on the first step, up to eps
        g = grads[k]
        np.testing.assert_allclose(delta, -1e-3 * g / (np.abs(g) + cfg.eps), rtol=1e-9)
        assert np.array_equal(np.sign(delta), -np.sign(g))


def test_adam_matches_reference_formula():
    rng = np.random.default_rng(2)
    m = small_model()
    cfg = TrainConfig(learning_rate=0.01, beta1=0.8, beta2=0.99, eps=1e-6)
    state = init_adam(m.params())
    ref = {k: v.copy() for k, v in m.params().items()}
    mom = {k: np.zeros_like(v) for k, v in ref.items()}
    vel = {k: np.zeros_like(v) for k, v in ref.items()}
    for t in range(1, 6):
        grads = {k: rng.normal(0, 1, v.shape) for k, v in ref.items()}
        m, state = adam_step(m, grads, state, cfg)
        for k in ref:
            mom[k] = 0.8 * mom[k] + 0.2 * grads[k]
            vel[k] = 0.99 * vel[k] + 0.01 * grads[k] ** 2
            ref[k] -= 0.01 * (mom[k] / (1 - 0.8 ** t)) / (np.sqrt(vel[k] / (1 - 0.99 ** t)) + 1e-6)
    for k in ref:
        np.testing.assert_allclose(getattr(m, k), ref[k], rtol=1e-12, atol=1e-15)


def test_train_config_validation():
    with pytest.raises(InvalidParameter):
        TrainConfig(learning_rate=0)
    with pytest.raises(InvalidParameter):
        TrainConfig(beta2=1.0)
    with pytest.raises(InvalidParameter):
        TrainConfig(epochs=0)
    with pytest.raises(InvalidParameter):
        TrainConfig.from_dict({"lr": 1})


def separable_data(n=50, d=20, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 5
    X = rng.uniform(0, 0.1, (n, d))
    X[np.arange(n), y] += 1.0
    return X, y


def test_train_separable_reaches_full_accuracy():
    X, y = separable_data()
    model, curves = train(X, y, config=TrainConfig(epochs=50, hidden=64, seed=1))
    assert evaluate(model, X, y).accuracy == 1.0
    assert np.all(np.isfinite(curves["train_loss"]))
    assert len(curves["train_acc"]) == 50


def test_train_is_deterministic():
    X, y = separable_data(seed=3)
    cfg = TrainConfig(epochs=5, hidden=32, seed=7, batch_size=8)
    a, ca = train(X, y, X, y, cfg)
    b, cb = train(X, y, X, y, cfg)
    for k in ("W1", "b1", "W2", "b2"):
        assert getattr(a, k).tobytes() == getattr(b, k).tobytes()
    assert ca["train_loss"] == cb["train_loss"] and ca["val_acc"] == cb["val_acc"]


def test_skipping_inactive_inputs_changes_nothing():
    # reference: plain mini-batch Adam over every parameter
    X, y = separable_data(n=40, d=12, seed=4)
    X[:, [3, 7, 11]] = 0.0
    cfg = TrainConfig(epochs=3, hidden=16, seed=2, batch_size=8)
    model, _ = train(X, y, config=cfg)
    ref = init_model(cfg.seed, 12, 16, 5)
    state = init_adam(ref.params())
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    for _ in range(cfg.epochs):
        order = rng.permutation(len(y))
        for lo in range(0, len(y), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            _, g = loss_and_grad(ref, X[idx], y[idx])
            ref, state = adam_step(ref, g, state, cfg)
    np.testing.assert_array_equal(model.W1[[3, 7, 11]], ref.W1[[3, 7, 11]])
    for k in ("W1", "b1", "W2", "b2"):
        np.testing.assert_allclose(getattr(model, k), getattr(ref, k), rtol=0, atol=1e-12)


def test_train_rejects_empty_set():
    with pytest.raises(InvalidInput):
        train(np.zeros((0, 800)), np.zeros(0, dtype=int))


def test_standardize_flag():
    X, y = separable_data()
    model, _ = train(X * 100 + 5, y, config=TrainConfig(epochs=50, hidden=64, seed=1, standardize=True))
    assert model.shift is not None
    assert evaluate(model, X * 100 + 5, y).accuracy == 1.0


def test_confusion_and_accuracy():
    cm = confusion_matrix([0, 1, 2, 2, 4], [0, 1, 2, 1, 4])
    assert cm.sum(axis=1).tolist() == [1, 1, 2, 0, 1]
    assert cm[2, 1] == 1
    X, y = separable_data()
    model, _ = train(X, y, config=TrainConfig(epochs=50, hidden=64, seed=1))
    r = evaluate(model, X, y)
    np.testing.assert_array_equal(r.confusion, np.diag(np.bincount(y)))
    assert r.accuracy == np.trace(r.confusion) / r.confusion.sum()


def test_checkpoint_roundtrip(tmp_path):
    X, y = separable_data()
    cfg = TrainConfig(epochs=2, hidden=8, standardize=True)
    model, _ = train(X, y, config=cfg)
    path = tmp_path / "m.ckpt"
    save_model(model, path, cfg)
    loaded, header = load_model(path)
    assert header["config"] == cfg.to_dict()
    for k in ("W1", "b1", "W2", "b2", "shift", "scale"):
        assert getattr(loaded, k).tobytes() == getattr(model, k).tobytes()
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"nonsense")
    with pytest.raises(FormatError):
        load_model(bad)
