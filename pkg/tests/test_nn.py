import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from vehicle_audio import nn
from vehicle_audio.errors import InvalidArgument, TrainingError
from vehicle_audio.features import FeatureMatrix

SMALL = nn.ModelHyper(conv_channels=(2, 3, 3, 4), kernel=3, dense=(5, 4, 4), dropout_p=0.3)


# ---------------------------------------------------------------- forward ops vs direct sums

def conv_oracle(x, w, b):
    c_out, c_in, k = w.shape
    out = np.zeros((c_out, x.shape[1] - k + 1))
    for o in range(c_out):
        for i in range(out.shape[1]):
            out[o, i] = b[o] + sum(w[o, c, j] * x[c, i + j] for c in range(c_in) for j in range(k))
    return out


def test_conv1d_forward_examples():
    rng = np.random.default_rng(0)
    x, w, b = rng.standard_normal((2, 8)), rng.standard_normal((3, 2, 3)), rng.standard_normal(3)
    assert np.max(np.abs(nn.conv1d_forward(x, w, b) - conv_oracle(x, w, b))) < 1e-12
    v = rng.standard_normal((1, 10))
    assert np.array_equal(nn.conv1d_forward(v, np.ones((1, 1, 1)), np.zeros(1)), v)
    assert np.array_equal(nn.conv1d_forward(np.zeros((2, 8)), w, b), np.repeat(b[:, None], 6, axis=1))
    batch = rng.standard_normal((4, 2, 8))
    assert np.allclose(nn.conv1d_forward(batch, w, b)[2], conv_oracle(batch[2], w, b), atol=1e-12)
    with pytest.raises(InvalidArgument):
        nn.conv1d_forward(x, rng.standard_normal((3, 5, 3)), b)
    with pytest.raises(InvalidArgument):
        nn.conv1d_forward(x, rng.standard_normal((3, 2, 9)), b)


def test_maxpool_examples():
    out, arg = nn.maxpool1d_forward(np.array([[1.0, 3.0, 2.0, 5.0]]))
    assert out.tolist() == [[3.0, 5.0]]
    length = 87
    for want in (43, 21, 10, 5):
        out, _ = nn.maxpool1d_forward(np.zeros((1, length)))
        length = out.shape[1]
        assert length == want
    # gradient goes to the first maximum in a tied window
    out, arg = nn.maxpool1d_forward(np.array([[2.0, 2.0, 0.0]]))
    g = nn.maxpool1d_backward(np.array([[1.0]]), arg, 3)
    assert g.tolist() == [[1.0, 0.0, 0.0]]


def test_dense_examples():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(4)
    assert np.array_equal(nn.dense_forward(x, np.eye(4), np.zeros(4)), x)
    w, b = rng.standard_normal((3, 4)), rng.standard_normal(3)
    want = [b[i] + sum(w[i, j] * x[j] for j in range(4)) for i in range(3)]
    assert np.max(np.abs(nn.dense_forward(x, w, b) - want)) < 1e-12
    with pytest.raises(InvalidArgument):
        nn.dense_forward(x, rng.standard_normal((3, 5)), b)


# ---------------------------------------------------------------- finite-difference gradient checks

def check_op(forward, backward, inputs, rng):
    """Loss = sum(forward(*inputs) * R); compare analytic and numeric gradients for every input."""
    R = rng.standard_normal(np.shape(forward(*inputs)))
    analytic = backward(R, *inputs)
    for arr, grad in zip(inputs, analytic):
        numeric = oracles.numeric_grad(lambda: float(np.sum(forward(*inputs) * R)), arr)
        assert oracles.rel_error(grad, numeric) < 1e-6


def test_conv1d_gradients():
    rng = np.random.default_rng(2)
    x, w, b = rng.standard_normal((1, 6)), rng.standard_normal((2, 1, 3)), rng.standard_normal(2)
    check_op(nn.conv1d_forward, lambda g, x, w, b: nn.conv1d_backward(g, x, w), [x, w, b], rng)
    xb, wb, bb = rng.standard_normal((3, 2, 7)), rng.standard_normal((3, 2, 3)), rng.standard_normal(3)
    check_op(nn.conv1d_forward, lambda g, x, w, b: nn.conv1d_backward(g, x, w), [xb, wb, bb], rng)


def test_conv1d_backward_trivia():
    rng = np.random.default_rng(3)
    x, w = rng.standard_normal((2, 8)), rng.standard_normal((3, 2, 3))
    gx, gw, gb = nn.conv1d_backward(np.zeros((3, 6)), x, w)
    assert not gx.any() and not gw.any() and not gb.any()
    g = rng.standard_normal((3, 6))
    assert np.allclose(nn.conv1d_backward(g, x, w)[2], g.sum(axis=1))


def test_maxpool_gradient():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((1, 8))

    def fwd(x):
        return nn.maxpool1d_forward(x)[0]

    def bwd(g, x):
        return (nn.maxpool1d_backward(g, nn.maxpool1d_forward(x)[1], x.shape[-1]),)

    check_op(fwd, bwd, [x], rng)
    x3 = rng.standard_normal((2, 3, 9))
    check_op(lambda x: nn.maxpool1d_forward(x, 3, 2)[0],
             lambda g, x: (nn.maxpool1d_backward(g, nn.maxpool1d_forward(x, 3, 2)[1], 9, 3, 2),), [x3], rng)


def test_dense_gradients():
    rng = np.random.default_rng(5)
    x, w, b = rng.standard_normal((2, 4)), rng.standard_normal((3, 4)), rng.standard_normal(3)
    check_op(nn.dense_forward, lambda g, x, w, b: nn.dense_backward(g, x, w), [x, w, b], rng)


def test_relu_dropout_softmax_gradients():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((3, 5))
    x[np.abs(x) < 0.05] = 0.5  # keep away from the kink
    check_op(nn.relu, lambda g, x: (nn.relu_backward(g, x),), [x], rng)

    layer = nn.Dropout(0.4)

    def drop(x):
        return layer.forward(x, training=True, rng=np.random.default_rng(9))

    def drop_backward(g, x):
        drop(x)
        return (layer.backward(g),)

    check_op(drop, drop_backward, [x], rng)

    sm = nn.Softmax()

    def fwd(x):
        return sm.forward(x)

    def bwd(g, x):
        sm.forward(x)
        return (sm.backward(g),)

    check_op(fwd, bwd, [x], rng)


def test_flatten_round_trip():
    f = nn.Flatten()
    x = np.arange(24.0).reshape(2, 3, 4)
    assert f.forward(x).shape == (2, 12)
    assert np.array_equal(f.backward(f.forward(x)), x)


def test_full_model_gradient():
    model = nn.build_model(3, 50, SMALL, seed=1)
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 3, 50))
    y = nn.one_hot([1, 3])

    def loss():
        return nn.cross_entropy(model.forward(x, training=True, rng=np.random.default_rng(3)), y)

    model.loss_and_grads(x, y, training=True, rng=np.random.default_rng(3))
    analytic = [g.copy() for g in model.gradients()]
    for (_, _, p), g in zip(model.parameters(), analytic):
        assert oracles.rel_error(g, oracles.numeric_grad(loss, p)) < 1e-4


# ---------------------------------------------------------------- softmax, loss, Adam, scheduler

@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8), st.floats(-100, 100))
def test_softmax_shift_invariance(logits, c):
    a = nn.softmax(np.array(logits))
    b = nn.softmax(np.array(logits) + c)
    assert np.max(np.abs(a - b)) < 1e-9 and abs(a.sum() - 1) < 1e-12


def test_cross_entropy_clamp():
    assert nn.cross_entropy(np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]])) == pytest.approx(-np.log(1e-12))
    assert nn.cross_entropy(np.array([[0.25, 0.75]]), np.array([[0.0, 1.0]])) == pytest.approx(-np.log(0.75))


def test_adam_closed_form():
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    g = np.array([0.5, -2.0, 1e-3])
    p = np.array([1.0, 1.0, 1.0])
    state = nn.AdamState.zeros_like([p])
    nn.adam_step([p], [g], state, lr)
    # t=1: m = (1-b1) g, v = (1-b2) g^2, so m_hat = g and v_hat = g^2
    p1 = 1.0 - lr * g / (np.abs(g) + eps)
    assert np.max(np.abs(p - p1)) < 1e-12
    nn.adam_step([p], [g], state, lr)
    m2 = b1 * (1 - b1) * g + (1 - b1) * g
    v2 = b2 * (1 - b2) * g ** 2 + (1 - b2) * g ** 2
    p2 = p1 - lr * (m2 / (1 - b1 ** 2)) / (np.sqrt(v2 / (1 - b2 ** 2)) + eps)
    assert np.max(np.abs(p - p2)) < 1e-12
    assert np.max(np.abs(state.m[0] - m2)) < 1e-15 and state.t == 2

    q = np.array([3.0, -1.0])
    st_ = nn.AdamState.zeros_like([q])
    nn.adam_step([q], [np.zeros(2)], st_, 0.1)
    assert q.tolist() == [3.0, -1.0]


def test_reduce_lr_on_plateau_examples():
    assert nn.reduce_lr_on_plateau([1.0, 0.9, 0.8], 1e-3) == 1e-3
    assert nn.reduce_lr_on_plateau([1.0, 1.0], 1e-3) == 1e-3
    assert nn.reduce_lr_on_plateau([1.0, 1.0, 1.0], 1e-3) == pytest.approx(1e-4)
    assert nn.reduce_lr_on_plateau([1.0, 1.0, 1.0], 1e-5) == 1e-5
    assert nn.reduce_lr_on_plateau([1.0, 1.0, 1.0, 1.0], 1e-3) == 1e-3
    # an improvement smaller than 1e-4 does not count
    assert nn.reduce_lr_on_plateau([1.0, 0.99995, 0.9999], 1e-3) == pytest.approx(1e-4)
    with pytest.raises(InvalidArgument):
        nn.reduce_lr_on_plateau([], 1e-3)


@given(st.lists(st.floats(0, 5), min_size=1, max_size=40))
def test_scheduler_monotone_and_floored(losses):
    s = nn.PlateauScheduler(1e-3, 2, 0.1, 1e-5)
    lrs = [s.step(x) for x in losses]
    assert all(b <= a for a, b in zip(lrs, lrs[1:])) and min(lrs) >= 1e-5


# ---------------------------------------------------------------- model construction

def test_build_model_shapes():
    model = nn.build_model(128, 87, seed=0)
    lengths = []
    shape = model.input_shape
    for layer in model.layers:
        shape = layer.output_shape(shape)
        if layer.kind in ("conv1d", "maxpool1d"):
            lengths.append(shape[1])
    assert lengths == [85, 42, 40, 20, 18, 9, 7, 3]
    assert [layer for layer in model.layers if layer.kind == "dense"][0].n_in == 384
    assert model.n_parameters() < 10 ** 6
    assert nn.build_model(64, 87).input_shape == (64, 87)
    a, b = nn.build_model(seed=3), nn.build_model(seed=3)
    assert all(np.array_equal(p, q) for p, q in zip(a.copy_parameters(), b.copy_parameters()))
    assert all(not p.any() for i, k, p in a.parameters() if k == "b")
    with pytest.raises(InvalidArgument):
        nn.build_model(128, 30)
    with pytest.raises(InvalidArgument):
        nn.build_model(128, 87, nn.ModelHyper(conv_channels=(8, 8, 8)))


def test_validate_architecture_rejects_bad_stacks():
    good = nn.build_model(3, 50, SMALL)
    bad = nn.Model(good.layers[:-1], good.input_shape)
    with pytest.raises(InvalidArgument):
        nn.validate_architecture(bad)
    with pytest.raises(InvalidArgument):
        nn.Model([nn.Dense(5, 4)], (3, 50))


def test_predict_properties():
    model = nn.build_model(3, 50, SMALL, seed=2)
    x = np.random.default_rng(8).standard_normal((5, 3, 50))
    p = nn.predict(model, x)
    assert p.shape == (5, 4) and np.allclose(p.sum(axis=1), 1.0, atol=1e-6)
    assert np.array_equal(p, nn.predict(model, x))
    final = [layer for layer in model.layers if layer.kind == "dense"][-1]
    final.params["w"][:] = 0.0
    assert np.allclose(nn.predict(model, x), 0.25)
    fm = FeatureMatrix(x[0].T, "mfcc")
    assert nn.predict(model, fm).shape == (4,)
    with pytest.raises(InvalidArgument):
        nn.predict(model, np.zeros((2, 4, 50)))


# ---------------------------------------------------------------- training

def separable_data(n_per_class=40, channels=6, frames=50, seed=0):
    rng = np.random.default_rng(seed)
    X, y = [], []
    for c in range(4):
        base = np.zeros((channels, frames))
        base[c] = 2.0
        X.append(base + 0.5 * rng.standard_normal((n_per_class, channels, frames)))
        y += [c] * n_per_class
    return np.concatenate(X), np.array(y)


def test_train_reaches_high_accuracy_and_is_deterministic():
    X, y = separable_data()
    hyper = nn.ModelHyper(conv_channels=(16, 16, 16, 16), dense=(128, 64, 4))
    cfg = nn.TrainConfig(epochs=12, batch_size=16, seed=1)
    m1 = nn.build_model(6, 50, hyper, seed=1)
    r1 = nn.train(m1, X, y, cfg)
    m2 = nn.build_model(6, 50, hyper, seed=1)
    r2 = nn.train(m2, X, y, cfg)
    assert r1.train_loss == r2.train_loss and r1.val_loss == r2.val_loss
    assert all(np.array_equal(a, b) for a, b in zip(r1.final_parameters, r2.final_parameters))
    assert all(b <= a for a, b in zip(r1.learning_rate, r1.learning_rate[1:]))
    assert min(r1.learning_rate) >= cfg.min_lr
    # per-epoch accuracy is measured with dropout active; judge the trained model in inference mode
    assert (nn.predict(m1, X).argmax(axis=1) == y).mean() >= 0.99


def test_train_zero_epochs_and_errors():
    X, y = separable_data(5)
    model = nn.build_model(6, 50, SMALL, seed=0)
    before = model.copy_parameters()
    rep = nn.train(model, X, y, nn.TrainConfig(epochs=0))
    assert rep.train_loss == [] and all(np.array_equal(a, b) for a, b in zip(before, model.copy_parameters()))
    with pytest.raises(InvalidArgument):
        nn.train(model, X[:0], y[:0])
    with pytest.raises(InvalidArgument):
        nn.TrainConfig(min_lr=1e-2, base_lr=1e-3)


def test_train_nan_diagnostic():
    X, y = separable_data(5)
    X[3, 0, 0] = np.nan
    model = nn.build_model(6, 50, SMALL, seed=0)
    with pytest.raises(TrainingError) as err:
        nn.train(model, X, y, nn.TrainConfig(epochs=1, batch_size=64, validation_fraction=0))
    assert err.value.batch_index == 0 and "conv1d" in str(err.value.layer)


def test_stratified_holdout():
    labels = np.array([0] * 20 + [1] * 5 + [2] * 15)
    mask = nn.stratified_holdout(labels, 0.1, np.random.default_rng(0))
    assert [int(mask[labels == c].sum()) for c in range(3)] == [2, 1, 2]


# ---------------------------------------------------------------- checkpoints

def test_checkpoint_round_trip_bit_stable(tmp_path):
    model = nn.build_model(3, 50, SMALL, seed=4)
    nn.save_checkpoint(tmp_path / "a.json", model, nn.TrainConfig(), note="x")
    loaded, meta = nn.load_checkpoint(tmp_path / "a.json")
    nn.save_checkpoint(tmp_path / "b.json", loaded, nn.TrainConfig(), note="x")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert meta["note"] == "x" and loaded.describe() == model.describe()
    x = np.random.default_rng(1).standard_normal((2, 3, 50))
    assert np.array_equal(nn.predict(model, x), nn.predict(loaded, x))
    d = json.loads((tmp_path / "a.json").read_text())
    d["format"] = "other"
    with pytest.raises(InvalidArgument):
        nn.model_from_dict(d)
