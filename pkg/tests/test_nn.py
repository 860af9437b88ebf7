import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscfie import (
    AdamState,
    SinMlp,
    adam_step,
    backward,
    complexify,
    feature,
    forward,
    init_he,
    load_checkpoint,
    lr_schedule,
    save_checkpoint,
)
from oscfie.nn import CHECKPOINT_VERSION, Gradients


def fd_check(net, x, cot, step=1e-6):
    """Worst relative error between backward() and central differences of sum(<cot, out>)."""
    out, tape = forward(net, x)
    grads = backward(net, tape, cot)
    worst = 0.0
    for j in range(net.n_layers):
        if not net.trainable[j]:
            assert grads.dW[j] is None and grads.db[j] is None
            continue
        for param, g in ((net.weights[j], grads.dW[j]), (net.biases[j], grads.db[j])):
            for idx in np.ndindex(param.shape):
                old = param[idx]
                param[idx] = old + step
                up = np.sum(cot * forward(net, x)[0])
                param[idx] = old - step
                dn = np.sum(cot * forward(net, x)[0])
                param[idx] = old
                fd = (up - dn) / (2 * step)
                worst = max(worst, abs(fd - g[idx]) / max(1.0, abs(fd), abs(g[idx])))
    return worst


def random_small_net(rng):
    depth = int(rng.integers(1, 5))
    dims = [int(rng.integers(1, 4))] + [int(rng.integers(1, 9)) for _ in range(depth - 1)] + [2]
    net = init_he(dims, rng)
    for b in net.biases:
        b[:] = rng.normal(size=b.shape)
    return net


def test_init_he_deterministic_and_zero_bias():
    a, b = init_he([1, 4, 2], 7), init_he([1, 4, 2], 7)
    for Wa, Wb in zip(a.weights, b.weights):
        assert np.array_equal(Wa, Wb)
    assert all(np.all(bb == 0) for bb in a.biases)


def test_init_he_variance():
    W = init_he([256, 256, 2], 0).weights[0]
    assert W.var() == pytest.approx(2 / 256, rel=0.2)


def test_init_he_validation():
    with pytest.raises(ValueError):
        init_he([1, 4, 3], 0)
    with pytest.raises(ValueError):
        init_he([1, 0, 2], 0)
    with pytest.raises(ValueError):
        init_he([2], 0)


def test_forward_zero_net():
    net = init_he([1, 3, 2], 0)
    for W in net.weights:
        W[:] = 0
    out, _ = forward(net, np.linspace(-1, 1, 5))
    assert np.all(out == 0)


def test_forward_hand_computation():
    net = SinMlp([np.array([[1.0]]), np.array([[1.0], [0.0]])], [np.zeros(1), np.zeros(2)])
    s = np.array([0.3, -1.1])
    out, _ = forward(net, s)
    np.testing.assert_allclose(out, np.column_stack((np.sin(s), np.zeros(2))))
    assert feature(net, np.pi / 2)[0, 0] == pytest.approx(1.0)


def test_forward_batch_equals_loop():
    net = init_he([1, 16, 8, 2], 3)
    x = np.linspace(-1, 1, 37)
    batch = forward(net, x)[0]
    loop = np.vstack([forward(net, np.array([xi]))[0] for xi in x])
    np.testing.assert_allclose(batch, loop, atol=1e-15, rtol=0)


def test_forward_is_affine_in_feature():
    net = init_he([1, 8, 5, 2], 4)
    x = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(forward(net, x)[0], feature(net, x) @ net.weights[-1].T + net.biases[-1], atol=1e-15)


def test_hidden_activations_bounded():
    net = init_he([1, 32, 32, 2], 1)
    _, tape = forward(net, np.linspace(-5, 5, 100))
    assert all(np.max(np.abs(a)) <= 1 for a in tape.activations[1:])


def test_input_width_mismatch():
    with pytest.raises(ValueError):
        forward(init_he([3, 4, 2], 0), np.zeros((5, 2)))


def test_complexify():
    assert complexify([0.0, 0.0]) == 0
    z = complexify([3.0, -4.0])
    assert z == 3 - 4j and abs(z) == 5
    v = np.random.default_rng(0).normal(size=(10, 2))
    np.testing.assert_allclose(np.abs(complexify(v)) ** 2, v[:, 0] ** 2 + v[:, 1] ** 2)


def test_backward_zero_cotangent():
    net = init_he([1, 5, 5, 2], 0)
    out, tape = forward(net, np.linspace(-1, 1, 7))
    g = backward(net, tape, np.zeros_like(out))
    assert all(np.all(d == 0) for d in g.dW) and all(np.all(d == 0) for d in g.db)


def test_backward_shape_mismatch():
    net = init_he([1, 5, 2], 0)
    _, tape = forward(net, np.zeros(4))
    with pytest.raises(ValueError):
        backward(net, tape, np.zeros((3, 2)))


def test_head_only_gradient_is_outer_product():
    net = init_he([1, 6, 6, 2], 2)
    net.freeze([0, 1])
    x = np.linspace(-1, 1, 9)
    out, tape = forward(net, x)
    cot = np.random.default_rng(1).normal(size=out.shape)
    g = backward(net, tape, cot)
    assert g.dW[0] is None and g.dW[1] is None
    np.testing.assert_allclose(g.dW[2], cot.T @ feature(net, x), atol=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = random_small_net(rng)
    x = rng.uniform(-1, 1, size=(5, net.dims[0]))
    cot = rng.normal(size=(5, 2))
    assert fd_check(net, x, cot) <= 1e-5


def test_gradients_with_frozen_middle_layer():
    rng = np.random.default_rng(11)
    net = init_he([1, 4, 4, 4, 2], rng)
    net.trainable[1] = False
    x = rng.uniform(-1, 1, 6)
    assert fd_check(net, x, rng.normal(size=(6, 2))) <= 1e-5


def test_adam_zero_gradient_is_noop():
    net = init_he([1, 4, 2], 0)
    before = net.copy()
    st_ = AdamState.for_net(net)
    zero = Gradients([np.zeros_like(W) for W in net.weights], [np.zeros_like(b) for b in net.biases])
    adam_step(net, st_, zero, 1e-2)
    for a, b in zip(before.weights, net.weights):
        assert np.array_equal(a, b)


def test_adam_first_step_magnitude_is_lr():
    net = init_he([1, 4, 2], 0)
    before = net.copy()
    st_ = AdamState.for_net(net)
    g = Gradients([np.full_like(W, 0.37) for W in net.weights], [np.full_like(b, -2.0) for b in net.biases])
    adam_step(net, st_, g, 1e-3)
    np.testing.assert_allclose(before.weights[0] - net.weights[0], 1e-3, rtol=1e-6)
    np.testing.assert_allclose(before.biases[1] - net.biases[1], -1e-3, rtol=1e-6)


def test_adam_respects_freeze():
    net = init_he([1, 4, 4, 2], 0)
    net.freeze([0])
    W0 = net.weights[0].copy()
    st_ = AdamState.for_net(net)
    x = np.linspace(-1, 1, 5)
    for _ in range(5):
        out, tape = forward(net, x)
        adam_step(net, st_, backward(net, tape, np.ones_like(out)), 1e-2)
    assert np.array_equal(W0, net.weights[0])
    with pytest.raises(ValueError):
        adam_step(net, st_, backward(net, tape, np.ones_like(out)), 0.0)


def test_lr_schedule_examples():
    assert lr_schedule(0, 3500, 1e-2, 1e-7) == pytest.approx(1e-2)
    assert lr_schedule(3499, 3500, 1e-2, 1e-7) == pytest.approx(1e-7)
    mid = lr_schedule(1, 3, 1e-2, 1e-7)
    assert mid == pytest.approx(math.sqrt(1e-9))
    assert lr_schedule(1749, 3499, 1e-2, 1e-7) == pytest.approx(3.162e-5, rel=1e-3)
    assert lr_schedule(0, 1, 1e-2, 1e-7) == 1e-2
    with pytest.raises(ValueError):
        lr_schedule(10, 10, 1e-2, 1e-7)
    with pytest.raises(ValueError):
        lr_schedule(0, 10, 0, 1e-7)


def test_checkpoint_roundtrip(tmp_path):
    net = init_he([1, 5, 3, 2], 9)
    net.freeze([0])
    path = tmp_path / "net.npz"
    save_checkpoint(net, path)
    back = load_checkpoint(path)
    assert back.dims == net.dims and back.trainable == net.trainable
    for a, b in zip(net.weights + net.biases, back.weights + back.biases):
        assert np.array_equal(a, b)
    with np.load(path) as d:
        assert int(d["format_version"]) == CHECKPOINT_VERSION


def test_checkpoint_rejects_unknown_version(tmp_path):
    path = tmp_path / "bad.npz"
    np.savez(path, format_version=np.array(99), dims=np.array([1, 2]), trainable=np.array([True]),
             W0=np.zeros((2, 1)), b0=np.zeros(2))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)


def test_sinmlp_shape_validation():
    with pytest.raises(ValueError):
        SinMlp([np.zeros((3, 1)), np.zeros((2, 4))], [np.zeros(3), np.zeros(2)])
    with pytest.raises(ValueError):
        SinMlp([np.zeros((3, 1))], [np.zeros(2)])
