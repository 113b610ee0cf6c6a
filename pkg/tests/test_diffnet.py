import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from softpg.diffnet import AdamState, Mlp, adam_step, clip_grad_norm, grad_check, orthogonal
from softpg.errors import InputShapeError, PoisonedUpdateError


def test_single_linear_layer_by_hand():
    net = Mlp([1, 1])
    net.weights[0][...] = 2.0
    net.biases[0][...] = 1.0
    assert net.forward(np.array([3.0])).tolist() == [7.0]


def test_two_layer_tanh_matches_straight_line_forward():
    net = Mlp([2, 4, 3], "tanh", np.random.default_rng(0))
    net.params[...] += 0.1 * np.random.default_rng(1).standard_normal(net.num_params)
    x = np.array([0.5, -0.5])
    # independent reimplementation: unpack the flat vector by hand
    p = net.params
    W1, b1 = p[:8].reshape(2, 4), p[8:12]
    W2, b2 = p[12:24].reshape(4, 3), p[24:27]
    expected = np.tanh(x @ W1 + b1) @ W2 + b2
    np.testing.assert_allclose(net(x), expected, rtol=0, atol=1e-15)


def test_batch_and_single_inputs_agree():
    net = Mlp([3, 5, 2], "relu", np.random.default_rng(2))
    xs = np.random.default_rng(3).standard_normal((4, 3))
    batch = net(xs)
    for i in range(4):
        np.testing.assert_allclose(net(xs[i]), batch[i], rtol=0, atol=1e-14)


def test_wrong_input_width_raises():
    net = Mlp([3, 2])
    with pytest.raises(InputShapeError):
        net(np.zeros(4))


def test_linear_layer_gradient_closed_form():
    net = Mlp([3, 1], rng=np.random.default_rng(0))
    x = np.array([[1.0, -2.0, 0.5]])
    grad = net.backward(x, np.ones((1, 1)))
    np.testing.assert_array_equal(grad[:3], x[0])
    assert grad[3] == 1.0


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_backward_matches_finite_differences(activation):
    rng = np.random.default_rng(5)
    net = Mlp([4, 7, 5, 2], activation, rng)
    x = rng.standard_normal((6, 4))
    up = rng.standard_normal((6, 2))

    def f():
        return float(np.sum(net(x) * up)), net.backward(x, up)

    assert grad_check(net, f) < 1e-5


def test_vjp_input_gradient():
    rng = np.random.default_rng(6)
    net = Mlp([3, 6, 2], "tanh", rng)
    x = rng.standard_normal((2, 3))
    up = rng.standard_normal((2, 2))
    _, dx = net.vjp(x, up)
    h = 1e-6
    for i in range(2):
        for j in range(3):
            xp, xm = x.copy(), x.copy()
            xp[i, j] += h
            xm[i, j] -= h
            fd = (np.sum(net(xp) * up) - np.sum(net(xm) * up)) / (2 * h)
            assert abs(fd - dx[i, j]) < 1e-7


def test_flatten_unflatten_roundtrip():
    net = Mlp([3, 4, 2], rng=np.random.default_rng(0))
    flat = net.flatten()
    other = Mlp([3, 4, 2])
    other.unflatten(flat)
    np.testing.assert_array_equal(other.params, flat)
    flat[0] = 99.0  # flatten returns a copy
    assert net.params[0] != 99.0
    with pytest.raises(InputShapeError):
        other.unflatten(np.zeros(3))


def test_copy_is_independent():
    net = Mlp([2, 3, 1], rng=np.random.default_rng(0))
    twin = net.copy()
    twin.params += 1.0
    assert not np.allclose(twin.params, net.params)


def test_orthogonal_columns():
    w = orthogonal(np.random.default_rng(0), (8, 5), 2.0)
    np.testing.assert_allclose(w.T @ w, 4.0 * np.eye(5), atol=1e-12)


def test_adam_first_step_by_hand():
    class Box:
        params = np.zeros(3)

    g = np.array([0.5, -2.0, 1e-3])
    state = AdamState(3, lr=0.1)
    adam_step(Box, g, state)
    # bias-corrected first moments are g and g^2
    np.testing.assert_allclose(Box.params, -0.1 * g / (np.abs(g) + 1e-8), rtol=1e-14)


def test_adam_matches_scalar_reference_over_many_steps():
    class Box:
        params = np.array([1.0])

    state = AdamState(1, lr=0.01)
    m = v = 0.0
    x = 1.0
    for t in range(1, 51):
        g = 2 * x
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        x -= 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        adam_step(Box, np.array([2 * Box.params[0]]), state)
    assert abs(Box.params[0] - x) < 1e-14


def test_adam_rejects_nonfinite_without_mutation():
    class Box:
        params = np.ones(2)

    state = AdamState(2)
    with pytest.raises(PoisonedUpdateError):
        adam_step(Box, np.array([1.0, np.nan]), state)
    assert state.step == 0
    np.testing.assert_array_equal(Box.params, 1.0)


def test_clip_grad_norm():
    g = np.array([3.0, 4.0])
    np.testing.assert_allclose(clip_grad_norm(g, 1.0), [0.6, 0.8])
    assert clip_grad_norm(g, 10.0) is g
    assert clip_grad_norm(g, None) is g


@settings(max_examples=25, deadline=None)
@given(sizes=st.lists(st.integers(1, 5), min_size=2, max_size=4), seed=st.integers(0, 2**16))
def test_param_count_and_gradient_shape(sizes, seed):
    rng = np.random.default_rng(seed)
    net = Mlp(sizes, "tanh", rng)
    expected = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    assert net.num_params == expected
    x = rng.standard_normal((3, sizes[0]))
    assert net.backward(x, np.ones((3, sizes[-1]))).shape == (expected,)
