import numpy as np
import pytest

from conftest import finite_difference, rel_error
from pmc.errors import ArgumentError, InputShapeError, LabelError, StateError
from pmc.nncore import (DenseNet, OptimConfig, OptimState, adaptation_factor, backward, binary_xent, forward,
                        grl_backward, grl_forward, inv_lr, l1_loss, sgd_step, softmax_xent, softmax_xent_batch)


def smooth_net(rng, sizes):
    # positive biases keep ReLU units away from their kink for finite differences
    net = DenseNet.initialize(sizes, rng)
    for b in net.biases:
        b += 0.5
    return net


def test_forward_vector_and_batch_agree(rng):
    net = DenseNet.initialize((5, 7, 3), rng)
    x = rng.normal(size=(4, 5))
    _, batch = forward(net, x)
    for i in range(4):
        _, single = forward(net, x[i])
        assert single.shape == (3,)
        np.testing.assert_allclose(single, batch[i], rtol=0, atol=1e-14)


def test_forward_matches_reference(rng):
    net = DenseNet.initialize((3, 4, 2), rng)
    x = rng.normal(size=3)
    hidden = np.maximum(net.weights[0] @ x + net.biases[0], 0.0)
    expected = net.weights[1] @ hidden + net.biases[1]
    _, out = forward(net, x)
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_forward_rejects_wrong_width(rng):
    net = DenseNet.initialize((3, 2), rng)
    with pytest.raises(InputShapeError):
        forward(net, np.zeros(4))


def test_backward_rejects_stale_cache(rng):
    net = DenseNet.initialize((3, 4, 2), rng)
    acts, _ = forward(net, rng.normal(size=(2, 3)))
    with pytest.raises(StateError):
        backward(net, acts, np.zeros((3, 2)))


def test_non_finite_parameters_rejected():
    W = np.array([[np.nan]])
    with pytest.raises(StateError):
        DenseNet((1, 1), [W], [np.zeros(1)])


@pytest.mark.parametrize("trial", range(100))
def test_softmax_xent_network_gradient(trial):
    rng = np.random.default_rng(trial)
    net = smooth_net(rng, (4, 6, 3))
    x = rng.normal(size=(5, 4))
    y = rng.integers(0, 3, size=5)
    w = rng.uniform(0.1, 1.0, size=5)

    def loss():
        _, logits = forward(net, x)
        return softmax_xent_batch(logits, y, w)[0].sum()

    acts, logits = forward(net, x)
    _, g = softmax_xent_batch(logits, y, w)
    analytic = backward(net, acts, g).as_list()
    numeric = finite_difference(loss, net.params)
    assert rel_error(analytic, numeric) < 1e-4


@pytest.mark.parametrize("trial", range(100))
def test_binary_xent_and_l1_gradients(trial):
    rng = np.random.default_rng(100 + trial)
    net = smooth_net(rng, (3, 5, 1))
    x = rng.normal(size=(6, 3))
    d = rng.integers(0, 2, size=6)

    def bce():
        _, z = forward(net, x)
        return binary_xent(z[:, 0], d)[0].sum()

    acts, z = forward(net, x)
    _, g = binary_xent(z[:, 0], d)
    assert rel_error(backward(net, acts, g[:, None]).as_list(), finite_difference(bce, net.params)) < 1e-4

    target = rng.normal(size=(6, 1)) + 5.0

    def l1():
        _, out = forward(net, x)
        return l1_loss(out, target)[0]

    _, g = l1_loss(z, target)
    assert rel_error(backward(net, acts, g).as_list(), finite_difference(l1, net.params)) < 1e-4


def test_input_gradient(rng):
    net = smooth_net(rng, (3, 4, 2))
    x = rng.normal(size=(2, 3))
    y = np.array([0, 1])

    def loss():
        _, logits = forward(net, x)
        return softmax_xent_batch(logits, y, np.ones(2))[0].sum()

    acts, logits = forward(net, x)
    _, g = softmax_xent_batch(logits, y, np.ones(2))
    assert rel_error([backward(net, acts, g).input], finite_difference(loss, [x])) < 1e-4


def test_uniform_logits_give_log_n_classes():
    loss, grad = softmax_xent(np.zeros(4), 2)
    assert loss == pytest.approx(np.log(4))
    np.testing.assert_allclose(grad, [0.25, 0.25, -0.75, 0.25])


def test_softmax_xent_errors():
    with pytest.raises(LabelError):
        softmax_xent_batch(np.zeros((1, 3)), np.array([3]), np.ones(1))
    with pytest.raises(ArgumentError):
        softmax_xent_batch(np.zeros((1, 3)), np.array([0]), np.array([-1.0]))


def test_binary_xent_at_zero_is_log_two():
    loss, grad = binary_xent(0.0, 1)
    assert loss == pytest.approx(np.log(2))
    assert grad == pytest.approx(-0.5)
    with pytest.raises(LabelError):
        binary_xent(0.0, 2)


def test_gradient_reversal():
    x = np.array([1.0, -2.0])
    assert grl_forward(x) is x
    np.testing.assert_array_equal(grl_backward(x, 0.5), [-0.5, 1.0])
    with pytest.raises(ArgumentError):
        grl_backward(x, -1.0)


def test_inv_schedule_and_ramp():
    assert inv_lr(0.0, 0.01) == pytest.approx(0.01)
    assert inv_lr(1.0, 0.01) == pytest.approx(0.01 * 11 ** -0.75)
    assert adaptation_factor(0.0) == 0.0
    assert adaptation_factor(1.0) == pytest.approx(2 / (1 + np.exp(-10)) - 1)
    with pytest.raises(ArgumentError):
        inv_lr(1.5, 0.01)


def test_sgd_step_matches_hand_update():
    p = np.array([1.0, -1.0])
    g = np.array([0.5, 0.25])
    optim = OptimState.for_params([p], OptimConfig(base_lr=0.1, momentum=0.9, weight_decay=0.01, inv_schedule=False))
    sgd_step([p], [g], optim)
    v = np.array([0.5 + 0.01, 0.25 - 0.01])
    np.testing.assert_allclose(p, np.array([1.0, -1.0]) - 0.1 * v)
    np.testing.assert_allclose(optim.velocities[0], v)


def test_progress_cannot_go_backwards():
    optim = OptimState.for_params([np.zeros(1)], OptimConfig())
    optim.set_progress(0.5)
    with pytest.raises(StateError):
        optim.set_progress(0.25)


def test_frozen_network_rejects_updates(rng):
    net = DenseNet.initialize((2, 2), rng).freeze()
    optim = OptimState.for_params(net.params, OptimConfig())
    with pytest.raises(ValueError):
        sgd_step(net.params, [np.ones_like(p) for p in net.params], optim)
