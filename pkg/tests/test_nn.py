import numpy as np
import pytest

from _oracles import assert_gradients_close, finite_difference

from gslosh.exceptions import ConfigurationError, StateError, TrainingError
from gslosh.nn import (
    Adam,
    DenseLayer,
    DenseNet,
    LrSchedule,
    kaiming_init,
    mlp,
)


def test_forward_identity_linear():
    net = DenseNet([DenseLayer(np.eye(2), np.zeros(2), "linear")])
    np.testing.assert_allclose(net.forward([1.0, 2.0]), [1.0, 2.0])


def test_forward_identity_relu_clips_negative():
    net = DenseNet([DenseLayer(np.eye(2), np.zeros(2), "relu")])
    np.testing.assert_allclose(net.forward([-1.0, 2.0]), [0.0, 2.0])


def test_forward_two_layer_hand_computed():
    # oracle: direct matrix arithmetic done by hand
    #   z1 = x @ W1 + b1 = [3.5, 0.5], relu keeps both
    #   z2 = relu(z1) @ W2 + b2 = [6.5, 1.5, 2.5]
    w1 = np.array([[1.0, 2.0], [-1.0, 0.5]])
    b1 = np.array([0.5, -0.5])
    w2 = np.array([[2.0, 0.0, 1.0], [-1.0, 1.0, 0.0]])
    b2 = np.array([0.0, 1.0, -1.0])
    net = DenseNet([DenseLayer(w1, b1, "relu"), DenseLayer(w2, b2, "linear")])
    np.testing.assert_allclose(net.forward([1.0, -2.0]), [6.5, 1.5, 2.5])


def test_forward_rejects_dimension_mismatch():
    net = DenseNet([DenseLayer(np.eye(2), np.zeros(2))])
    with pytest.raises(ConfigurationError):
        net.forward([1.0, 2.0, 3.0])


def test_chain_mismatch_rejected():
    with pytest.raises(ConfigurationError):
        DenseNet(
            [
                DenseLayer(np.zeros((2, 3)), np.zeros(3)),
                DenseLayer(np.zeros((4, 2)), np.zeros(2)),
            ]
        )


def test_backward_zero_upstream_gives_zero_grads():
    rng = np.random.default_rng(0)
    net = mlp((3, 4, 2), rng)
    net.forward(rng.normal(size=(5, 3)), remember=True)
    grads, dx = net.backward(np.zeros((5, 2)))
    assert all(np.all(g == 0.0) for g in grads)
    assert np.all(dx == 0.0)


def test_backward_single_linear_layer_outer_product():
    # loss = sum(y) with y = x @ W + b gives dW[i, j] = x[i], db = 1
    x = np.array([2.0, -3.0, 0.5])
    net = DenseNet([DenseLayer(np.zeros((3, 2)), np.zeros(2), "linear")])
    net.forward(x, remember=True)
    grads, _ = net.backward(np.ones(2))
    np.testing.assert_allclose(grads[0], np.column_stack([x, x]))
    np.testing.assert_allclose(grads[1], [1.0, 1.0])


def test_backward_before_forward_is_state_error():
    net = DenseNet([DenseLayer(np.eye(2), np.zeros(2))])
    with pytest.raises(StateError):
        net.backward(np.ones(2))


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = DenseNet(
        [
            DenseLayer.initialized(4, 6, rng, "tanh"),
            DenseLayer.initialized(6, 5, rng, "relu"),
            DenseLayer.initialized(5, 3, rng, "sigmoid"),
        ]
    )
    x = rng.normal(size=(7, 4))
    target = rng.normal(size=(7, 3))

    def loss():
        y = net.forward(x)
        return 0.5 * np.sum((y - target) ** 2)

    y = net.forward(x, remember=True)
    analytic, _ = net.backward(y - target)
    numeric = finite_difference(loss, net.parameters())
    assert_gradients_close(analytic, numeric)


def test_backward_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    net = mlp((3, 8, 8, 2), rng)
    x = rng.normal(size=(1, 3))
    target = rng.normal(size=(1, 2))

    def loss():
        y = net.forward(x)
        return 0.5 * np.sum((y - target) ** 2)

    y = net.forward(x, remember=True)
    _, dx = net.backward(y - target)
    numeric = finite_difference(loss, [x])
    assert_gradients_close([dx], numeric)


def test_kaiming_sample_variance():
    w = kaiming_init((2, 50_000), seed=123)
    assert w.size == 100_000
    assert abs(w.var() - 1.0) < 0.05


def test_kaiming_deterministic_per_seed():
    a = kaiming_init((5, 7), seed=42)
    b = kaiming_init((5, 7), seed=42)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, kaiming_init((5, 7), seed=43))


def test_initialized_layer_biases_zero():
    layer = DenseLayer.initialized(10, 4, np.random.default_rng(0), "relu")
    np.testing.assert_array_equal(layer.biases, np.zeros(4))


def test_activation_ranges():
    rng = np.random.default_rng(11)
    z = rng.normal(scale=4.0, size=(100, 6))
    sig = DenseNet([DenseLayer(np.eye(6), np.zeros(6), "sigmoid")]).forward(z)
    tan = DenseNet([DenseLayer(np.eye(6), np.zeros(6), "tanh")]).forward(z)
    assert np.all((sig > 0.0) & (sig < 1.0))
    assert np.all((tan > -1.0) & (tan < 1.0))


def test_adam_zero_grad_is_fixed_point():
    params = [np.array([1.0, -2.0]), np.array([[0.5]])]
    before = [p.copy() for p in params]
    opt = Adam(params, lr=0.1, weight_decay=0.0)
    opt.step(params, [np.zeros_like(p) for p in params])
    for p, b in zip(params, before):
        np.testing.assert_array_equal(p, b)


def test_adam_first_step_is_signed_lr():
    params = [np.array([1.0, 1.0])]
    grads = [np.array([0.5, -0.25])]
    opt = Adam(params, lr=1e-2)
    opt.step(params, grads)
    np.testing.assert_allclose(params[0], [1.0 - 1e-2, 1.0 + 1e-2], rtol=1e-6)
    assert opt.step_count == 1


def test_adam_descends_on_quadratic():
    x = [np.array([1.0])]
    opt = Adam(x, lr=0.05)
    values = []
    for _ in range(10):
        values.append(float(x[0][0] ** 2))
        opt.step(x, [2.0 * x[0]])
    values.append(float(x[0][0] ** 2))
    assert all(b < a for a, b in zip(values, values[1:]))


def test_adam_rejects_non_finite_gradient():
    params = [np.zeros(2)]
    opt = Adam(params, lr=0.1)
    with pytest.raises(TrainingError, match="epoch 3"):
        opt.step(params, [np.array([np.nan, 0.0])], context="epoch 3")


def test_adam_decoupled_weight_decay_shrinks_params():
    params = [np.array([4.0])]
    opt = Adam(params, lr=0.1, weight_decay=0.5)
    opt.step(params, [np.zeros(1)])
    # zero gradient: the only update is -lr * wd * p
    np.testing.assert_allclose(params[0], [4.0 - 0.1 * 0.5 * 4.0])


def test_schedule_before_first_milestone_keeps_lr():
    opt = Adam([np.zeros(1)], lr=1e-3)
    LrSchedule([(1000, 0.1), (3000, 0.1)]).apply(opt, epoch=999)
    assert opt.lr == 1e-3


def test_schedule_two_milestones_compound():
    opt = Adam([np.zeros(1)], lr=1e-3)
    sched = LrSchedule([(1000, 0.1), (3000, 0.1)])
    for epoch in range(4000):
        sched.apply(opt, epoch)
    assert opt.lr == pytest.approx(1e-5)


def test_schedule_identity_multiplier():
    opt = Adam([np.zeros(1)], lr=1e-3)
    LrSchedule([(10, 1.0)]).apply(opt, epoch=10)
    assert opt.lr == 1e-3


def test_schedule_rejects_unsorted_milestones():
    with pytest.raises(ConfigurationError):
        LrSchedule([(3000, 0.1), (1000, 0.1)])


def test_mlp_activation_layout():
    net = mlp((5, 8, 8, 3), np.random.default_rng(0))
    assert [layer.activation for layer in net.layers] == [
        "linear",
        "relu",
        "linear",
    ]
