import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multistep import nn
from multistep.errors import ConfigError, NumericError, ShapeError


def matrix_chain_oracle(net, x):
    """Independent eval-mode forward: plain matrix products, no caching."""
    a = np.asarray(x, dtype=float)
    for layer in net.layers:
        z = layer.weights @ a + layer.bias
        if layer.activation == "relu":
            a = np.maximum(z, 0.0)
        elif layer.activation == "linear":
            a = z
        elif layer.activation == "sigmoid":
            a = 1.0 / (1.0 + np.exp(-z))
        else:
            a = np.tanh(z)
    return a


def finite_difference_grads(net, x, y, h=1e-5):
    """Central-difference gradient of the MSE loss w.r.t. every parameter."""
    params = nn.net_params(net)
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            up, _ = nn.mse_loss(nn.forward(net, x)[0], y)
            p[idx] = orig - h
            down, _ = nn.mse_loss(nn.forward(net, x)[0], y)
            p[idx] = orig
            g[idx] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


class TestForward:
    def test_zero_net_gives_zero_output(self):
        net = nn.init_mlp([3, 4, 2], rng=0)
        for layer in net.layers:
            layer.weights[:] = 0.0
        out, _ = nn.forward(net, np.array([1.0, -2.0, 3.0]))
        assert np.array_equal(out, np.zeros(2))

    def test_identity_single_layer(self):
        net = nn.Mlp([nn.Layer(np.eye(2), np.zeros(2), "linear")])
        out, _ = nn.forward(net, np.array([1.5, -2.0]))
        assert np.array_equal(out, [1.5, -2.0])

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_matrix_chain_oracle(self, seed):
        rng = np.random.default_rng(seed)
        net = nn.init_mlp([4, 7, 3], rng=rng)
        x = rng.standard_normal(4)
        out, _ = nn.forward(net, x)
        assert np.array_equal(out, matrix_chain_oracle(net, x))

    def test_eval_is_pure(self):
        net = nn.init_mlp([3, 5, 2], rng=1)
        x = np.array([0.3, -0.1, 0.7])
        before = [l.weights.copy() for l in net.layers]
        a, _ = nn.forward(net, x)
        b, _ = nn.forward(net, x)
        assert np.array_equal(a, b)
        for w0, layer in zip(before, net.layers):
            assert np.array_equal(w0, layer.weights)

    def test_shape_and_numeric_errors(self):
        net = nn.init_mlp([3, 2], rng=0)
        with pytest.raises(ShapeError):
            nn.forward(net, np.zeros(4))
        with pytest.raises(NumericError):
            nn.forward(net, np.array([1.0, np.nan, 0.0]))

    def test_train_mode_needs_rng_when_dropping(self):
        net = nn.init_mlp([3, 5, 2], dropout_rate=0.5, rng=0)
        with pytest.raises(ConfigError):
            nn.forward(net, np.zeros(3), mode="train")

    def test_dropout_expectation_matches_eval_for_linear_net(self):
        # Inverted dropout: E over masks of train output == eval output.
        rng = np.random.default_rng(7)
        net = nn.init_mlp([3, 6, 2], dropout_rate=0.4, rng=rng,
                          hidden_activation="linear")
        x = rng.standard_normal(3)
        eval_out, _ = nn.forward(net, x)
        samples = np.array(
            [nn.forward(net, x, mode="train", rng=rng)[0] for _ in range(10_000)]
        )
        mean = samples.mean(axis=0)
        sem = samples.std(axis=0, ddof=1) / np.sqrt(len(samples))
        assert np.all(np.abs(mean - eval_out) < 3.0 * sem + 1e-12)


class TestBackward:
    def test_zero_loss_grad_gives_zero_grads(self):
        net = nn.init_mlp([3, 4, 2], rng=0)
        out, cache = nn.forward(net, np.array([0.1, 0.2, 0.3]))
        grads, dx = nn.backward(net, cache, np.zeros(2))
        assert all(np.all(g == 0) for pair in grads for g in pair)
        assert np.all(dx == 0)

    def test_one_layer_linear_hand_arithmetic(self):
        # d loss / d w = 2*(pred - y)*x / out_dim for a 1-output linear layer.
        net = nn.Mlp([nn.Layer(np.array([[0.5, -1.0]]), np.array([0.25]), "linear")])
        x = np.array([2.0, 3.0])
        y = np.array([1.0])
        pred, cache = nn.forward(net, x)
        loss, lg = nn.mse_loss(pred, y)
        grads, _ = nn.backward(net, cache, lg)
        dw, db = grads[0]
        expected = 2.0 * (pred[0] - y[0]) * x
        assert np.allclose(dw[0], expected)
        assert np.allclose(db[0], 2.0 * (pred[0] - y[0]))

    @pytest.mark.parametrize("hidden_act", ["relu", "sigmoid", "tanh", "linear"])
    def test_matches_finite_differences(self, hidden_act):
        rng = np.random.default_rng(42)
        net = nn.init_mlp([3, 5, 2], rng=rng, hidden_activation=hidden_act)
        x = rng.standard_normal(3)
        y = rng.standard_normal(2)
        pred, cache = nn.forward(net, x)
        _, lg = nn.mse_loss(pred, y)
        analytic = [g for pair in nn.backward(net, cache, lg)[0] for g in pair]
        numeric = finite_difference_grads(net, x, y)
        for a, n in zip(analytic, numeric):
            scale = np.maximum(np.abs(n), 1e-8)
            assert np.max(np.abs(a - n) / scale) < 1e-4

    def test_stale_cache_rejected(self):
        small = nn.init_mlp([3, 4, 2], rng=0)
        other = nn.init_mlp([3, 6, 2], rng=0)
        _, cache = nn.forward(small, np.zeros(3))
        with pytest.raises(ShapeError):
            nn.backward(other, cache, np.zeros(2))


class TestMseLoss:
    def test_identity_case(self):
        loss, grad = nn.mse_loss(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        assert loss == 0.0
        assert np.all(grad == 0.0)

    def test_hand_arithmetic(self):
        loss, grad = nn.mse_loss(np.array([1.0, 3.0]), np.array([0.0, 1.0]))
        assert loss == 2.5
        assert np.array_equal(grad, [1.0, 2.0])

    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8),
        st.lists(st.floats(-1e6, 1e6), min_size=8, max_size=8),
    )
    def test_swap_symmetry(self, a, b):
        a = np.array(a)
        b = np.array(b[: len(a)])
        la, ga = nn.mse_loss(a, b)
        lb, gb = nn.mse_loss(b, a)
        assert la == lb
        assert np.array_equal(ga, -gb)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            nn.mse_loss(np.zeros(2), np.zeros(3))


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        params = [np.array([1.0, -2.0])]
        state = nn.init_adam(params)
        new_params, new_state = nn.adam_step(params, [np.zeros(2)], state)
        assert np.array_equal(new_params[0], params[0])
        assert new_state.step_count == 1

    def test_first_step_hand_computation(self):
        # Bias correction makes the first step ~ lr * sign(grad).
        params = [np.array([1.0])]
        state = nn.init_adam(params, learning_rate=1e-3)
        new_params, _ = nn.adam_step(params, [np.array([0.5])], state)
        expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8)
        assert np.allclose(new_params[0], expected)
        assert new_params[0][0] == pytest.approx(0.999, abs=1e-6)

    def test_constant_gradient_monotone_decrease(self):
        params = [np.array([1.0])]
        state = nn.init_adam(params, learning_rate=1e-2)
        grad = [np.array([0.3])]
        values = [params[0][0]]
        for _ in range(2):
            params, state = nn.adam_step(params, grad, state)
            values.append(params[0][0])
        assert values[0] > values[1] > values[2]

    def test_shape_mismatch(self):
        state = nn.init_adam([np.zeros(2)])
        with pytest.raises(ShapeError):
            nn.adam_step([np.zeros(2)], [np.zeros(3)], state)


class _Pairs:
    def __init__(self, x, y):
        self.histories = x
        self.futures = y


class TestFit:
    def test_zero_epochs_returns_net_unchanged(self):
        net = nn.init_mlp([2, 3, 1], rng=0)
        data = _Pairs(np.zeros((4, 2)), np.zeros((4, 1)))
        trained, history = nn.fit(net, data, nn.TrainConfig(epochs=0, seed=0))
        assert history == []
        for a, b in zip(net.layers, trained.layers):
            assert np.array_equal(a.weights, b.weights)

    def test_learns_linear_map(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, size=(128, 1))
        data = _Pairs(x, 2.0 * x)
        net = nn.init_mlp([1, 1], rng=1)
        cfg = nn.TrainConfig(epochs=200, batch_size=16, seed=2, learning_rate=0.05)
        trained, history = nn.fit(net, data, cfg)
        assert len(history) == 200
        assert history[-1] < 1e-3

    def test_determinism(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, size=(60, 3))
        data = _Pairs(x, x[:, :1] + x[:, 1:2])
        net = nn.init_mlp([3, 8, 1], dropout_rate=0.1, rng=4)
        cfg = nn.TrainConfig(epochs=5, batch_size=8, seed=5, dropout_rate=0.1)
        a, _ = nn.fit(net, data, cfg)
        b, _ = nn.fit(net, data, cfg)
        for la, lb in zip(a.layers, b.layers):
            assert np.array_equal(la.weights, lb.weights)
            assert np.array_equal(la.bias, lb.bias)

    def test_empty_dataset_rejected(self):
        net = nn.init_mlp([2, 1], rng=0)
        with pytest.raises(ConfigError):
            nn.fit(net, _Pairs(np.zeros((0, 2)), np.zeros((0, 1))), nn.TrainConfig())


@settings(max_examples=20, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2**32 - 1))
def test_gradcheck_random_nets(seed):
    rng = np.random.default_rng(seed)
    dims = [3, int(rng.integers(2, 6)), 2]
    act = str(rng.choice(["relu", "sigmoid", "tanh"]))
    net = nn.init_mlp(dims, rng=rng, hidden_activation=act)
    x = rng.standard_normal(dims[0])
    y = rng.standard_normal(dims[-1])
    pred, cache = nn.forward(net, x)
    _, lg = nn.mse_loss(pred, y)
    analytic = [g for pair in nn.backward(net, cache, lg)[0] for g in pair]
    numeric = finite_difference_grads(net, x, y)
    for a, n in zip(analytic, numeric):
        scale = np.maximum(np.abs(n), 1e-6)
        assert np.max(np.abs(a - n) / scale) < 1e-4
