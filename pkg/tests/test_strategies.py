import numpy as np
import pytest

from multistep import nn, strategies as stg
from multistep.data import WindowedDataset, make_windows
from multistep.errors import ConfigError, ShapeError


def linear_net(weights, bias=None):
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    b = np.zeros(w.shape[0]) if bias is None else np.asarray(bias, dtype=float)
    return nn.Mlp([nn.Layer(w, b, "linear")])


def select_last_net(p):
    """f(history) = history[-1]."""
    w = np.zeros((1, p))
    w[0, -1] = 1.0
    return linear_net(w)


class TestRecursive:
    def test_identity_on_last_is_fixed_point(self):
        model = stg.RecursiveModel(select_last_net(4), p=4)
        traj = stg.predict_recursively(model, np.array([1.0, 2, 3, 7]), 5)
        assert np.array_equal(traj.values, [7, 7, 7, 7, 7])

    def test_scalar_halving_unrolls(self):
        model = stg.RecursiveModel(linear_net([[0.5]]), p=1)
        traj = stg.predict_recursively(model, np.array([1.0]), 3)
        assert np.allclose(traj.values, [0.5, 0.25, 0.125])
        assert np.array_equal(traj.step_indices, [1, 2, 3])

    @pytest.mark.parametrize("seed", range(5))
    def test_composition_oracle_bit_exact(self, seed):
        rng = np.random.default_rng(seed)
        p, n_steps = 4, 9
        net = nn.init_mlp([p, 6, 1], rng=rng)
        history = rng.uniform(0, 1, p)
        model = stg.RecursiveModel(net, p=p)
        traj = stg.predict_recursively(model, history, n_steps)
        # independent hand-managed window
        window = list(history)
        expected = []
        for _ in range(n_steps):
            out, _ = nn.forward(net, np.array(window))
            expected.append(out[0])
            window = window[1:] + [out[0]]
        assert np.array_equal(traj.values, expected)

    def test_augmented_model_rejected(self):
        net = nn.init_mlp([3, 1], rng=0)
        model = stg.RecursiveModel(net, p=2, time_step_augmented=True, max_step=4)
        with pytest.raises(ConfigError):
            stg.predict_recursively(model, np.zeros(2), 2)


class TestRecursiveAug:
    def test_zero_step_weight_reduces_to_plain(self):
        rng = np.random.default_rng(3)
        p = 3
        plain = nn.init_mlp([p, 5, 1], rng=rng)
        # same weights plus a zeroed column for the step input
        aug_layers = [
            nn.Layer(
                np.concatenate([plain.layers[0].weights, np.zeros((5, 1))], axis=1),
                plain.layers[0].bias.copy(),
                plain.layers[0].activation,
            ),
            nn.Layer(
                plain.layers[1].weights.copy(),
                plain.layers[1].bias.copy(),
                plain.layers[1].activation,
            ),
        ]
        aug = stg.RecursiveModel(
            nn.Mlp(aug_layers), p=p, time_step_augmented=True, max_step=6
        )
        base = stg.RecursiveModel(plain, p=p)
        h = rng.uniform(0, 1, p)
        ta = stg.predict_recursively_aug(aug, h, 6)
        tb = stg.predict_recursively(base, h, 6)
        assert np.array_equal(ta.values, tb.values)

    def test_manual_unrolling_with_step_term(self):
        # f([x, v]) = 0.5 x + 0.1 v with raw step values 0, 1 (scale=1 keeps
        # the encoding v = n - 1 unscaled for n_steps steps when max_step=1).
        net = linear_net([[0.5, 0.1]])
        model = stg.RecursiveModel(net, p=1, time_step_augmented=True, max_step=1)
        traj = stg.predict_recursively_aug(model, np.array([1.0]), 2)
        assert np.allclose(traj.values, [0.5, 0.35])

    def test_plain_model_rejected(self):
        model = stg.RecursiveModel(linear_net([[0.5]]), p=1)
        with pytest.raises(ConfigError):
            stg.predict_recursively_aug(model, np.array([1.0]), 2)


def tiny_windows(n=40, p=3, q=4, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.uniform(0, 1, n)
    return make_windows(values, p, q)


class TestDirect:
    def test_horizon_one_matches_single_model(self):
        data = tiny_windows(q=1)
        cfg = nn.TrainConfig(epochs=3, batch_size=8, seed=1)
        for hybrid in (False, True):
            ms = stg.train_direct(data, cfg, hybrid=hybrid, hidden_layers=1, hidden_units=4)
            assert ms.horizon == 1
            assert ms.models[0].input_dim == data.p

    def test_hybrid_input_dims_grow(self):
        data = tiny_windows(p=4, q=3)
        cfg = nn.TrainConfig(epochs=2, batch_size=8, seed=1)
        ms = stg.train_direct(data, cfg, hybrid=True, hidden_layers=1, hidden_units=4)
        assert [m.input_dim for m in ms.models] == [4, 5, 6]

    def test_non_hybrid_models_independent(self):
        data = tiny_windows(q=3)
        cfg = nn.TrainConfig(epochs=3, batch_size=8, seed=2)
        full = stg.train_direct(data, cfg, hidden_layers=1, hidden_units=4)
        # retraining only step 2's data leaves other steps' models unchanged:
        # train a fresh set where the step-2 targets are perturbed
        futures = data.futures.copy()
        futures[:, 1] += 0.5
        other = stg.train_direct(
            WindowedDataset(data.histories, futures, data.p, data.q),
            cfg,
            hidden_layers=1,
            hidden_units=4,
        )
        for h in (0, 2):
            for la, lb in zip(full.models[h].layers, other.models[h].layers):
                assert np.array_equal(la.weights, lb.weights)
        assert not all(
            np.array_equal(la.weights, lb.weights)
            for la, lb in zip(full.models[1].layers, other.models[1].layers)
        )

    def test_zero_models_predict_zero(self):
        nets = [linear_net(np.zeros((1, 3))) for _ in range(4)]
        ms = stg.DirectModelSet(nets, horizon=4, p=3)
        assert np.array_equal(stg.predict_direct(ms, np.ones(3)), np.zeros(4))

    def test_hybrid_manual_two_stage(self):
        # model1: f1(x) = 2x ; model2: f2(x, p1) = x + 3 p1 -> [2x, 7x]
        m1 = linear_net([[2.0]])
        m2 = linear_net([[1.0, 3.0]])
        ms = stg.DirectModelSet([m1, m2], horizon=2, p=1, hybrid=True)
        assert np.allclose(stg.predict_direct(ms, np.array([1.0])), [2.0, 7.0])
        assert np.allclose(stg.predict_direct(ms, np.array([2.0])), [4.0, 14.0])


class TestMultiOutput:
    def test_zero_net_predicts_zero(self):
        net = nn.Mlp([nn.Layer(np.zeros((4, 3)), np.zeros(4), "linear")])
        model = stg.MultiOutputModel(net, p=3, q=4)
        assert np.array_equal(stg.predict_multi_output(model, np.ones(3)), np.zeros(4))

    def test_q8_output_length(self):
        data = tiny_windows(n=60, p=5, q=8)
        cfg = nn.TrainConfig(epochs=2, batch_size=16, seed=0)
        model = stg.train_multi_output(data, cfg, hidden_layers=1, hidden_units=6)
        out = stg.predict_multi_output(model, data.histories[0])
        assert out.shape == (8,)

    def test_q_below_two_rejected(self):
        data = tiny_windows(q=1)
        with pytest.raises(ConfigError):
            stg.train_multi_output(data, nn.TrainConfig(epochs=1))

    def test_training_determinism(self):
        data = tiny_windows(n=50, p=3, q=2, seed=5)
        cfg = nn.TrainConfig(epochs=4, batch_size=8, seed=9)
        a = stg.train_multi_output(data, cfg, hidden_layers=1, hidden_units=5)
        b = stg.train_multi_output(data, cfg, hidden_layers=1, hidden_units=5)
        h = data.histories[:7]
        assert np.array_equal(
            stg.predict_multi_output(a, h), stg.predict_multi_output(b, h)
        )


class TestShapeLaw:
    def test_every_strategy_emits_h_values(self):
        p = q = 4
        data = tiny_windows(n=60, p=p, q=q)
        cfg = nn.TrainConfig(epochs=2, batch_size=16, seed=0)
        one_step = tiny_windows(n=60, p=p, q=1)
        models = [
            (stg.train_recursive(one_step, cfg, hidden_layers=1, hidden_units=4), q),
            (stg.train_direct(data, cfg, hidden_layers=1, hidden_units=4), None),
            (stg.train_multi_output(data, cfg, hidden_layers=1, hidden_units=4), None),
        ]
        h = data.histories[:5]
        for model, n_steps in models:
            preds = stg.batch_predictor(model, n_steps)(h)
            assert preds.shape == (5, q)
