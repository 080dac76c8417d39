"""Tests for the GTCNN model, its gradients, losses, metrics and training."""

import numpy as np
import pytest

from conftest import random_symmetric_graph
from gtcnn.errors import ContractError, DegenerateError, NumericalError, ParameterError, TrainingDivergedError
from gtcnn.filters import dense_joint_filter
from gtcnn.graphs import cyclic_graph, line_graph, permute_graph
from gtcnn.models import JointFilterCoeffs, Permutation, ProductSpec
from gtcnn.nn import (
    Adam,
    Dataset,
    GTCNNConfig,
    GTCNNModel,
    Metric,
    TrainConfig,
    accuracy,
    backward,
    cross_entropy,
    embed,
    evaluate,
    forward,
    gcnn_baseline_forward,
    gcnn_inputs,
    init_model,
    l1_penalty,
    loss_gradients,
    mae,
    mape,
    mse,
    predict,
    rmse,
    split_dataset,
    train,
    zero_model,
)


def _dense_features(model: GTCNNModel, spatial, temporal, x: np.ndarray) -> np.ndarray:
    """Straight-line forward pass with dense Kronecker matrices."""
    h = x
    for layer, taps in enumerate(model.layer_taps(i) for i in range(model.config.n_layers)):
        f_in, f_out = taps.shape[2], taps.shape[3]
        pre = np.zeros((h.shape[0], f_out))
        for f in range(f_out):
            for g in range(f_in):
                op = dense_joint_filter(spatial, temporal, JointFilterCoeffs(taps[:, :, g, f]))
                pre[:, f] += op @ h[:, g]
        last = layer == model.config.n_layers - 1
        relu = model.config.activation.value == "relu" and (model.config.relu_last or not last)
        h = np.maximum(pre, 0.0) if relu else pre
    return h


def _dense_scores(model: GTCNNModel, spatial, temporal, x: np.ndarray) -> np.ndarray:
    feats = _dense_features(model, spatial, temporal, x)
    n, t = spatial.n, temporal.n
    pooled = feats.reshape(t, n, -1).mean(axis=0)
    node_logits = pooled @ model.params["readout.weight"] + model.params["readout.bias"]
    return node_logits.mean(axis=0)


def _permute_rows(x: np.ndarray, p: Permutation, n: int, t: int) -> np.ndarray:
    return x.reshape(t, n, -1)[:, p.mapping].reshape(n * t, -1)


def _numeric_gradient(model: GTCNNModel, spatial, temporal, x, weights, name: str, step=1e-5):
    grad = np.zeros_like(model.params[name])
    for idx in np.ndindex(grad.shape):
        values = []
        for sign in (1.0, -1.0):
            bumped = model.copy()
            bumped.params[name][idx] += sign * step
            out, _ = forward(bumped, spatial, temporal, x)
            values.append(float(np.sum(out * weights)))
        grad[idx] = (values[0] - values[1]) / (2 * step)
    return grad


@pytest.fixture
def setup(rng):
    spatial = random_symmetric_graph(5, rng, density=0.6)
    return spatial, line_graph(3)


class TestConfig:
    def test_round_trip(self):
        cfg = GTCNNConfig(
            features=(2, 4, 3),
            orders=((1, 2), (2, 0)),
            outputs=3,
            product_mode="product",
            product=ProductSpec.parametric([[0.0, 1.0], [1.0, 0.5]]),
            readout="regression",
            l1_weight=0.01,
        )
        again = GTCNNConfig.from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()
        assert again.learns_product

    def test_community_round_trip(self):
        cfg = GTCNNConfig(features=(1, 2), orders=((1, 1),), outputs=2, readout="community", communities=(0, 1, 1))
        again = GTCNNConfig.from_dict(cfg.to_dict())
        assert again.communities == (0, 1, 1) and again.classifies
        assert init_model(again, seed=0).params["readout.weight"].shape == (2, 1)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"features": (1,), "orders": ()},
            {"features": (1, 4), "orders": ((1, 1), (1, 1))},
            {"features": (1, 4), "orders": ((-1, 1),)},
            {"features": (1, 4), "orders": ((1, 1),), "outputs": 0},
            {"features": (1, 4), "orders": ((1, 1),), "architecture": "gcnn"},
            {"features": (1, 4), "orders": ((7, 0),), "product_mode": "product"},
            {"features": (1, 4), "orders": ((1, 1),), "activation": "tanh"},
            {"features": (1, 4), "orders": ((1, 1),), "readout": "community", "communities": (0, 0, 0)},
            {"features": (1, 4), "orders": ((1, 1),), "communities": (0, 1)},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            GTCNNConfig(**kwargs)

    def test_parameter_shapes(self):
        model = init_model(GTCNNConfig(features=(1, 4, 2), orders=((2, 1), (1, 3)), outputs=5), seed=0)
        assert model.params["layer0.taps"].shape == (3, 2, 1, 4)
        assert model.params["layer1.taps"].shape == (2, 4, 4, 2)
        assert model.params["readout.weight"].shape == (2, 5)
        assert "product.s" not in model.params

    def test_init_bounds(self):
        model = init_model(GTCNNConfig(features=(2, 3), orders=((2, 1),)), seed=4)
        bound = 1.0 / np.sqrt(2 * 3 * 2)
        assert np.all(np.abs(model.params["layer0.taps"]) <= bound)
        np.testing.assert_array_equal(model.params["readout.bias"], 0.0)

    def test_learned_scalars_start_near_the_pattern(self):
        cfg = GTCNNConfig(product_mode="product", product=ProductSpec.cartesian().as_parametric())
        s = init_model(cfg, seed=1).params["product.s"]
        assert np.all(np.abs(s - ProductSpec.cartesian().scalars()) <= 0.01)

    def test_wrong_parameter_set(self):
        cfg = GTCNNConfig(features=(1, 2), orders=((1, 1),))
        params = zero_model(cfg).params
        params["extra"] = np.zeros(1)
        with pytest.raises(ParameterError):
            GTCNNModel(cfg, params)


class TestForward:
    def test_zero_model_gives_uniform_scores(self, rng, setup):
        spatial, temporal = setup
        model = zero_model(GTCNNConfig(features=(1, 4), orders=((2, 2),), outputs=3))
        out, _ = forward(model, spatial, temporal, rng.standard_normal((15, 1)))
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_identity_network(self, edge_graph):
        cfg = GTCNNConfig(features=(1, 1), orders=((0, 0),), outputs=1, activation="none", readout="regression")
        model = GTCNNModel(
            cfg,
            {"layer0.taps": np.ones((1, 1, 1, 1)), "readout.weight": np.ones((1, 1)), "readout.bias": np.zeros(1)},
        )
        x = np.array([[0.7], [-2.0]])
        out, _ = forward(model, edge_graph, line_graph(1), x)
        np.testing.assert_array_equal(out, x)

    def test_dense_oracle(self, rng):
        spatial = random_symmetric_graph(6, rng)
        temporal = line_graph(3)
        model = init_model(GTCNNConfig(features=(2, 4, 3), orders=((2, 1), (1, 2)), outputs=3), seed=7)
        x = rng.standard_normal((18, 2))
        out, _ = forward(model, spatial, temporal, x)
        np.testing.assert_allclose(out, _dense_scores(model, spatial, temporal, x), atol=1e-10)
        expected = _dense_features(model, spatial, temporal, x)
        np.testing.assert_allclose(embed(model, spatial, temporal, x), expected, atol=1e-10)

    def test_product_mode_dense_oracle(self, rng):
        spatial = random_symmetric_graph(4, rng)
        temporal = cyclic_graph(3)
        cfg = GTCNNConfig(
            features=(1, 3),
            orders=((2, 0),),
            product_mode="product",
            product=ProductSpec.parametric([[0.2, 1.0], [0.7, 0.4]]),
        )
        model = init_model(cfg, seed=2)
        x = rng.standard_normal((12, 1))
        out, _ = forward(model, spatial, temporal, x)
        np.testing.assert_allclose(out, _dense_scores(model, spatial, temporal, x), atol=1e-10)

    def test_batch_matches_single(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 3), orders=((1, 1),)), seed=3)
        x = rng.standard_normal((4, 15, 1))
        batch, _ = forward(model, spatial, temporal, x)
        for b in range(4):
            np.testing.assert_allclose(batch[b], forward(model, spatial, temporal, x[b])[0], atol=1e-12)

    def test_regression_readout_uses_last_slice(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 3), orders=((1, 1),), outputs=2, readout="regression"), seed=3)
        x = rng.standard_normal((15, 1))
        out, _ = forward(model, spatial, temporal, x)
        feats = embed(model, spatial, temporal, x)
        expected = feats[10:] @ model.params["readout.weight"] + model.params["readout.bias"]
        assert out.shape == (5, 2)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_permutation_invariance(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 4, 4), orders=((2, 1), (1, 1)), outputs=3), seed=9)
        x = rng.standard_normal((15, 1))
        base, _ = forward(model, spatial, temporal, x)
        for seed in range(3):
            p = Permutation.random(5, seed=seed)
            moved, _ = forward(model, permute_graph(spatial, p), temporal, _permute_rows(x, p, 5, 3))
            np.testing.assert_allclose(moved, base, atol=1e-10)

    def test_community_readout(self, rng, setup):
        spatial, temporal = setup
        communities = (0, 1, 2, 0, 1)
        cfg = GTCNNConfig(features=(1, 3), orders=((2, 1),), outputs=3, readout="community", communities=communities)
        model = init_model(cfg, seed=6)
        x = rng.standard_normal((15, 1))
        out, _ = forward(model, spatial, temporal, x)
        pooled = _dense_features(model, spatial, temporal, x).reshape(3, 5, -1).mean(axis=0)
        node_logits = (pooled @ model.params["readout.weight"] + model.params["readout.bias"])[:, 0]
        expected = [node_logits[np.array(communities) == c].mean() for c in range(3)]
        np.testing.assert_allclose(out, expected, atol=1e-10)

    def test_community_readout_moves_with_the_nodes(self, rng, setup):
        spatial, temporal = setup
        communities = np.array([0, 1, 1, 0, 1])
        cfg = GTCNNConfig(features=(1, 4), orders=((2, 1),), outputs=2, readout="community", communities=communities)
        model = init_model(cfg, seed=9)
        x = rng.standard_normal((15, 1))
        base, _ = forward(model, spatial, temporal, x)
        for seed in range(3):
            p = Permutation.random(5, seed=seed)
            moved_cfg = GTCNNConfig(
                features=(1, 4), orders=((2, 1),), outputs=2, readout="community", communities=communities[p.mapping]
            )
            moved = GTCNNModel(moved_cfg, {k: v.copy() for k, v in model.params.items()})
            out, _ = forward(moved, permute_graph(spatial, p), temporal, _permute_rows(x, p, 5, 3))
            np.testing.assert_allclose(out, base, atol=1e-10)

    def test_community_readout_needs_every_node(self, rng, setup):
        spatial, temporal = setup
        cfg = GTCNNConfig(features=(1, 2), orders=((1, 1),), outputs=2, readout="community", communities=(0, 1, 0, 1))
        with pytest.raises(ParameterError):
            forward(init_model(cfg, seed=0), spatial, temporal, rng.standard_normal((15, 1)))

    def test_linear_network_is_homogeneous(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 3, 2), orders=((1, 1), (2, 1)), activation="none"), seed=5)
        x = rng.standard_normal((15, 1))
        out, _ = forward(model, spatial, temporal, x)
        scaled, _ = forward(model, spatial, temporal, 3.5 * x)
        np.testing.assert_allclose(scaled, 3.5 * out, atol=1e-10)

    def test_shape_mismatch(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(2, 3), orders=((1, 1),)), seed=0)
        with pytest.raises(ParameterError):
            forward(model, spatial, temporal, rng.standard_normal((15, 1)))
        with pytest.raises(ParameterError):
            forward(model, spatial, temporal, rng.standard_normal((14, 2)))

    def test_overflow_reports_layer(self, setup):
        spatial, temporal = setup
        cfg = GTCNNConfig(features=(1, 1), orders=((1, 1),), outputs=1)
        params = {
            "layer0.taps": np.full((2, 2, 1, 1), 10.0),
            "readout.weight": np.ones((1, 1)),
            "readout.bias": np.zeros(1),
        }
        with pytest.raises(NumericalError) as info:
            forward(GTCNNModel(cfg, params), spatial, temporal, np.full((15, 1), 1e308))
        assert info.value.layer == 0


class TestBackward:
    @pytest.mark.parametrize(
        "cfg",
        [
            GTCNNConfig(features=(1, 3, 2), orders=((2, 1), (1, 2)), outputs=3),
            GTCNNConfig(features=(2, 3), orders=((1, 1),), outputs=2, readout="regression", relu_last=False),
            GTCNNConfig(
                features=(1, 2, 2),
                orders=((2, 0), (1, 0)),
                outputs=2,
                product_mode="product",
                product=ProductSpec.parametric([[0.1, 0.9], [0.8, 0.3]]),
            ),
            GTCNNConfig(features=(1, 2), orders=((2, 0),), outputs=2, product_mode="product"),
            GTCNNConfig(
                features=(1, 3), orders=((1, 1),), outputs=2, readout="community", communities=(0, 1, 0, 1, 1)
            ),
        ],
        ids=["joint", "regression", "learned-product", "fixed-product", "community"],
    )
    def test_finite_differences(self, rng, setup, cfg):
        spatial, temporal = setup
        model = init_model(cfg, seed=11)
        x = rng.standard_normal((2, 15, cfg.features[0]))
        out, cache = forward(model, spatial, temporal, x)
        weights = rng.standard_normal(out.shape)
        grads = backward(model, cache, weights)
        assert set(grads) == set(model.params)
        for name in model.params:
            numeric = _numeric_gradient(model, spatial, temporal, x, weights, name)
            np.testing.assert_allclose(grads[name], numeric, rtol=1e-5, atol=1e-7, err_msg=name)

    def test_zero_upstream(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 3), orders=((1, 1),)), seed=1)
        out, cache = forward(model, spatial, temporal, rng.standard_normal((15, 1)))
        for grad in backward(model, cache, np.zeros_like(out)).values():
            np.testing.assert_array_equal(grad, 0.0)

    def test_linear_least_squares_gradient(self, rng, setup):
        spatial, temporal = setup
        cfg = GTCNNConfig(features=(1, 1), orders=((1, 1),), outputs=1, activation="none", readout="regression")
        model = init_model(cfg, seed=6)
        x = rng.standard_normal((15, 1))
        y = rng.standard_normal((5, 1))
        out, cache = forward(model, spatial, temporal, x)
        _, grad_out = mse(out, y)
        grads = backward(model, cache, grad_out)
        # prediction = A θ with A[:, (k, l)] the last slice of each shifted input.
        columns = []
        for k in range(2):
            for l in range(2):
                h = np.zeros((2, 2))
                h[k, l] = 1.0
                shifted = dense_joint_filter(spatial, temporal, JointFilterCoeffs(h)) @ x[:, 0]
                columns.append(shifted[10:])
        a = np.stack(columns, axis=1) * model.params["readout.weight"][0, 0]
        residual = out[:, 0] - y[:, 0]
        expected = 2.0 * a.T @ residual / 5
        np.testing.assert_allclose(grads["layer0.taps"].reshape(-1), expected, atol=1e-10)

    def test_stale_cache(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 3), orders=((1, 1),)), seed=1)
        out, cache = forward(model, spatial, temporal, rng.standard_normal((15, 1)))
        model.update("readout.bias", np.ones(2))
        with pytest.raises(ContractError):
            backward(model, cache, np.ones_like(out))

    def test_l1_subgradient(self, rng, setup):
        spatial, temporal = setup
        cfg = GTCNNConfig(
            features=(1, 2),
            orders=((1, 0),),
            product_mode="product",
            product=ProductSpec.parametric([[0.0, 1.0], [-1.0, 0.0]]),
            l1_weight=0.5,
        )
        model = zero_model(cfg)
        _, grads = loss_gradients(model, spatial, temporal, rng.standard_normal((3, 15, 1)), np.array([0, 1, 0]))
        # Zero taps leave no data gradient on s, so only 0.5·sign(s) remains.
        np.testing.assert_array_equal(grads["product.s"], [[0.0, 0.5], [-0.5, 0.0]])


class TestGCNN:
    def test_fold_layout(self, rng):
        x = rng.standard_normal((12, 2))
        folded = gcnn_inputs(x, 4, 3)
        assert folded.shape == (4, 6)
        for tau in range(3):
            for i in range(4):
                np.testing.assert_array_equal(folded[i, tau * 2 : tau * 2 + 2], x[tau * 4 + i])

    def test_dense_oracle(self, rng):
        spatial = random_symmetric_graph(5, rng)
        cfg = GTCNNConfig(features=(3, 4), orders=((2, 0),), outputs=2, architecture="gcnn")
        model = init_model(cfg, seed=3)
        x = rng.standard_normal((5, 3))
        taps = model.params["layer0.taps"][:, 0]
        s = spatial.dense()
        feats = np.maximum(sum(np.linalg.matrix_power(s, k) @ x @ taps[k] for k in range(3)), 0.0)
        expected = (feats @ model.params["readout.weight"] + model.params["readout.bias"]).mean(axis=0)
        out, _ = gcnn_baseline_forward(model, spatial, x)
        np.testing.assert_allclose(out, expected, atol=1e-10)

    def test_zero_order_is_a_pointwise_mlp(self, rng):
        spatial = random_symmetric_graph(5, rng)
        cfg = GTCNNConfig(features=(3, 4), orders=((2, 0),), outputs=2, architecture="gcnn")
        model = init_model(cfg, seed=3)
        model.params["layer0.taps"][1:] = 0.0
        x = rng.standard_normal((5, 3))
        feats = embed(model, spatial, line_graph(1), x)
        np.testing.assert_allclose(feats, np.maximum(x @ model.params["layer0.taps"][0, 0], 0.0), atol=1e-12)

    def test_predict_folds_time(self, rng, setup):
        spatial, temporal = setup
        cfg = GTCNNConfig(features=(3, 4), orders=((1, 0),), outputs=2, architecture="gcnn")
        model = init_model(cfg, seed=8)
        x = rng.standard_normal((2, 15, 1))
        via_predict, _ = predict(model, spatial, temporal, x)
        direct, _ = gcnn_baseline_forward(model, spatial, gcnn_inputs(x, 5, 3))
        np.testing.assert_array_equal(via_predict, direct)

    def test_needs_a_gcnn_model(self, rng, setup):
        spatial, _ = setup
        model = init_model(GTCNNConfig(features=(3, 2), orders=((1, 1),)), seed=0)
        with pytest.raises(ParameterError):
            gcnn_baseline_forward(model, spatial, rng.standard_normal((5, 3)))


class TestLosses:
    def test_uniform_cross_entropy(self):
        loss, grad = cross_entropy(np.zeros((2, 4)), np.array([1, 3]))
        assert abs(loss - np.log(4.0)) <= 1e-12
        np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)

    def test_cross_entropy_gradient(self, rng):
        logits = rng.standard_normal((3, 4))
        labels = np.array([0, 3, 2])
        _, grad = cross_entropy(logits, labels)
        step = 1e-6
        for idx in np.ndindex(logits.shape):
            bump = np.zeros_like(logits)
            bump[idx] = step
            numeric = (cross_entropy(logits + bump, labels)[0] - cross_entropy(logits - bump, labels)[0]) / (2 * step)
            assert abs(numeric - grad[idx]) <= 1e-8

    def test_cross_entropy_bad_labels(self):
        with pytest.raises(ParameterError):
            cross_entropy(np.zeros((2, 3)), np.array([0, 3]))

    def test_mse(self):
        loss, grad = mse(np.array([1.0, 3.0]), np.array([0.0, 1.0]))
        assert loss == 2.5
        np.testing.assert_array_equal(grad, [1.0, 2.0])

    def test_l1_penalty(self):
        loss, grad = l1_penalty(np.array([[0.0, -2.0], [0.5, 0.0]]), 0.1)
        assert abs(loss - 0.25) <= 1e-15
        np.testing.assert_array_equal(grad, [[0.0, -0.1], [0.1, 0.0]])


class TestMetrics:
    def test_perfect_predictions(self):
        y = np.array([1.0, -2.0, 3.0])
        assert mae(y, y) == rmse(y, y) == mape(y, y).value == 0.0
        assert accuracy(np.eye(3), np.arange(3)) == 1.0

    def test_offset_by_one(self):
        y = np.full(6, 2.0)
        assert mae(y + 1, y) == 1.0
        assert rmse(y + 1, y) == 1.0
        assert abs(mape(y + 1, y).value - 50.0) <= 1e-12

    def test_random_labels(self, rng):
        scores = rng.standard_normal((1000, 4))
        labels = rng.integers(0, 4, size=1000)
        assert abs(accuracy(scores, labels) - 0.25) <= 0.05

    def test_mape_skips_zero_targets(self):
        result = mape(np.array([1.0, 3.0]), np.array([0.0, 2.0]))
        assert result.skipped == 1
        assert abs(result.value - 50.0) <= 1e-12

    def test_mape_all_skipped(self):
        with pytest.raises(DegenerateError):
            mape(np.ones(3), np.zeros(3))

    def test_mismatched_lengths(self):
        with pytest.raises(ParameterError):
            mae(np.ones(3), np.ones(2))


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        params = {"w": np.array([1.0, -1.0, 0.5])}
        Adam(lr=0.01).step(params, {"w": np.array([2.0, -0.3, 5.0])})
        np.testing.assert_allclose(params["w"], [0.99, -0.99, 0.49], atol=1e-8)

    def test_zero_learning_rate(self):
        params = {"w": np.array([1.0, 2.0])}
        opt = Adam(lr=0.0)
        for _ in range(3):
            opt.step(params, {"w": np.array([1.0, -1.0])})
        np.testing.assert_array_equal(params["w"], [1.0, 2.0])


def _toy_data(rng, spatial, temporal, samples=24):
    """Class 0 has positive mean input, class 1 negative."""
    labels = np.arange(samples) % 2
    inputs = rng.standard_normal((samples, spatial.n * temporal.n, 1)) * 0.3
    inputs += np.where(labels == 0, 1.0, -1.0)[:, None, None]
    return Dataset(inputs, labels)


class TestTraining:
    def test_split_sizes(self, rng):
        data = Dataset(rng.standard_normal((10, 3, 1)), np.zeros(10, dtype=int))
        parts = split_dataset(data, (0.8, 0.1, 0.1))
        assert [len(p) for p in parts] == [8, 1, 1]
        np.testing.assert_array_equal(parts[1].inputs, data.inputs[8:9])

    def test_train_config_validation(self):
        with pytest.raises(ParameterError):
            TrainConfig(split=(0.5, 0.2, 0.2))
        with pytest.raises(ParameterError):
            TrainConfig(batch_size=0)
        assert TrainConfig.from_dict(TrainConfig(epochs=3).to_dict()) == TrainConfig(epochs=3)

    def test_zero_learning_rate_leaves_parameters(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 3), orders=((1, 1),)), seed=0)
        data = _toy_data(rng, spatial, temporal)
        tc = TrainConfig(epochs=3, batch_size=8, learning_rate=0.0)
        trained, history = train(model, spatial, temporal, data, data.subset(slice(0, 0)), tc)
        for name in model.params:
            np.testing.assert_array_equal(trained.params[name], model.params[name])
        assert len(history.records) == 3
        assert np.isnan(history.records[0].val_loss)

    def test_original_model_untouched(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 3), orders=((1, 1),)), seed=0)
        before = {k: v.copy() for k, v in model.params.items()}
        tc = TrainConfig(epochs=2, batch_size=8, learning_rate=0.05)
        train(model, spatial, temporal, _toy_data(rng, spatial, temporal), _toy_data(rng, spatial, temporal, 4), tc)
        for name, value in before.items():
            np.testing.assert_array_equal(model.params[name], value)

    def test_learns_the_toy_task(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 4), orders=((1, 1),)), seed=2)
        train_set = _toy_data(rng, spatial, temporal, 40)
        val_set = _toy_data(rng, spatial, temporal, 20)
        tc = TrainConfig(epochs=60, batch_size=8, learning_rate=0.05, seed=1)
        trained, history = train(model, spatial, temporal, train_set, val_set, tc)
        assert history.train_losses[-1] < history.train_losses[0]
        assert evaluate(trained, spatial, temporal, val_set) >= 0.9

    def test_overfits_one_sample(self, rng, setup):
        spatial, temporal = setup
        cfg = GTCNNConfig(features=(1, 2), orders=((1, 1),), outputs=1, readout="regression", relu_last=False)
        model = init_model(cfg, seed=4)
        data = Dataset(rng.standard_normal((1, 15, 1)), rng.standard_normal((1, 5, 1)))
        _, history = train(model, spatial, temporal, data, data, TrainConfig(epochs=300, batch_size=1, learning_rate=0.01))
        assert history.train_losses[-1] < 0.5 * history.train_losses[0]

    def test_deterministic(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 3), orders=((1, 1),)), seed=0)
        train_set = _toy_data(rng, spatial, temporal)
        val_set = _toy_data(rng, spatial, temporal, 6)
        tc = TrainConfig(epochs=4, batch_size=5, learning_rate=0.01, seed=13)
        first, h1 = train(model, spatial, temporal, train_set, val_set, tc)
        second, h2 = train(model, spatial, temporal, train_set, val_set, tc)
        assert h1.records == h2.records
        for name in first.params:
            np.testing.assert_array_equal(first.params[name], second.params[name])

    def test_activation_overflow_is_a_divergence(self, setup):
        spatial, temporal = setup
        cfg = GTCNNConfig(features=(1, 1), orders=((1, 1),), outputs=2)
        params = {
            "layer0.taps": np.full((2, 2, 1, 1), 10.0),
            "readout.weight": np.ones((1, 2)),
            "readout.bias": np.zeros(2),
        }
        data = Dataset(np.full((4, 15, 1), 1e308), np.zeros(4, dtype=int))
        with pytest.raises(TrainingDivergedError) as info:
            train(GTCNNModel(cfg, params), spatial, temporal, data, data, TrainConfig(epochs=1, batch_size=2))
        assert (info.value.epoch, info.value.batch, info.value.layer) == (1, 0, 0)
        assert np.isnan(info.value.loss)
        assert isinstance(info.value.__cause__, NumericalError)

    def test_empty_training_set(self, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 3), orders=((1, 1),)), seed=0)
        empty = Dataset(np.zeros((0, 15, 1)), np.zeros(0, dtype=int))
        with pytest.raises(ParameterError):
            train(model, spatial, temporal, empty, empty, TrainConfig(epochs=1))

    def test_evaluate_metrics(self, rng, setup):
        spatial, temporal = setup
        model = init_model(GTCNNConfig(features=(1, 2), orders=((1, 1),), outputs=1, readout="regression"), seed=0)
        data = Dataset(rng.standard_normal((3, 15, 1)), rng.standard_normal((3, 5, 1)))
        outputs, _ = predict(model, spatial, temporal, data.inputs)
        assert evaluate(model, spatial, temporal, data) == mae(outputs, data.targets)
        assert evaluate(model, spatial, temporal, data, Metric.RMSE) == rmse(outputs, data.targets)
        with pytest.raises(ParameterError):
            evaluate(model, spatial, temporal, data.subset(slice(0, 0)))
