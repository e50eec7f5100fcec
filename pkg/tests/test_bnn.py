import json

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from bnkf.bnn import (
    FEATURE_DIM,
    MODEL_FORMAT,
    Adam,
    BayesLinearLayer,
    BnnModel,
    FeatureVector,
    Standardizer,
    TrainConfig,
    feature_matrix,
    forward_sample,
    kl_divergence,
    load_model,
    loss,
    loss_and_gradients,
    mc_predict,
    mc_predict_batch,
    sample_outputs,
    save_model,
    softplus,
    train,
    write_trace,
)
from bnkf.errors import ModelError
from bnkf.simkit import NOISE_TIERS


def _small_model(rng, out=2, n_in=3, hidden=(4,), rho_init=-1.0, prior_sigma=0.5, activation="silu"):
    model = BnnModel.initialize(out, rng, input_dim=n_in, hidden=hidden, rho_init=rho_init,
                                prior_sigma=prior_sigma, activation=activation)
    model.input_scaler = Standardizer.identity(n_in)
    model.target_scaler = Standardizer.identity(out)
    return model


def _collapse(model, rho=-40.0):
    for layer in model.layers:
        layer.weight_rho[...] = rho
        layer.bias_rho[...] = rho
    return model


def _linear_task(rng, n, noise=0.1):
    A = np.array([[1.0, -0.5, 0.3], [0.2, 0.8, -1.0]])
    X = rng.standard_normal((n, 3))
    return X, X @ A.T + noise * rng.standard_normal((n, 2))


class Test_softplus:
    def test_positive_and_stable(self):
        rho = np.array([-800.0, -40.0, 0.0, 40.0, 800.0])
        sigma = softplus(rho)
        assert np.all(sigma[1:] > 0)
        assert np.all(np.isfinite(sigma))
        assert sigma[2] == pytest.approx(np.log(2.0))
        assert sigma[-1] == pytest.approx(800.0)


class Test_layer_kl:
    def test_posterior_equals_prior(self):
        rho = np.log(np.expm1(1.0))
        layer = BayesLinearLayer(np.zeros((3, 2)), np.full((3, 2), rho), np.zeros(3), np.full(3, rho))
        assert layer.kl(1.0) == pytest.approx(0.0, abs=1e-12)

    def test_single_entry(self):
        rho = np.log(np.expm1(1.0))
        layer = BayesLinearLayer(np.ones((1, 1)), np.full((1, 1), rho), np.zeros(1), np.full(1, rho))
        assert layer.kl(1.0) == pytest.approx(0.5, abs=1e-12)

    def test_matches_quadrature(self, rng):
        prior_sigma = 0.5
        layer = BayesLinearLayer(
            rng.uniform(-1.0, 1.0, (2, 3)), rng.uniform(-2.0, 1.0, (2, 3)),
            rng.uniform(-1.0, 1.0, 2), rng.uniform(-2.0, 1.0, 2),
        )
        mus = np.concatenate([layer.weight_mu.ravel(), layer.bias_mu])
        sigmas = np.concatenate([layer.weight_sigma.ravel(), layer.bias_sigma])

        expected = 0.0
        for mu, sigma in zip(mus, sigmas):
            value, _ = quad(
                lambda w: norm.pdf(w, mu, sigma) * (norm.logpdf(w, mu, sigma) - norm.logpdf(w, 0.0, prior_sigma)),
                mu - 12 * sigma, mu + 12 * sigma, epsabs=1e-12, epsrel=1e-12, limit=200,
            )
            expected += value
        assert layer.kl(prior_sigma) == pytest.approx(expected, abs=1e-6)

    def test_non_negative(self, rng):
        model = BnnModel.initialize(3, rng, hidden=(8, 8))
        assert kl_divergence(model) >= 0.0


class Test_Standardizer:
    def test_fit_transform_inverse(self, rng):
        data = rng.normal(5.0, 3.0, (100, 4))
        scaler = Standardizer.fit(data)
        std = scaler.transform(data)
        np.testing.assert_allclose(std.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(std.std(axis=0), 1.0, rtol=1e-12)
        np.testing.assert_allclose(scaler.inverse_transform(std), data, rtol=1e-12)

    def test_constant_column(self):
        scaler = Standardizer.fit(np.array([[1.0, 2.0], [3.0, 2.0]]))
        assert scaler.std[1] == 1.0
        np.testing.assert_array_equal(scaler.transform([[2.0, 2.0]]), [[0.0, 0.0]])

    def test_unfitted(self):
        scaler = Standardizer()
        assert not scaler.fitted
        with pytest.raises(ModelError):
            scaler.transform(np.zeros((1, 2)))
        with pytest.raises(ModelError):
            scaler.inverse_transform(np.zeros((1, 2)))


class Test_features:
    def test_layout_and_wrap(self):
        sigmas = NOISE_TIERS["medium"]
        z0 = np.array([[1000.0, 1.5 * np.pi, 0.1, -3.0]])
        z1 = np.array([[1001.0, -1.5 * np.pi, 0.2, -2.0]])
        features = feature_matrix(z0, z1, sigmas.as_vector())
        assert features.shape == (1, FEATURE_DIM)
        assert features[0, 1] == pytest.approx(-0.5 * np.pi)
        assert features[0, 5] == pytest.approx(0.5 * np.pi)
        np.testing.assert_array_equal(features[0, 8:], sigmas.as_vector())
        np.testing.assert_array_equal(features[0, [0, 3, 4, 7]], [1000.0, -3.0, 1001.0, -2.0])

    def test_sigmas_broadcast(self, rng):
        z = rng.uniform(0.1, 1.0, (7, 4))
        features = feature_matrix(z, z, NOISE_TIERS["low"].as_vector())
        assert features.shape == (7, FEATURE_DIM)
        assert np.all(features[:, 8:] == features[0, 8:])

    def test_feature_vector(self):
        values = np.array([1000.0, 0.3, 0.1, -3.0, 1001.0, 0.31, 0.11, -2.5, 10.0, 1e-4, 2e-4, 0.1])
        vector = FeatureVector.from_array(values)
        assert vector.sigmas.range_rate == 0.1
        assert vector.next.bearing == 0.31
        np.testing.assert_allclose(vector.as_array(), values, rtol=0, atol=1e-15)


class Test_forward_sample:
    def test_collapsed_posterior_is_mean_network(self, rng):
        model = _collapse(_small_model(rng))
        x = rng.standard_normal((5, 3))
        for seed in (0, 1, 99):
            np.testing.assert_allclose(forward_sample(model, x, seed), model.mean_forward(x), rtol=1e-12, atol=1e-12)

    def test_seed_determinism(self, rng):
        model = _small_model(rng)
        x = rng.standard_normal((4, 3))
        np.testing.assert_array_equal(forward_sample(model, x, 11), forward_sample(model, x, 11))
        assert not np.array_equal(forward_sample(model, x, 11), forward_sample(model, x, 12))

    def test_identity_layer(self, rng):
        X = rng.normal(3.0, 2.0, (6, 3))
        layer = BayesLinearLayer(np.eye(3), np.full((3, 3), -40.0), np.zeros(3), np.full(3, -40.0))
        model = BnnModel([layer], activation="identity",
                         input_scaler=Standardizer.fit(X), target_scaler=Standardizer.identity(3))
        np.testing.assert_allclose(forward_sample(model, X, 0), model.input_scaler.transform(X), atol=1e-12)

    def test_unfitted_scaler(self, rng):
        model = BnnModel.initialize(2, rng, input_dim=3, hidden=(4,))
        with pytest.raises(ModelError):
            forward_sample(model, np.zeros(3), 0)

    def test_bad_model(self, rng):
        with pytest.raises(ModelError):
            BnnModel.initialize(2, rng, input_dim=3, hidden=(4,), activation="tanh")
        layers = BnnModel.initialize(2, rng, input_dim=3, hidden=(4,)).layers
        with pytest.raises(ModelError):
            BnnModel(layers[::-1])


class Test_loss:
    def test_unit_offset_mse(self, rng):
        layer = BayesLinearLayer(np.eye(3), np.full((3, 3), -40.0), np.zeros(3), np.full(3, -40.0))
        model = BnnModel([layer], activation="identity",
                         input_scaler=Standardizer.identity(3), target_scaler=Standardizer.identity(3))
        x = rng.standard_normal((8, 3))
        total, breakdown = loss(model, x, x + 1.0, beta=0.0, rng=0)
        assert breakdown["mse"] == pytest.approx(1.0, rel=1e-12)
        assert breakdown["kl_term"] == 0.0
        assert total == breakdown["mse"]

    def test_kl_term_scaling(self, rng):
        model = _small_model(rng)
        x, y = rng.standard_normal((5, 3)), rng.standard_normal((5, 2))
        _, breakdown = loss(model, x, y, beta=2.0, n_train=40, rng=3)
        assert breakdown["kl"] == pytest.approx(kl_divergence(model))
        assert breakdown["kl_term"] == pytest.approx(2.0 * breakdown["kl"] / 40)

    def test_empty_batch(self, rng):
        model = _small_model(rng)
        with pytest.raises(ModelError):
            loss(model, np.empty((0, 3)), np.empty((0, 2)))

    def test_gradients_match_finite_differences(self, rng):
        model = _small_model(rng)
        x, y = rng.standard_normal((5, 3)), rng.standard_normal((5, 2))
        noise = [rng.standard_normal((5, layer.n_out)) for layer in model.layers]
        kwargs = dict(beta=1.0, n_train=10, noise=noise)

        _, _, grads = loss_and_gradients(model, x, y, **kwargs)
        h = 1e-6
        for param, grad in zip(model.parameters(), grads):
            assert grad.shape == param.shape
            numeric = np.zeros_like(param)
            for idx in np.ndindex(param.shape):
                original = param[idx]
                param[idx] = original + h
                upper, _ = loss(model, x, y, **kwargs)
                param[idx] = original - h
                lower, _ = loss(model, x, y, **kwargs)
                param[idx] = original
                numeric[idx] = (upper - lower) / (2 * h)
            np.testing.assert_allclose(grad, numeric, rtol=1e-4, atol=1e-8)


class Test_Adam:
    def test_first_step_is_lr_sized(self):
        p = np.array([1.0, -2.0])
        Adam([p], lr=0.01).step([np.array([0.5, -3.0])])
        np.testing.assert_allclose(p, [0.99, -1.99], rtol=1e-6)

    def test_minimizes_quadratic(self):
        p = np.array([0.0, 10.0])
        optimizer = Adam([p], lr=0.01)
        for _ in range(3000):
            optimizer.step([2.0 * (p - 3.0)])
        np.testing.assert_allclose(p, [3.0, 3.0], atol=0.05)


class Test_mc_predict:
    def test_collapsed_posterior_hits_floor(self, rng):
        model = _collapse(_small_model(rng, out=3))
        x = rng.standard_normal(3)
        moments = mc_predict(model, x, n=10, seed=4)
        assert moments.n_samples == 10
        np.testing.assert_allclose(moments.covariance, 1e-6 * np.eye(3), atol=1e-15)
        np.testing.assert_allclose(moments.mean, model.mean_forward(x), rtol=1e-12, atol=1e-12)

    def test_two_samples(self, rng):
        model = _small_model(rng, out=3)
        x = rng.standard_normal((1, 3))
        s1, s2 = sample_outputs(model, x, 2, 21)[:, 0]
        moments = mc_predict(model, x[0], n=2, seed=21, floor=0.0)
        np.testing.assert_allclose(moments.mean, 0.5 * (s1 + s2), rtol=1e-12)
        np.testing.assert_allclose(np.diag(moments.covariance), (s1 - s2) ** 2 / 2, rtol=1e-10)

    def test_psd_and_deterministic(self, rng):
        model = _small_model(rng, out=3, hidden=(8, 8))
        X = rng.standard_normal((15, 3))
        means, covs = mc_predict_batch(model, X, n=20, seed=8)
        again_means, again_covs = mc_predict_batch(model, X, n=20, seed=8)
        np.testing.assert_array_equal(means, again_means)
        np.testing.assert_array_equal(covs, again_covs)
        np.testing.assert_array_equal(covs, np.swapaxes(covs, 1, 2))
        assert np.all(np.linalg.eigvalsh(covs) >= 1e-6 - 1e-12)

    def test_row_independent(self, rng):
        model = _small_model(rng, out=3)
        X = rng.standard_normal((6, 3))
        means, covs = mc_predict_batch(model, X, n=30, seed=2)
        moments = mc_predict(model, X[4], n=30, seed=2)
        np.testing.assert_allclose(moments.mean, means[4], rtol=1e-12)
        np.testing.assert_allclose(moments.covariance, covs[4], rtol=1e-10)

    def test_scalar_output(self, rng):
        moments = mc_predict(_small_model(rng, out=1), rng.standard_normal(3), n=5)
        assert moments.mean.shape == (1,)
        assert moments.covariance.shape == (1, 1)

    def test_too_few_samples(self, rng):
        with pytest.raises(ModelError):
            mc_predict(_small_model(rng), np.zeros(3), n=1)

    def test_converges_with_samples(self, rng):
        model = _small_model(rng, out=3, hidden=(8,), rho_init=-1.5)
        X = rng.standard_normal((20, 3))
        _, small = mc_predict_batch(model, X, n=100, seed=1)
        _, large = mc_predict_batch(model, X, n=10_000, seed=2)
        rel = np.linalg.norm(small - large, axis=(1, 2)) / np.linalg.norm(large, axis=(1, 2))
        assert np.median(rel) <= 0.25


class Test_train:
    CONFIG = TrainConfig(epochs=3, batch_size=32, hidden=(8, 8), seed=5, lr=1e-2)

    def test_reproducible(self, rng):
        X, Y = _linear_task(rng, 200)
        first = train(X, Y, self.CONFIG)
        second = train(X, Y, self.CONFIG)
        for a, b in zip(first.parameters(), second.parameters()):
            np.testing.assert_array_equal(a, b)
        assert first.trace == second.trace

    def test_seed_changes_model(self, rng):
        X, Y = _linear_task(rng, 100)
        other = TrainConfig(epochs=3, batch_size=32, hidden=(8, 8), seed=6, lr=1e-2)
        first, second = train(X, Y, self.CONFIG), train(X, Y, other)
        assert not np.array_equal(first.layers[0].weight_mu, second.layers[0].weight_mu)

    def test_fingerprint_and_trace(self, rng):
        X, Y = _linear_task(rng, 100)
        model = train(X, Y, self.CONFIG, tags={"fold": 3, "tier": "low"})
        assert model.fingerprint["seed"] == 5
        assert model.fingerprint["hidden"] == [8, 8]
        assert model.fingerprint["n_train"] == 100
        assert model.fingerprint["output_dim"] == 2
        assert model.fingerprint["fold"] == 3
        assert [record["epoch"] for record in model.trace] == [1, 2, 3]
        assert model.architecture == [3, 8, 8, 2]

    def test_scalers_fit_on_training_rows(self, rng):
        X, Y = _linear_task(rng, 50)
        model = train(X, Y, self.CONFIG)
        np.testing.assert_allclose(model.input_scaler.mean, X.mean(axis=0))
        np.testing.assert_allclose(model.target_scaler.std, Y.std(axis=0))

    def test_too_few_examples(self):
        with pytest.raises(ModelError):
            train(np.zeros((1, 3)), np.zeros((1, 2)), self.CONFIG)
        with pytest.raises(ModelError):
            train(np.zeros((0, 3)), np.zeros((0, 2)), self.CONFIG)

    def test_non_finite_targets(self, rng):
        X, Y = _linear_task(rng, 20)
        Y[3, 1] = np.nan
        with pytest.raises(ModelError):
            train(X, Y, self.CONFIG)

    def test_kl_weight_raises_loss(self, rng):
        X, Y = _linear_task(rng, 300)
        plain = train(X, Y, TrainConfig(epochs=5, batch_size=32, hidden=(8,), seed=1, kl_weight=0.0))
        regularized = train(X, Y, TrainConfig(epochs=5, batch_size=32, hidden=(8,), seed=1, kl_weight=1.0))
        assert all(record["kl_term"] == 0.0 for record in plain.trace)
        assert plain.trace[-1]["loss"] < regularized.trace[-1]["loss"]

    @pytest.mark.slow
    def test_learns_linear_map(self):
        rng = np.random.default_rng(7)
        X, Y = _linear_task(rng, 2000, noise=0.1)
        config = TrainConfig(epochs=30, batch_size=64, hidden=(32, 32), seed=0, lr=5e-3, kl_weight=0.0)
        model = train(X, Y, config)

        X_test, Y_test = _linear_task(rng, 500, noise=0.1)
        rmse = np.sqrt(np.mean((model.mean_forward(X_test) - Y_test) ** 2))
        assert rmse <= 0.2

        losses = np.array([record["loss"] for record in model.trace[:10]])
        smoothed = np.convolve(losses, np.ones(3) / 3, mode="valid")
        assert np.all(np.diff(smoothed) <= 0.02 * smoothed[:-1])
        assert model.trace[-1]["loss"] < model.trace[0]["loss"]


class Test_artifact:
    def test_round_trip_exact(self, rng, tmp_path):
        X, Y = _linear_task(rng, 60)
        model = train(X, Y, TrainConfig(epochs=2, batch_size=16, hidden=(4,), seed=2), tags={"fold": 0})
        path = save_model(model, tmp_path / "models" / "joint.json")
        loaded = load_model(path)
        for a, b in zip(model.parameters(), loaded.parameters()):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(loaded.input_scaler.std, model.input_scaler.std)
        np.testing.assert_array_equal(loaded.target_scaler.mean, model.target_scaler.mean)
        assert loaded.fingerprint == model.fingerprint
        assert loaded.to_dict() == model.to_dict()
        np.testing.assert_array_equal(mc_predict(loaded, X[0], n=5).mean, mc_predict(model, X[0], n=5).mean)

    def test_rejects_foreign_documents(self, rng, tmp_path):
        model = _small_model(rng)
        path = save_model(model, tmp_path / "model.json")
        document = json.loads(path.read_text())

        wrong_version = dict(document, version=99)
        (tmp_path / "v.json").write_text(json.dumps(wrong_version))
        with pytest.raises(ModelError):
            load_model(tmp_path / "v.json")

        (tmp_path / "f.json").write_text(json.dumps(dict(document, format="other")))
        with pytest.raises(ModelError):
            load_model(tmp_path / "f.json")

        (tmp_path / "broken.json").write_text("{not json")
        with pytest.raises(ModelError):
            load_model(tmp_path / "broken.json")

        document["model"]["architecture"] = [3, 5, 2]
        (tmp_path / "a.json").write_text(json.dumps(document))
        with pytest.raises(ModelError):
            load_model(tmp_path / "a.json")
        assert document["format"] == MODEL_FORMAT

    def test_write_trace(self, rng, tmp_path):
        X, Y = _linear_task(rng, 40)
        model = train(X, Y, TrainConfig(epochs=2, batch_size=16, hidden=(4,), seed=2))
        frame = pd.read_csv(write_trace(model, tmp_path / "trace.csv"))
        assert list(frame.columns) == ["epoch", "loss", "mse", "kl_term"]
        assert frame["epoch"].tolist() == [1, 2]
